#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "smallgeo/unet/tensor.hpp"

namespace smallgeo {

struct UNetConfig {
    int patch_size = 16;
    int in_channels = 8;
    int n_classes = 2;
    int depth = 5; // resolution levels, including the bottleneck
    int base_channels = 8;
    double dropout_rate = 0.2;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double grad_clip = 1.0; // max global L2 norm of a batch gradient; 0 disables clipping
    int epochs = 1000;
    int batch_size = 32;
    std::uint64_t seed = 42;

    // Throws ValidationError when a field is out of range.
    void validate() const;
    // Channel width at encoder level l.
    int channels(int level) const { return base_channels << level; }

    friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

namespace unet {

struct ConvSpec {
    int k = 3;
    int cin = 0;
    int cout = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    std::size_t weight_count() const { return static_cast<std::size_t>(k) * k * cin * cout; }

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// Convolution list in parameter order: for each encoder level, two convs; then
// for each decoder level from the deepest up, the post-upsample conv, the conv
// over the concatenation and a refining conv; finally the 1x1 head.
std::vector<ConvSpec> conv_layout(const UNetConfig& config);
std::size_t parameter_count(const UNetConfig& config);

inline int encoder_conv(int level, int j) { return 2 * level + j; }
inline int decoder_conv(const UNetConfig& c, int level, int j) { return 2 * c.depth + 3 * (c.depth - 2 - level) + j; }
inline int head_conv(const UNetConfig& c) { return 2 * c.depth + 3 * (c.depth - 1); }

// Architecture plus a flat parameter vector.
template <class T>
class BasicUNet {
  public:
    // Zero parameters.
    explicit BasicUNet(const UNetConfig& config);

    // Weights uniform in +-sqrt(6 / fan_in) from a generator seeded with
    // config.seed, biases zero.
    static BasicUNet initialized(const UNetConfig& config);

    const UNetConfig& config() const noexcept { return config_; }
    const std::vector<ConvSpec>& convs() const noexcept { return convs_; }
    std::vector<T>& params() noexcept { return params_; }
    const std::vector<T>& params() const noexcept { return params_; }

    std::span<const T> weight(int conv) const {
        const auto& s = convs_[static_cast<std::size_t>(conv)];
        return std::span<const T>(params_).subspan(s.weight_offset, s.weight_count());
    }
    std::span<const T> bias(int conv) const {
        const auto& s = convs_[static_cast<std::size_t>(conv)];
        return std::span<const T>(params_).subspan(s.bias_offset, static_cast<std::size_t>(s.cout));
    }

    template <class U>
    BasicUNet<U> cast() const {
        BasicUNet<U> out(config_);
        out.params().assign(params_.begin(), params_.end());
        return out;
    }

    friend bool operator==(const BasicUNet&, const BasicUNet&) = default;

  private:
    UNetConfig config_;
    std::vector<ConvSpec> convs_;
    std::vector<T> params_;
};

// Runs a network forward and backward, caching the activations a backward
// pass needs. One executor serves one thread.
template <class T>
class Executor {
  public:
    explicit Executor(const BasicUNet<T>& net);

    // input is (n, patch, patch, in_channels). Dropout is applied only when
    // training, with masks drawn from a generator seeded with `seed`.
    const Tensor4<T>& forward(const Tensor4<T>& input, bool training, std::uint64_t seed = 0);

    // Gradient of every parameter (same layout as params()) given the
    // gradient of the loss w.r.t. the logits of the last forward pass.
    // Throws ProtocolError when no forward pass is cached.
    std::vector<T> backward(const Tensor4<T>& grad_logits);

    // Optionally also returns the gradient w.r.t. the network input.
    std::vector<T> backward(const Tensor4<T>& grad_logits, Tensor4<T>* grad_input);

    bool has_cache() const noexcept { return cached_; }

  private:
    struct ConvCache {
        Tensor4<T> out;
        std::vector<T> col;
        int in_n = 0, in_h = 0, in_w = 0, in_c = 0;
    };

    void run_conv(int conv, const Tensor4<T>& in, bool relu);
    void back_conv(int conv, Tensor4<T>& grad_out, bool relu, std::vector<T>& grads, Tensor4<T>* grad_in);

    const BasicUNet<T>& net_;
    std::vector<ConvCache> conv_;
    std::vector<Tensor4<T>> enc_out_;              // per level, after dropout
    std::vector<Tensor4<T>> pooled_;               // input of level l (l >= 1)
    std::vector<std::vector<std::uint32_t>> argmax_;
    std::vector<std::vector<T>> dropout_mask_;
    std::vector<Tensor4<T>> upsampled_;
    std::vector<Tensor4<T>> concat_;
    std::vector<T> scratch_;
    bool dropout_applied_ = false;
    bool cached_ = false;
};

extern template class BasicUNet<float>;
extern template class BasicUNet<double>;
extern template class Executor<float>;
extern template class Executor<double>;

} // namespace unet
} // namespace smallgeo
