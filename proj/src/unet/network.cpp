#include <cmath>
#include <string>

#include "smallgeo/errors.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/unet/layers.hpp"
#include "smallgeo/unet/network.hpp"

namespace smallgeo {

void UNetConfig::validate() const {
    if (depth < 2 || depth > 8) throw ValidationError("unet depth must be in 2-8");
    if (patch_size < 1 || patch_size % (1 << (depth - 1)) != 0) {
        throw ValidationError("patch_size " + std::to_string(patch_size) + " is not divisible by 2^(depth-1)");
    }
    if (in_channels < 1) throw ValidationError("in_channels must be >= 1");
    if (n_classes < 1 || n_classes > 255) throw ValidationError("n_classes must be in 1-255");
    if (base_channels < 1 || (static_cast<long long>(base_channels) << (depth - 1)) > 4096) {
        throw ValidationError("base_channels out of range");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must be in [0, 1)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
    if (!(grad_clip >= 0.0) || !std::isfinite(grad_clip)) throw ValidationError("grad_clip must be >= 0");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

namespace unet {

std::vector<ConvSpec> conv_layout(const UNetConfig& c) {
    c.validate();
    std::vector<ConvSpec> convs;
    std::size_t offset = 0;
    auto add = [&](int k, int cin, int cout) {
        ConvSpec s{k, cin, cout, offset, 0};
        s.bias_offset = offset + s.weight_count();
        offset = s.bias_offset + static_cast<std::size_t>(cout);
        convs.push_back(s);
    };
    for (int l = 0; l < c.depth; ++l) {
        add(3, l == 0 ? c.in_channels : c.channels(l - 1), c.channels(l));
        add(3, c.channels(l), c.channels(l));
    }
    for (int l = c.depth - 2; l >= 0; --l) {
        add(3, c.channels(l + 1), c.channels(l));
        add(3, 2 * c.channels(l), c.channels(l));
        add(3, c.channels(l), c.channels(l));
    }
    add(1, c.channels(0), c.n_classes);
    return convs;
}

std::size_t parameter_count(const UNetConfig& config) {
    const auto convs = conv_layout(config);
    return convs.back().bias_offset + static_cast<std::size_t>(convs.back().cout);
}

template <class T>
BasicUNet<T>::BasicUNet(const UNetConfig& config)
    : config_(config), convs_(conv_layout(config)), params_(parameter_count(config), T(0)) {}

template <class T>
BasicUNet<T> BasicUNet<T>::initialized(const UNetConfig& config) {
    BasicUNet net(config);
    Rng rng(config.seed);
    for (const auto& s : net.convs_) {
        const double bound = std::sqrt(6.0 / (static_cast<double>(s.k) * s.k * s.cin));
        for (std::size_t i = 0; i < s.weight_count(); ++i) {
            net.params_[s.weight_offset + i] = static_cast<T>(rng.uniform(-bound, bound));
        }
    }
    return net;
}

template <class T>
Executor<T>::Executor(const BasicUNet<T>& net)
    : net_(net),
      conv_(net.convs().size()),
      enc_out_(static_cast<std::size_t>(net.config().depth)),
      pooled_(static_cast<std::size_t>(net.config().depth)),
      argmax_(static_cast<std::size_t>(net.config().depth)),
      dropout_mask_(static_cast<std::size_t>(net.config().depth)),
      upsampled_(static_cast<std::size_t>(net.config().depth)),
      concat_(static_cast<std::size_t>(net.config().depth)) {}

template <class T>
void Executor<T>::run_conv(int conv, const Tensor4<T>& in, bool relu) {
    const auto& s = net_.convs()[static_cast<std::size_t>(conv)];
    auto& cache = conv_[static_cast<std::size_t>(conv)];
    cache.in_n = in.n;
    cache.in_h = in.h;
    cache.in_w = in.w;
    cache.in_c = in.c;
    conv_forward(in, net_.weight(conv), net_.bias(conv), s.k, s.cout, cache.out, cache.col);
    if (relu) relu_forward(cache.out);
}

template <class T>
void Executor<T>::back_conv(int conv, Tensor4<T>& grad_out, bool relu, std::vector<T>& grads, Tensor4<T>* grad_in) {
    const auto& s = net_.convs()[static_cast<std::size_t>(conv)];
    auto& cache = conv_[static_cast<std::size_t>(conv)];
    if (relu) relu_backward(cache.out, grad_out);
    if (grad_in != nullptr) grad_in->resize(cache.in_n, cache.in_h, cache.in_w, cache.in_c);
    conv_backward(cache.col, grad_out, net_.weight(conv), s.k,
                  std::span<T>(grads).subspan(s.weight_offset, s.weight_count()),
                  std::span<T>(grads).subspan(s.bias_offset, static_cast<std::size_t>(s.cout)), grad_in, scratch_);
}

template <class T>
const Tensor4<T>& Executor<T>::forward(const Tensor4<T>& input, bool training, std::uint64_t seed) {
    const auto& c = net_.config();
    if (input.h != c.patch_size || input.w != c.patch_size || input.c != c.in_channels || input.n < 1) {
        throw DimensionError("batch shape (" + std::to_string(input.n) + ", " + std::to_string(input.h) + ", " +
                             std::to_string(input.w) + ", " + std::to_string(input.c) + ") does not match (n, " +
                             std::to_string(c.patch_size) + ", " + std::to_string(c.patch_size) + ", " +
                             std::to_string(c.in_channels) + ")");
    }
    cached_ = false;
    dropout_applied_ = training && c.dropout_rate > 0.0;
    Rng rng(seed);
    const int depth = c.depth;
    for (int l = 0; l < depth; ++l) {
        const Tensor4<T>* x = &input;
        if (l > 0) {
            maxpool_forward(enc_out_[l - 1], pooled_[l], argmax_[l]);
            x = &pooled_[l];
        }
        run_conv(encoder_conv(l, 0), *x, true);
        run_conv(encoder_conv(l, 1), conv_[encoder_conv(l, 0)].out, true);
        enc_out_[l] = conv_[encoder_conv(l, 1)].out;
        if (dropout_applied_) dropout_forward(enc_out_[l], c.dropout_rate, rng, dropout_mask_[l]);
    }
    const Tensor4<T>* y = &enc_out_[depth - 1];
    for (int l = depth - 2; l >= 0; --l) {
        upsample_forward(*y, upsampled_[l]);
        run_conv(decoder_conv(c, l, 0), upsampled_[l], true);
        concat_forward(conv_[decoder_conv(c, l, 0)].out, enc_out_[l], concat_[l]);
        run_conv(decoder_conv(c, l, 1), concat_[l], true);
        run_conv(decoder_conv(c, l, 2), conv_[decoder_conv(c, l, 1)].out, true);
        y = &conv_[decoder_conv(c, l, 2)].out;
    }
    run_conv(head_conv(c), *y, false);
    cached_ = true;
    return conv_[head_conv(c)].out;
}

template <class T>
std::vector<T> Executor<T>::backward(const Tensor4<T>& grad_logits) {
    return backward(grad_logits, nullptr);
}

template <class T>
std::vector<T> Executor<T>::backward(const Tensor4<T>& grad_logits, Tensor4<T>* grad_input) {
    if (!cached_) throw ProtocolError("backward called without a cached forward pass");
    const auto& c = net_.config();
    const int depth = c.depth;
    if (!grad_logits.same_shape(conv_[head_conv(c)].out)) {
        throw DimensionError("logit gradient shape does not match the last forward pass");
    }
    std::vector<T> grads(net_.params().size(), T(0));
    Tensor4<T> g = grad_logits;
    Tensor4<T> g_in;
    back_conv(head_conv(c), g, false, grads, &g_in);
    std::swap(g, g_in);

    std::vector<Tensor4<T>> skip_grad(static_cast<std::size_t>(depth));
    for (int l = 0; l <= depth - 2; ++l) {
        back_conv(decoder_conv(c, l, 2), g, true, grads, &g_in);
        std::swap(g, g_in);
        back_conv(decoder_conv(c, l, 1), g, true, grads, &g_in);
        Tensor4<T> g_up(g_in.n, g_in.h, g_in.w, c.channels(l));
        skip_grad[l] = Tensor4<T>(g_in.n, g_in.h, g_in.w, c.channels(l));
        concat_backward(g_in, g_up, skip_grad[l]);
        back_conv(decoder_conv(c, l, 0), g_up, true, grads, &g_in);
        const auto& deeper = enc_out_[l + 1];
        g.resize(deeper.n, deeper.h, deeper.w, deeper.c);
        upsample_backward(g_in, g);
    }
    for (int l = depth - 1; l >= 0; --l) {
        if (l < depth - 1) {
            for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += skip_grad[l].values[i];
        }
        if (dropout_applied_) dropout_backward(dropout_mask_[l], g);
        back_conv(encoder_conv(l, 1), g, true, grads, &g_in);
        std::swap(g, g_in);
        const bool need_input = l > 0 || grad_input != nullptr;
        back_conv(encoder_conv(l, 0), g, true, grads, need_input ? &g_in : nullptr);
        if (l > 0) {
            g.resize(enc_out_[l - 1].n, enc_out_[l - 1].h, enc_out_[l - 1].w, enc_out_[l - 1].c);
            maxpool_backward(g_in, argmax_[l], g);
        } else if (grad_input != nullptr) {
            *grad_input = std::move(g_in);
        }
    }
    return grads;
}

template class BasicUNet<float>;
template class BasicUNet<double>;
template class Executor<float>;
template class Executor<double>;

} // namespace unet
} // namespace smallgeo
