#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "smallgeo/errors.hpp"
#include "smallgeo/unet/layers.hpp"

namespace smallgeo::unet {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <class T>
void im2col(const Tensor4<T>& in, int k, std::vector<T>& col) {
    const int pad = k / 2;
    const std::size_t cin = static_cast<std::size_t>(in.c);
    const std::size_t kk = static_cast<std::size_t>(k) * k * cin;
    if (k == 1) {
        col.assign(in.values.begin(), in.values.end());
        return;
    }
    col.assign(in.pixels() * kk, T(0));
    T* dst = col.data();
    for (int i = 0; i < in.n; ++i) {
        for (int y = 0; y < in.h; ++y) {
            for (int x = 0; x < in.w; ++x, dst += kk) {
                for (int ky = 0; ky < k; ++ky) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= in.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int sx = x + kx - pad;
                        if (sx < 0 || sx >= in.w) continue;
                        const T* src = &in.values[in.index(i, sy, sx, 0)];
                        std::copy(src, src + cin, dst + (static_cast<std::size_t>(ky) * k + kx) * cin);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im(const std::vector<T>& dcol, int k, Tensor4<T>& din) {
    const int pad = k / 2;
    const std::size_t cin = static_cast<std::size_t>(din.c);
    const std::size_t kk = static_cast<std::size_t>(k) * k * cin;
    if (k == 1) {
        std::copy(dcol.begin(), dcol.end(), din.values.begin());
        return;
    }
    std::fill(din.values.begin(), din.values.end(), T(0));
    const T* src = dcol.data();
    for (int i = 0; i < din.n; ++i) {
        for (int y = 0; y < din.h; ++y) {
            for (int x = 0; x < din.w; ++x, src += kk) {
                for (int ky = 0; ky < k; ++ky) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= din.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int sx = x + kx - pad;
                        if (sx < 0 || sx >= din.w) continue;
                        T* dst = &din.values[din.index(i, sy, sx, 0)];
                        const T* s = src + (static_cast<std::size_t>(ky) * k + kx) * cin;
                        for (std::size_t ch = 0; ch < cin; ++ch) dst[ch] += s[ch];
                    }
                }
            }
        }
    }
}

} // namespace

template <class T>
void conv_forward(const Tensor4<T>& in, std::span<const T> weight, std::span<const T> bias, int k, int cout,
                  Tensor4<T>& out, std::vector<T>& col) {
    const auto kk = static_cast<Eigen::Index>(k) * k * in.c;
    if (weight.size() != static_cast<std::size_t>(kk) * cout || bias.size() != static_cast<std::size_t>(cout)) {
        throw DimensionError("convolution parameters do not match its input channels");
    }
    im2col(in, k, col);
    if (!(out.n == in.n && out.h == in.h && out.w == in.w && out.c == cout)) out.resize(in.n, in.h, in.w, cout);
    const auto rows = static_cast<Eigen::Index>(in.pixels());
    Eigen::Map<const RowMat<T>> a(col.data(), rows, kk);
    Eigen::Map<const RowMat<T>> wm(weight.data(), kk, cout);
    Eigen::Map<RowMat<T>> y(out.values.data(), rows, cout);
    y.noalias() = a * wm;
    y.rowwise() += Eigen::Map<const RowVec<T>>(bias.data(), cout);
}

template <class T>
void conv_backward(const std::vector<T>& col, const Tensor4<T>& dout, std::span<const T> weight, int k,
                   std::span<T> dweight, std::span<T> dbias, Tensor4<T>* din, std::vector<T>& scratch) {
    const auto rows = static_cast<Eigen::Index>(dout.pixels());
    const auto cout = static_cast<Eigen::Index>(dout.c);
    const auto kk = static_cast<Eigen::Index>(weight.size()) / cout;
    Eigen::Map<const RowMat<T>> a(col.data(), rows, kk);
    Eigen::Map<const RowMat<T>> dy(dout.values.data(), rows, cout);
    Eigen::Map<RowMat<T>> dw(dweight.data(), kk, cout);
    dw.noalias() += a.transpose() * dy;
    Eigen::Map<RowVec<T>>(dbias.data(), cout) += dy.colwise().sum();
    if (din != nullptr) {
        scratch.resize(static_cast<std::size_t>(rows * kk));
        Eigen::Map<const RowMat<T>> wm(weight.data(), kk, cout);
        Eigen::Map<RowMat<T>> da(scratch.data(), rows, kk);
        da.noalias() = dy * wm.transpose();
        col2im(scratch, k, *din);
    }
}

template <class T>
void relu_forward(Tensor4<T>& x) {
    for (auto& v : x.values) v = v > T(0) ? v : T(0);
}

template <class T>
void relu_backward(const Tensor4<T>& out, Tensor4<T>& grad) {
    for (std::size_t i = 0; i < grad.values.size(); ++i) {
        if (!(out.values[i] > T(0))) grad.values[i] = T(0);
    }
}

template <class T>
void maxpool_forward(const Tensor4<T>& in, Tensor4<T>& out, std::vector<std::uint32_t>& argmax) {
    if (in.h % 2 != 0 || in.w % 2 != 0) throw DimensionError("max-pool needs even spatial dimensions");
    out.resize(in.n, in.h / 2, in.w / 2, in.c);
    argmax.resize(out.size());
    std::size_t o = 0;
    for (int i = 0; i < out.n; ++i) {
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                for (int ch = 0; ch < out.c; ++ch, ++o) {
                    std::size_t best = in.index(i, 2 * y, 2 * x, ch);
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t idx = in.index(i, 2 * y + dy, 2 * x + dx, ch);
                            if (in.values[idx] > in.values[best]) best = idx;
                        }
                    }
                    out.values[o] = in.values[best];
                    argmax[o] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
}

template <class T>
void maxpool_backward(const Tensor4<T>& dout, const std::vector<std::uint32_t>& argmax, Tensor4<T>& din) {
    std::fill(din.values.begin(), din.values.end(), T(0));
    for (std::size_t o = 0; o < dout.values.size(); ++o) din.values[argmax[o]] += dout.values[o];
}

template <class T>
void upsample_forward(const Tensor4<T>& in, Tensor4<T>& out) {
    out.resize(in.n, in.h * 2, in.w * 2, in.c);
    const std::size_t c = static_cast<std::size_t>(in.c);
    for (int i = 0; i < out.n; ++i) {
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                const T* src = &in.values[in.index(i, y / 2, x / 2, 0)];
                std::copy(src, src + c, &out.values[out.index(i, y, x, 0)]);
            }
        }
    }
}

template <class T>
void upsample_backward(const Tensor4<T>& dout, Tensor4<T>& din) {
    std::fill(din.values.begin(), din.values.end(), T(0));
    const std::size_t c = static_cast<std::size_t>(din.c);
    for (int i = 0; i < dout.n; ++i) {
        for (int y = 0; y < dout.h; ++y) {
            for (int x = 0; x < dout.w; ++x) {
                const T* src = &dout.values[dout.index(i, y, x, 0)];
                T* dst = &din.values[din.index(i, y / 2, x / 2, 0)];
                for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
            }
        }
    }
}

template <class T>
void concat_forward(const Tensor4<T>& a, const Tensor4<T>& b, Tensor4<T>& out) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) throw DimensionError("concatenated tensors differ spatially");
    out.resize(a.n, a.h, a.w, a.c + b.c);
    const std::size_t px = a.pixels();
    for (std::size_t p = 0; p < px; ++p) {
        T* dst = &out.values[p * static_cast<std::size_t>(out.c)];
        std::copy_n(&a.values[p * static_cast<std::size_t>(a.c)], a.c, dst);
        std::copy_n(&b.values[p * static_cast<std::size_t>(b.c)], b.c, dst + a.c);
    }
}

template <class T>
void concat_backward(const Tensor4<T>& dout, Tensor4<T>& da, Tensor4<T>& db) {
    const std::size_t px = dout.pixels();
    for (std::size_t p = 0; p < px; ++p) {
        const T* src = &dout.values[p * static_cast<std::size_t>(dout.c)];
        std::copy_n(src, da.c, &da.values[p * static_cast<std::size_t>(da.c)]);
        std::copy_n(src + da.c, db.c, &db.values[p * static_cast<std::size_t>(db.c)]);
    }
}

template <class T>
void dropout_forward(Tensor4<T>& x, double rate, Rng& rng, std::vector<T>& mask) {
    mask.resize(x.values.size());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        mask[i] = rng.uniform01() < rate ? T(0) : keep_scale;
        x.values[i] *= mask[i];
    }
}

template <class T>
void dropout_backward(const std::vector<T>& mask, Tensor4<T>& grad) {
    for (std::size_t i = 0; i < grad.values.size(); ++i) grad.values[i] *= mask[i];
}

template <class T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
    Tensor4<T> p = logits;
    const std::size_t c = static_cast<std::size_t>(logits.c);
    for (std::size_t px = 0; px < logits.pixels(); ++px) {
        T* v = &p.values[px * c];
        const T m = *std::max_element(v, v + c);
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) sum += std::exp(static_cast<double>(v[k] - m));
        for (std::size_t k = 0; k < c; ++k) v[k] = static_cast<T>(std::exp(static_cast<double>(v[k] - m)) / sum);
    }
    return p;
}

template <class T>
CrossEntropy<T> masked_cross_entropy(const Tensor4<T>& logits, std::span<const std::uint8_t> targets,
                                     std::span<const std::uint8_t> valid) {
    const std::size_t px = logits.pixels();
    if (targets.size() != px || valid.size() != px) {
        throw DimensionError("targets and mask must hold one entry per logit pixel");
    }
    const std::size_t c = static_cast<std::size_t>(logits.c);
    std::size_t included = 0;
    for (std::size_t p = 0; p < px; ++p) {
        if (valid[p] == 0 || targets[p] == 0) continue;
        if (targets[p] > c) throw ValidationError("target index exceeds the number of classes");
        ++included;
    }
    if (included == 0) throw NoSupervisionError("batch has no valid labeled pixel");

    CrossEntropy<T> ce;
    ce.included = included;
    ce.grad = Tensor4<T>(logits.n, logits.h, logits.w, logits.c);
    const double inv = 1.0 / static_cast<double>(included);
    std::vector<double> prob(c);
    double total = 0.0;
    for (std::size_t p = 0; p < px; ++p) {
        if (valid[p] == 0 || targets[p] == 0) continue;
        const T* z = &logits.values[p * c];
        const double m = static_cast<double>(*std::max_element(z, z + c));
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            prob[k] = std::exp(static_cast<double>(z[k]) - m);
            sum += prob[k];
        }
        const std::size_t t = targets[p] - 1u;
        total += std::log(sum) - (static_cast<double>(z[t]) - m);
        T* g = &ce.grad.values[p * c];
        for (std::size_t k = 0; k < c; ++k) {
            g[k] = static_cast<T>((prob[k] / sum - (k == t ? 1.0 : 0.0)) * inv);
        }
    }
    ce.loss = total * inv;
    return ce;
}

#define SMALLGEO_INSTANTIATE_LAYERS(T)                                                                             \
    template void conv_forward<T>(const Tensor4<T>&, std::span<const T>, std::span<const T>, int, int, Tensor4<T>&, \
                                  std::vector<T>&);                                                                \
    template void conv_backward<T>(const std::vector<T>&, const Tensor4<T>&, std::span<const T>, int, std::span<T>, \
                                   std::span<T>, Tensor4<T>*, std::vector<T>&);                                    \
    template void relu_forward<T>(Tensor4<T>&);                                                                     \
    template void relu_backward<T>(const Tensor4<T>&, Tensor4<T>&);                                                 \
    template void maxpool_forward<T>(const Tensor4<T>&, Tensor4<T>&, std::vector<std::uint32_t>&);                  \
    template void maxpool_backward<T>(const Tensor4<T>&, const std::vector<std::uint32_t>&, Tensor4<T>&);           \
    template void upsample_forward<T>(const Tensor4<T>&, Tensor4<T>&);                                              \
    template void upsample_backward<T>(const Tensor4<T>&, Tensor4<T>&);                                             \
    template void concat_forward<T>(const Tensor4<T>&, const Tensor4<T>&, Tensor4<T>&);                             \
    template void concat_backward<T>(const Tensor4<T>&, Tensor4<T>&, Tensor4<T>&);                                  \
    template void dropout_forward<T>(Tensor4<T>&, double, Rng&, std::vector<T>&);                                   \
    template void dropout_backward<T>(const std::vector<T>&, Tensor4<T>&);                                          \
    template Tensor4<T> softmax<T>(const Tensor4<T>&);                                                              \
    template CrossEntropy<T> masked_cross_entropy<T>(const Tensor4<T>&, std::span<const std::uint8_t>,              \
                                                     std::span<const std::uint8_t>);

SMALLGEO_INSTANTIATE_LAYERS(float)
SMALLGEO_INSTANTIATE_LAYERS(double)

} // namespace smallgeo::unet
