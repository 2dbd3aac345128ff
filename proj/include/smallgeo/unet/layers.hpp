#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smallgeo/random.hpp"
#include "smallgeo/unet/tensor.hpp"

// Forward/backward kernels for the U-Net layer types. Every kernel is
// instantiated for float (training) and double (gradient checks).
namespace smallgeo::unet {

// k x k convolution, stride 1, zero padding k / 2. weight is (k*k*cin) x cout
// row-major with rows ordered (ky, kx, ci); `col` receives the im2col matrix
// needed by the backward pass.
template <class T>
void conv_forward(const Tensor4<T>& in, std::span<const T> weight, std::span<const T> bias, int k, int cout,
                  Tensor4<T>& out, std::vector<T>& col);

// Accumulates parameter gradients into dweight/dbias. din (when non-null) is
// overwritten with the input gradient and must already have the input shape.
template <class T>
void conv_backward(const std::vector<T>& col, const Tensor4<T>& dout, std::span<const T> weight, int k,
                   std::span<T> dweight, std::span<T> dbias, Tensor4<T>* din, std::vector<T>& scratch);

template <class T>
void relu_forward(Tensor4<T>& x);
// Masks grad where the forward output was not positive.
template <class T>
void relu_backward(const Tensor4<T>& out, Tensor4<T>& grad);

// 2x2 max-pool, stride 2; argmax holds the flat input index of each output's
// maximum (first maximum on ties).
template <class T>
void maxpool_forward(const Tensor4<T>& in, Tensor4<T>& out, std::vector<std::uint32_t>& argmax);
template <class T>
void maxpool_backward(const Tensor4<T>& dout, const std::vector<std::uint32_t>& argmax, Tensor4<T>& din);

// 2x nearest-neighbour upsample.
template <class T>
void upsample_forward(const Tensor4<T>& in, Tensor4<T>& out);
template <class T>
void upsample_backward(const Tensor4<T>& dout, Tensor4<T>& din);

// Channel concatenation [a, b].
template <class T>
void concat_forward(const Tensor4<T>& a, const Tensor4<T>& b, Tensor4<T>& out);
template <class T>
void concat_backward(const Tensor4<T>& dout, Tensor4<T>& da, Tensor4<T>& db);

// Inverted dropout: kept units are scaled by 1 / (1 - rate). mask holds the
// per-element multiplier (0 or 1 / (1 - rate)).
template <class T>
void dropout_forward(Tensor4<T>& x, double rate, Rng& rng, std::vector<T>& mask);
template <class T>
void dropout_backward(const std::vector<T>& mask, Tensor4<T>& grad);

// Per-pixel softmax over channels.
template <class T>
Tensor4<T> softmax(const Tensor4<T>& logits);

template <class T>
struct CrossEntropy {
    double loss = 0.0;
    Tensor4<T> grad;
    std::size_t included = 0;
};

// targets are 1-based channel indices (0 = unlabeled), one per pixel; a pixel
// contributes only where valid != 0 and target != 0. Loss is the mean over
// contributing pixels, grad = (softmax - onehot) / count there and 0 elsewhere.
template <class T>
CrossEntropy<T> masked_cross_entropy(const Tensor4<T>& logits, std::span<const std::uint8_t> targets,
                                     std::span<const std::uint8_t> valid);

} // namespace smallgeo::unet
