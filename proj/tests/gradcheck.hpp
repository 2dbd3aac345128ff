#pragma once

// Central finite-difference checks for the U-Net kernels, shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "smallgeo/random.hpp"
#include "smallgeo/unet/layers.hpp"
#include "smallgeo/unet/network.hpp"
#include "smallgeo/unet/tensor.hpp"

namespace gradcheck {

using smallgeo::Rng;
using smallgeo::Tensor4;
namespace unet = smallgeo::unet;

inline double rel_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / scale;
}

inline Tensor4<double> random_tensor(int n, int h, int w, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor4<double> t(n, h, w, c);
    for (auto& v : t.values) v = rng.uniform(lo, hi);
    return t;
}

// Worst relative error between `analytic` and the central difference of
// `loss` over every entry of `x`.
inline double check(std::vector<double>& x, const std::vector<double>& analytic, const std::function<double()>& loss,
                    double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss();
        x[i] = keep - h;
        const double down = loss();
        x[i] = keep;
        worst = std::max(worst, rel_error(analytic[i], (up - down) / (2 * h)));
    }
    return worst;
}

inline double weighted_sum(const Tensor4<double>& t, const Tensor4<double>& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t.values[i] * r.values[i];
    return s;
}

struct Result {
    double input = 0.0;
    double params = 0.0;
    double worst() const { return std::max(input, params); }
};

inline Result conv(std::uint64_t seed, int k = 3) {
    Rng rng(seed);
    const int cin = 3, cout = 4;
    auto x = random_tensor(2, 5, 6, cin, rng);
    std::vector<double> w(static_cast<std::size_t>(k * k * cin * cout)), b(cout);
    for (auto& v : w) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    Tensor4<double> out;
    std::vector<double> col;
    unet::conv_forward<double>(x, w, b, k, cout, out, col);
    auto r = random_tensor(out.n, out.h, out.w, out.c, rng);
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0), scratch;
    Tensor4<double> dx(x.n, x.h, x.w, x.c);
    unet::conv_backward<double>(col, r, w, k, dw, db, &dx, scratch);
    auto loss = [&] {
        Tensor4<double> o;
        std::vector<double> c2;
        unet::conv_forward<double>(x, w, b, k, cout, o, c2);
        return weighted_sum(o, r);
    };
    Result res;
    res.input = check(x.values, dx.values, loss);
    res.params = std::max(check(w, dw, loss), check(b, db, loss));
    return res;
}

inline Result relu(std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_tensor(2, 4, 4, 3, rng);
    for (auto& v : x.values) v = (v < 0 ? -0.1 : 0.1) + v; // keep clear of the kink
    auto out = x;
    unet::relu_forward(out);
    auto r = random_tensor(2, 4, 4, 3, rng);
    auto g = r;
    unet::relu_backward(out, g);
    auto loss = [&] {
        auto o = x;
        unet::relu_forward(o);
        return weighted_sum(o, r);
    };
    return {check(x.values, g.values, loss), 0.0};
}

inline Result maxpool(std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_tensor(2, 6, 4, 3, rng);
    // Distinct values spaced well beyond the step so no window has a near tie.
    std::vector<double> levels(x.size());
    for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = static_cast<double>(i) * 0.01;
    rng.shuffle(levels.begin(), levels.end());
    x.values = levels;
    Tensor4<double> out;
    std::vector<std::uint32_t> arg;
    unet::maxpool_forward(x, out, arg);
    auto r = random_tensor(out.n, out.h, out.w, out.c, rng);
    Tensor4<double> dx(x.n, x.h, x.w, x.c);
    unet::maxpool_backward(r, arg, dx);
    auto loss = [&] {
        Tensor4<double> o;
        std::vector<std::uint32_t> a;
        unet::maxpool_forward(x, o, a);
        return weighted_sum(o, r);
    };
    return {check(x.values, dx.values, loss), 0.0};
}

inline Result upsample(std::uint64_t seed) {
    Rng rng(seed);
    auto x = random_tensor(2, 3, 2, 3, rng);
    Tensor4<double> out;
    unet::upsample_forward(x, out);
    auto r = random_tensor(out.n, out.h, out.w, out.c, rng);
    Tensor4<double> dx(x.n, x.h, x.w, x.c);
    unet::upsample_backward(r, dx);
    auto loss = [&] {
        Tensor4<double> o;
        unet::upsample_forward(x, o);
        return weighted_sum(o, r);
    };
    return {check(x.values, dx.values, loss), 0.0};
}

inline Result concat(std::uint64_t seed) {
    Rng rng(seed);
    auto a = random_tensor(2, 3, 3, 2, rng);
    auto b = random_tensor(2, 3, 3, 3, rng);
    Tensor4<double> out;
    unet::concat_forward(a, b, out);
    auto r = random_tensor(out.n, out.h, out.w, out.c, rng);
    Tensor4<double> da(a.n, a.h, a.w, a.c), db(b.n, b.h, b.w, b.c);
    unet::concat_backward(r, da, db);
    auto loss = [&] {
        Tensor4<double> o;
        unet::concat_forward(a, b, o);
        return weighted_sum(o, r);
    };
    return {std::max(check(a.values, da.values, loss), check(b.values, db.values, loss)), 0.0};
}

// rate 0 is the inference path; a nonzero rate checks a fixed mask.
inline Result dropout(std::uint64_t seed, double rate) {
    Rng rng(seed);
    auto x = random_tensor(2, 4, 4, 3, rng);
    const std::uint64_t mask_seed = rng.next_u64();
    auto out = x;
    std::vector<double> mask;
    Rng mrng(mask_seed);
    unet::dropout_forward(out, rate, mrng, mask);
    auto r = random_tensor(2, 4, 4, 3, rng);
    auto g = r;
    unet::dropout_backward(mask, g);
    auto loss = [&] {
        auto o = x;
        std::vector<double> m;
        Rng again(mask_seed);
        unet::dropout_forward(o, rate, again, m);
        return weighted_sum(o, r);
    };
    return {check(x.values, g.values, loss), 0.0};
}

inline Result softmax_ce(std::uint64_t seed) {
    Rng rng(seed);
    const int classes = 4;
    auto logits = random_tensor(2, 3, 3, classes, rng, -2.0, 2.0);
    std::vector<std::uint8_t> targets(logits.pixels()), valid(logits.pixels());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        targets[i] = static_cast<std::uint8_t>(rng.uniform_index(classes + 1)); // 0 = unlabeled
        valid[i] = rng.bernoulli(0.8) ? 1 : 0;
    }
    targets[0] = 2;
    valid[0] = 1;
    auto ce = unet::masked_cross_entropy(logits, targets, valid);
    auto loss = [&] { return unet::masked_cross_entropy(logits, targets, valid).loss; };
    return {check(logits.values, ce.grad.values, loss), 0.0};
}

// Whole network: loss = sum(r * logits), every parameter and every input.
inline Result network(const smallgeo::UNetConfig& cfg, std::uint64_t seed, bool training = false) {
    Rng rng(seed);
    auto net = unet::BasicUNet<double>::initialized(cfg);
    for (auto& b : net.params()) b += rng.uniform(-0.05, 0.05); // nonzero biases too
    auto x = random_tensor(2, cfg.patch_size, cfg.patch_size, cfg.in_channels, rng);
    unet::Executor<double> ex(net);
    const std::uint64_t drop_seed = rng.next_u64();
    const auto& logits = ex.forward(x, training, drop_seed);
    auto r = random_tensor(logits.n, logits.h, logits.w, logits.c, rng);
    Tensor4<double> dx;
    auto grads = ex.backward(r, &dx);
    auto loss = [&] {
        unet::Executor<double> e2(net);
        return weighted_sum(e2.forward(x, training, drop_seed), r);
    };
    Result res;
    res.input = check(x.values, dx.values, loss);
    res.params = check(net.params(), grads, loss);
    return res;
}

} // namespace gradcheck
