#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smallgeo {

// Dense (n, h, w, c) tensor, channels fastest.
template <class T>
struct Tensor4 {
    int n = 0;
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<T> values;

    Tensor4() = default;
    Tensor4(int n_, int h_, int w_, int c_, T fill = T(0))
        : n(n_), h(h_), w(w_), c(c_), values(static_cast<std::size_t>(n_) * h_ * w_ * c_, fill) {}

    std::size_t size() const noexcept { return values.size(); }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(n) * h * w; }

    std::size_t index(int i, int y, int x, int ch) const noexcept {
        return ((static_cast<std::size_t>(i) * h + y) * w + x) * c + ch;
    }
    T& at(int i, int y, int x, int ch) { return values[index(i, y, x, ch)]; }
    T at(int i, int y, int x, int ch) const { return values[index(i, y, x, ch)]; }

    std::span<T> sample(int i) {
        const std::size_t len = static_cast<std::size_t>(h) * w * c;
        return std::span<T>(values).subspan(static_cast<std::size_t>(i) * len, len);
    }
    std::span<const T> sample(int i) const {
        const std::size_t len = static_cast<std::size_t>(h) * w * c;
        return std::span<const T>(values).subspan(static_cast<std::size_t>(i) * len, len);
    }

    void resize(int n_, int h_, int w_, int c_) {
        n = n_;
        h = h_;
        w = w_;
        c = c_;
        values.assign(static_cast<std::size_t>(n_) * h_ * w_ * c_, T(0));
    }

    bool same_shape(const Tensor4& o) const noexcept { return n == o.n && h == o.h && w == o.w && c == o.c; }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out;
        out.n = n;
        out.h = h;
        out.w = w;
        out.c = c;
        out.values.assign(values.begin(), values.end());
        return out;
    }

    friend bool operator==(const Tensor4&, const Tensor4&) = default;
};

} // namespace smallgeo
