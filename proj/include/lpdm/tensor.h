#ifndef LPDM_TENSOR_H
#define LPDM_TENSOR_H

#include <cmath>
#include <cstddef>
#include <vector>

namespace lpdm {

/// Channel-first (c, h, w) float tensor. Images use the [-1, 1] range;
/// feature maps and gradients use whatever the math produces.
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0f) {}

    size_t numel() const { return v.size(); }
    int plane() const { return h * w; }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    float* plane(int ci) { return v.data() + static_cast<size_t>(ci) * h * w; }
    const float* plane(int ci) const {
        return v.data() + static_cast<size_t>(ci) * h * w;
    }

    float& at(int ci, int y, int x) {
        return v[(static_cast<size_t>(ci) * h + y) * w + x];
    }
    float at(int ci, int y, int x) const {
        return v[(static_cast<size_t>(ci) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const {
        return c == o.c && h == o.h && w == o.w;
    }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }
};

inline bool all_finite(const Tensor& t) {
    for (float x : t.v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline Tensor clamped(Tensor t, float lo, float hi) {
    for (float& x : t.v) x = x < lo ? lo : (x > hi ? hi : x);
    return t;
}

/// v in [-1,1] -> [0,1]; used before metric computation and pixel encoding.
inline Tensor unit_from_signed(const Tensor& t) {
    Tensor out = t;
    for (float& x : out.v) x = 0.5f * (x + 1.0f);
    return out;
}

inline Tensor signed_from_unit(const Tensor& t) {
    Tensor out = t;
    for (float& x : out.v) x = 2.0f * x - 1.0f;
    return out;
}

/// Stacks b's channels after a's; spatial sizes must agree.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

}  // namespace lpdm

#endif
