#ifndef TEXTSR_IMAGE_HPP
#define TEXTSR_IMAGE_HPP

#include <algorithm>
#include <cmath>

#include "tensor.hpp"

namespace textsr {

// Images are float tensors, planar (C,H,W), values in [0,1].
using Image = Tensor<float>;

enum class Resample { Nearest, Bilinear, Bicubic };

inline Resample resample_from_string(const std::string& s) {
    if (s == "nearest") return Resample::Nearest;
    if (s == "bilinear") return Resample::Bilinear;
    if (s == "bicubic") return Resample::Bicubic;
    throw DomainError("unknown resample kind: " + s);
}

inline std::string to_string(Resample r) {
    switch (r) {
        case Resample::Nearest: return "nearest";
        case Resample::Bilinear: return "bilinear";
        default: return "bicubic";
    }
}

namespace img {

inline float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

inline void check_image(const Image& x, const char* what) {
    if (x.ndim() != 3) throw ShapeError(std::string(what) + ": image must be (C,H,W)");
}

// Catmull-Rom cubic kernel (a = -0.5)
inline float cubic_weight(float x) {
    const float a = -0.5f;
    x = std::abs(x);
    if (x <= 1.f) return ((a + 2.f) * x - (a + 3.f)) * x * x + 1.f;
    if (x < 2.f) return (((x - 5.f) * x + 8.f) * x - 4.f) * a;
    return 0.f;
}

namespace detail {

// Separable 1-D resample along the W axis of a (C,H,W) image.
inline Image resample_rows(const Image& x, int64_t ow, Resample kind) {
    int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    Image out({C, H, ow});
    float scale = static_cast<float>(W) / static_cast<float>(ow);
    for (int64_t c = 0; c < C; c++)
        for (int64_t h = 0; h < H; h++) {
            const float* src = x.data() + (c * H + h) * W;
            float* dst = out.data() + (c * H + h) * ow;
            for (int64_t o = 0; o < ow; o++) {
                float pos = (o + 0.5f) * scale - 0.5f;
                if (kind == Resample::Nearest) {
                    int64_t i = std::clamp<int64_t>(
                        static_cast<int64_t>(std::floor(pos + 0.5f)), 0, W - 1);
                    dst[o] = src[i];
                } else if (kind == Resample::Bilinear) {
                    int64_t i0 = static_cast<int64_t>(std::floor(pos));
                    float f = pos - i0;
                    int64_t a = std::clamp<int64_t>(i0, 0, W - 1);
                    int64_t b = std::clamp<int64_t>(i0 + 1, 0, W - 1);
                    dst[o] = src[a] * (1.f - f) + src[b] * f;
                } else {
                    int64_t i0 = static_cast<int64_t>(std::floor(pos)) - 1;
                    float acc = 0.f;
                    for (int k = 0; k < 4; k++) {
                        int64_t i = std::clamp<int64_t>(i0 + k, 0, W - 1);
                        acc += src[i] * cubic_weight(pos - static_cast<float>(i0 + k));
                    }
                    dst[o] = acc;
                }
            }
        }
    return out;
}

inline Image transpose_hw(const Image& x) {
    int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    Image out({C, W, H});
    for (int64_t c = 0; c < C; c++)
        for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++)
                out[(c * W + w) * H + h] = x[(c * H + h) * W + w];
    return out;
}

}  // namespace detail

inline Image resize(const Image& x, int64_t oh, int64_t ow, Resample kind = Resample::Bicubic) {
    check_image(x, "resize");
    if (oh < 1 || ow < 1) throw ShapeError("resize: output dims must be positive");
    Image t = detail::resample_rows(x, ow, kind);
    t = detail::transpose_hw(t);
    t = detail::resample_rows(t, oh, kind);
    return detail::transpose_hw(t);
}

inline Image luma(const Image& x) {
    check_image(x, "luma");
    if (x.size(0) == 1) return x;
    int64_t H = x.size(1), W = x.size(2);
    Image out({1, H, W});
    if (x.size(0) == 3) {
        const float* r = x.data();
        const float* g = x.data() + H * W;
        const float* b = x.data() + 2 * H * W;
        for (int64_t i = 0; i < H * W; i++)
            out[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    } else {
        for (int64_t i = 0; i < H * W; i++) {
            float s = 0.f;
            for (int64_t c = 0; c < x.size(0); c++) s += x[c * H * W + i];
            out[i] = s / static_cast<float>(x.size(0));
        }
    }
    return out;
}

inline void clamp_inplace(Image& x) {
    for (auto& v : x) v = clamp01(v);
}

// Separable Gaussian blur with reflect-101 borders; radius = ceil(3*sigma).
inline Image gaussian_blur(const Image& x, float sigma) {
    check_image(x, "gaussian_blur");
    if (sigma <= 0.f) return x.clone();
    int64_t r = static_cast<int64_t>(std::ceil(3.0 * sigma));
    std::vector<float> k(2 * r + 1);
    float sum = 0.f;
    for (int64_t i = -r; i <= r; i++) {
        k[i + r] = std::exp(-0.5f * static_cast<float>(i * i) / (sigma * sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    auto reflect = [](int64_t i, int64_t n) {
        if (n == 1) return int64_t(0);
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * (n - 1) - i;
        }
        return i;
    };
    int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    Image tmp({C, H, W}), out({C, H, W});
    for (int64_t c = 0; c < C; c++)
        for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++) {
                float acc = 0.f;
                for (int64_t i = -r; i <= r; i++)
                    acc += x[(c * H + h) * W + reflect(w + i, W)] * k[i + r];
                tmp[(c * H + h) * W + w] = acc;
            }
    for (int64_t c = 0; c < C; c++)
        for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++) {
                float acc = 0.f;
                for (int64_t i = -r; i <= r; i++)
                    acc += tmp[(c * H + reflect(h + i, H)) * W + w] * k[i + r];
                out[(c * H + h) * W + w] = acc;
            }
    return out;
}

}  // namespace img
}  // namespace textsr

#endif  // TEXTSR_IMAGE_HPP
