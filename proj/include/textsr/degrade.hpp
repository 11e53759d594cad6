#ifndef TEXTSR_DEGRADE_HPP
#define TEXTSR_DEGRADE_HPP

#include <optional>

#include "image.hpp"
#include "rng.hpp"

namespace textsr {

// Fully determines the LQ output given the HQ input; no hidden randomness.
struct DegradationRecipe {
    float blur_sigma = 0.f;
    int downscale_factor = 1;  // 1, 2 or 4
    Resample resample_kind = Resample::Bicubic;
    float noise_sigma = 0.f;
    std::optional<int> compression_quality;  // 1..100, unset = no compression
    uint64_t seed = 0;
};

namespace detail {

// 8x8 block-DCT quantization, a deterministic JPEG-like compression
// simulation. Quality follows the libjpeg scaling convention.
inline void block_dct_quantize(Image& x, int quality) {
    static const int base_q[64] = {
        16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    float q[64];
    for (int i = 0; i < 64; i++) {
        int v = (base_q[i] * scale + 50) / 100;
        q[i] = static_cast<float>(std::clamp(v, 1, 255));
    }
    // orthonormal DCT-II basis
    static float M[8][8];
    static bool init = false;
    if (!init) {
        for (int u = 0; u < 8; u++)
            for (int n = 0; n < 8; n++)
                M[u][n] = static_cast<float>((u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                                             std::cos((2 * n + 1) * u * 3.14159265358979323846 / 16.0));
        init = true;
    }
    int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    int64_t PH = (H + 7) / 8 * 8, PW = (W + 7) / 8 * 8;
    for (int64_t c = 0; c < C; c++) {
        std::vector<float> plane(PH * PW);
        for (int64_t i = 0; i < PH; i++)
            for (int64_t j = 0; j < PW; j++) {
                int64_t si = std::min(i, H - 1), sj = std::min(j, W - 1);
                plane[i * PW + j] = x[(c * H + si) * W + sj] * 255.f - 128.f;
            }
        for (int64_t bi = 0; bi < PH; bi += 8)
            for (int64_t bj = 0; bj < PW; bj += 8) {
                float blk[8][8], tmp[8][8];
                for (int i = 0; i < 8; i++)
                    for (int j = 0; j < 8; j++) blk[i][j] = plane[(bi + i) * PW + bj + j];
                // Y = M * blk * M^T
                for (int i = 0; i < 8; i++)
                    for (int j = 0; j < 8; j++) {
                        float s = 0.f;
                        for (int k = 0; k < 8; k++) s += M[i][k] * blk[k][j];
                        tmp[i][j] = s;
                    }
                for (int i = 0; i < 8; i++)
                    for (int j = 0; j < 8; j++) {
                        float s = 0.f;
                        for (int k = 0; k < 8; k++) s += tmp[i][k] * M[j][k];
                        float quant = std::round(s / q[i * 8 + j]) * q[i * 8 + j];
                        blk[i][j] = quant;
                    }
                // X = M^T * Y * M
                for (int i = 0; i < 8; i++)
                    for (int j = 0; j < 8; j++) {
                        float s = 0.f;
                        for (int k = 0; k < 8; k++) s += M[k][i] * blk[k][j];
                        tmp[i][j] = s;
                    }
                for (int i = 0; i < 8; i++)
                    for (int j = 0; j < 8; j++) {
                        float s = 0.f;
                        for (int k = 0; k < 8; k++) s += tmp[i][k] * M[k][j];
                        plane[(bi + i) * PW + bj + j] = s;
                    }
            }
        for (int64_t i = 0; i < H; i++)
            for (int64_t j = 0; j < W; j++)
                x[(c * H + i) * W + j] = (plane[i * PW + j] + 128.f) / 255.f;
    }
}

}  // namespace detail

// blur -> downsample -> additive Gaussian noise -> compression, then clamp.
inline Image degrade(const Image& hq, const DegradationRecipe& recipe) {
    img::check_image(hq, "degrade");
    if (recipe.blur_sigma < 0.f || recipe.noise_sigma < 0.f)
        throw DomainError("degrade: sigma must be >= 0");
    if (recipe.downscale_factor != 1 && recipe.downscale_factor != 2 &&
        recipe.downscale_factor != 4)
        throw DomainError("degrade: downscale_factor must be 1, 2 or 4");
    if (recipe.compression_quality &&
        (*recipe.compression_quality < 1 || *recipe.compression_quality > 100))
        throw DomainError("degrade: compression_quality must be in [1,100]");
    int64_t H = hq.size(1), W = hq.size(2);
    if (H % recipe.downscale_factor != 0 || W % recipe.downscale_factor != 0)
        throw ShapeError("degrade: dims " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by factor " + std::to_string(recipe.downscale_factor));
    Image x = recipe.blur_sigma > 0.f ? img::gaussian_blur(hq, recipe.blur_sigma) : hq.clone();
    if (recipe.downscale_factor > 1)
        x = img::resize(x, H / recipe.downscale_factor, W / recipe.downscale_factor,
                        recipe.resample_kind);
    if (recipe.noise_sigma > 0.f) {
        Rng rng = Rng::derive(recipe.seed, "noise");
        for (auto& v : x) v += recipe.noise_sigma * static_cast<float>(rng.normal());
    }
    if (recipe.compression_quality) detail::block_dct_quantize(x, *recipe.compression_quality);
    img::clamp_inplace(x);
    return x;
}

// LQ counterpart paired with its recipe and source sample id.
struct DegradedPair {
    std::string id;
    Image lq;
    DegradationRecipe recipe;
};

}  // namespace textsr

#endif  // TEXTSR_DEGRADE_HPP
