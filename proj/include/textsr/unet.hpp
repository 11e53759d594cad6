#ifndef TEXTSR_UNET_HPP
#define TEXTSR_UNET_HPP

#include "blocks.hpp"

namespace textsr {

struct UNetConfig {
    int64_t in_channels = 4;
    int64_t base = 64;           // widths: base, 2*base, 4*base
    int64_t cond_dim = 128;      // prior token dim D
    int64_t time_dim = 256;
    int64_t groups = 8;
    int64_t lora_rank = 0;       // 0 disables adapters
    double lora_scale = 1.0;
};

// Conditional denoiser with two downsampling stages and one cross-attention
// block per resolution. The input path plus the middle block expose exactly
// 9 residual-injection sites:
//   0 conv_in   1 res0a   2 res0b+attn0   3 down0
//   4 res1a     5 res1b+attn1             6 down1
//   7 res2+attn2                          8 middle output
// Controls, when given, are added to the features the decoder consumes.
template <typename T>
struct CondUNet {
    static constexpr int kNumControls = 9;

    UNetConfig cfg;
    TimeEmbed<T> time;
    nn::Conv2d<T> conv_in;
    ResBlock<T> res0a, res0b, res1a, res1b, res2, mid1, mid2;
    CrossAttention<T> attn0, attn1, attn2;
    Downsample<T> down0, down1;
    ResBlock<T> up2a, up2b, up1a, up1b, up1c, up0a, up0b, up0c;
    Upsample<T> upsample2, upsample1;
    nn::GroupNorm<T> out_norm;
    nn::Conv2d<T> out_conv;
    mutable int64_t forward_calls = 0;

    CondUNet() = default;
    CondUNet(nn::ParamSet<T>& ps, const std::string& name, const UNetConfig& cfg_)
        : cfg(cfg_),
          time(ps, name + ".time", 64, cfg_.time_dim),
          conv_in(ps, name + ".conv_in", cfg_.in_channels, cfg_.base, 3, 1, 1),
          res0a(ps, name + ".res0a", cfg_.base, cfg_.base, cfg_.time_dim, cfg_.groups),
          res0b(ps, name + ".res0b", cfg_.base, cfg_.base, cfg_.time_dim, cfg_.groups),
          res1a(ps, name + ".res1a", 2 * cfg_.base, 2 * cfg_.base, cfg_.time_dim, cfg_.groups),
          res1b(ps, name + ".res1b", 2 * cfg_.base, 2 * cfg_.base, cfg_.time_dim, cfg_.groups),
          res2(ps, name + ".res2", 4 * cfg_.base, 4 * cfg_.base, cfg_.time_dim, cfg_.groups),
          mid1(ps, name + ".mid1", 4 * cfg_.base, 4 * cfg_.base, cfg_.time_dim, cfg_.groups),
          mid2(ps, name + ".mid2", 4 * cfg_.base, 4 * cfg_.base, cfg_.time_dim, cfg_.groups),
          attn0(ps, name + ".attn0", cfg_.base, cfg_.cond_dim, cfg_.lora_rank, T(cfg_.lora_scale)),
          attn1(ps, name + ".attn1", 2 * cfg_.base, cfg_.cond_dim, cfg_.lora_rank, T(cfg_.lora_scale)),
          attn2(ps, name + ".attn2", 4 * cfg_.base, cfg_.cond_dim, cfg_.lora_rank, T(cfg_.lora_scale)),
          down0(ps, name + ".down0", cfg_.base, 2 * cfg_.base),
          down1(ps, name + ".down1", 2 * cfg_.base, 4 * cfg_.base),
          up2a(ps, name + ".up2a", 8 * cfg_.base, 4 * cfg_.base, cfg_.time_dim, cfg_.groups),
          up2b(ps, name + ".up2b", 8 * cfg_.base, 4 * cfg_.base, cfg_.time_dim, cfg_.groups),
          up1a(ps, name + ".up1a", 4 * cfg_.base, 2 * cfg_.base, cfg_.time_dim, cfg_.groups),
          up1b(ps, name + ".up1b", 4 * cfg_.base, 2 * cfg_.base, cfg_.time_dim, cfg_.groups),
          up1c(ps, name + ".up1c", 4 * cfg_.base, 2 * cfg_.base, cfg_.time_dim, cfg_.groups),
          up0a(ps, name + ".up0a", 2 * cfg_.base, cfg_.base, cfg_.time_dim, cfg_.groups),
          up0b(ps, name + ".up0b", 2 * cfg_.base, cfg_.base, cfg_.time_dim, cfg_.groups),
          up0c(ps, name + ".up0c", 2 * cfg_.base, cfg_.base, cfg_.time_dim, cfg_.groups),
          upsample2(ps, name + ".upsample2", 4 * cfg_.base, 2 * cfg_.base),
          upsample1(ps, name + ".upsample1", 2 * cfg_.base, cfg_.base),
          out_norm(ps, name + ".out_norm", cfg_.base, cfg_.groups),
          out_conv(ps, name + ".out_conv", cfg_.base, cfg_.in_channels, 3, 1, 1) {}

    // Expected (C,h,w) per injection site for a latent of spatial size (h,w).
    std::vector<std::vector<int64_t>> control_shapes(int64_t h, int64_t w) const {
        int64_t b = cfg.base;
        return {{b, h, w},          {b, h, w},          {b, h, w},
                {2 * b, h / 2, w / 2}, {2 * b, h / 2, w / 2}, {2 * b, h / 2, w / 2},
                {4 * b, h / 4, w / 4}, {4 * b, h / 4, w / 4}, {4 * b, h / 4, w / 4}};
    }

    // Encoder features consumed by the decoder; index 8 is the middle output.
    std::vector<ad::Value<T>> encode_features(const ad::Value<T>& z, const ad::Value<T>& temb,
                                              const ad::Value<T>& cond) const {
        std::vector<ad::Value<T>> hs;
        hs.push_back(conv_in.forward(z));
        hs.push_back(res0a.forward(hs[0], temb));
        hs.push_back(attn0.forward(res0b.forward(hs[1], temb), cond));
        hs.push_back(down0.forward(hs[2]));
        hs.push_back(res1a.forward(hs[3], temb));
        hs.push_back(attn1.forward(res1b.forward(hs[4], temb), cond));
        hs.push_back(down1.forward(hs[5]));
        hs.push_back(attn2.forward(res2.forward(hs[6], temb), cond));
        hs.push_back(mid2.forward(mid1.forward(hs[7], temb), temb));
        return hs;
    }

    // eps_hat prediction. cond: (B,N,D); controls: empty or exactly 9 maps.
    ad::Value<T> forward(const ad::Value<T>& z, int64_t t, const ad::Value<T>& cond,
                         const std::vector<ad::Value<T>>& controls = {}) const {
        forward_calls++;
        if (z.size(1) != cfg.in_channels)
            throw ShapeError("unet: latent channel mismatch");
        if (cond.size(2) != cfg.cond_dim)
            throw ShapeError("unet: cond token dim " + std::to_string(cond.size(2)) +
                             " != " + std::to_string(cfg.cond_dim));
        int64_t h = z.size(2), w = z.size(3);
        if (h % 4 != 0 || w % 4 != 0)
            throw ShapeError("unet: latent dims must be divisible by 4");
        if (!controls.empty()) {
            auto want = control_shapes(h, w);
            if (controls.size() != kNumControls)
                throw ControlShapeError("expected " + std::to_string(kNumControls) +
                                        " controls, got " + std::to_string(controls.size()));
            for (size_t i = 0; i < controls.size(); i++) {
                auto& s = controls[i].val().shape();
                if (s.size() != 4 || s[0] != z.size(0) || s[1] != want[i][0] ||
                    s[2] != want[i][1] || s[3] != want[i][2])
                    throw ControlShapeError("control " + std::to_string(i) + " has shape " +
                                            controls[i].val().shape_str());
            }
        }
        auto temb = time.forward(t, z.size(0));
        auto hs = encode_features(z, temb, cond);
        if (!controls.empty())
            for (int i = 0; i < kNumControls; i++) hs[i] = ad::add(hs[i], controls[i]);

        auto x = hs[8];
        x = up2a.forward(ad::concat_channels(x, hs[7]), temb);
        x = up2b.forward(ad::concat_channels(x, hs[6]), temb);
        x = upsample2.forward(x);
        x = up1a.forward(ad::concat_channels(x, hs[5]), temb);
        x = up1b.forward(ad::concat_channels(x, hs[4]), temb);
        x = up1c.forward(ad::concat_channels(x, hs[3]), temb);
        x = upsample1.forward(x);
        x = up0a.forward(ad::concat_channels(x, hs[2]), temb);
        x = up0b.forward(ad::concat_channels(x, hs[1]), temb);
        x = up0c.forward(ad::concat_channels(x, hs[0]), temb);
        return out_conv.forward(ad::silu(out_norm.forward(x)));
    }
};

}  // namespace textsr

#endif  // TEXTSR_UNET_HPP
