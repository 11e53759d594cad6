#ifndef TEXTSR_STRUCTURE_HPP
#define TEXTSR_STRUCTURE_HPP

#include "image.hpp"
#include "prior.hpp"
#include "unet.hpp"

namespace textsr {

// Sobel gradient magnitude with reflect-101 borders, normalized by the
// global max (all-zero map when the image is constant). Multi-channel
// inputs are reduced to luma first.
inline Image sobel_boundary(const Image& x) {
    img::check_image(x, "sobel_boundary");
    Image g = img::luma(x);
    int64_t H = g.size(1), W = g.size(2);
    Image out({1, H, W});
    auto refl = [](int64_t i, int64_t n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
        return std::clamp<int64_t>(i, 0, n - 1);
    };
    float maxv = 0.f;
    for (int64_t i = 0; i < H; i++)
        for (int64_t j = 0; j < W; j++) {
            float p[3][3];
            for (int di = -1; di <= 1; di++)
                for (int dj = -1; dj <= 1; dj++)
                    p[di + 1][dj + 1] = g[refl(i + di, H) * W + refl(j + dj, W)];
            float gx = (p[0][2] + 2.f * p[1][2] + p[2][2]) - (p[0][0] + 2.f * p[1][0] + p[2][0]);
            float gy = (p[2][0] + 2.f * p[2][1] + p[2][2]) - (p[0][0] + 2.f * p[0][1] + p[0][2]);
            float m = std::sqrt(gx * gx + gy * gy);
            out[i * W + j] = m;
            maxv = std::max(maxv, m);
        }
    if (maxv > 0.f)
        for (auto& v : out) v /= maxv;
    return out;
}

// z_s = mu + exp(log_var / 2) * noise
template <typename T>
ad::Value<T> reparameterize(const ad::Value<T>& mu, const ad::Value<T>& log_var,
                            const ad::Value<T>& noise) {
    check_same_shape(mu.val(), log_var.val(), "reparameterize");
    check_same_shape(mu.val(), noise.val(), "reparameterize");
    return ad::add(mu, ad::mul(ad::exp(ad::scale(log_var, T(0.5))), noise));
}

// Noise-attenuated inference cue: mu + gamma * sigma * eps (seeded). The
// gamma = 0 default returns mu untouched.
template <typename T>
Tensor<T> inference_cue(const Tensor<T>& mu, const Tensor<T>& log_var, T gamma, Rng& rng) {
    if (gamma < T(0)) throw DomainError("inference_cue: gamma must be >= 0");
    check_same_shape(mu, log_var, "inference_cue");
    if (gamma == T(0)) return mu;
    Tensor<T> out(mu.shape());
    for (int64_t i = 0; i < mu.numel(); i++)
        out[i] = mu[i] + gamma * std::exp(log_var[i] * T(0.5)) * static_cast<T>(rng.normal());
    return out;
}

// closed form D_KL(N(mu, sigma^2) || N(0, I)), mean over elements
template <typename T>
T kl_to_standard_normal(const Tensor<T>& mu, const Tensor<T>& log_var) {
    return ad::kl_standard_normal(ad::constant(mu), ad::constant(log_var)).item();
}

struct CueConfig {
    int64_t image_channels = 1;
    int64_t cue_channels = 32;        // C_u (paper profile 128)
    int64_t ctrl_channels = 64;       // C_ctl, matches the backbone stem width
    std::vector<int64_t> fpn = {32, 64, 128, 256, 512};
    int64_t groups = 8;
};

// Spatial cue extractor: stem + five downsampling blocks + top-down FPN over
// the last three scales -> 1/8-resolution feature -> mean / log-variance
// heads, plus the control-space projection and the upsampling edge head.
template <typename T>
struct CueExtractor {
    CueConfig cfg;
    nn::Conv2d<T> stem_conv;
    nn::GroupNorm<T> stem_norm;
    ResBlock<T> stem_res;
    std::vector<nn::Conv2d<T>> down_convs;
    std::vector<nn::GroupNorm<T>> down_norms;
    nn::Conv2d<T> lat3, lat4, lat5, smooth;
    nn::Conv2d<T> mu_head, logvar_head;
    nn::Conv2d<T> project;                      // z_s -> p_s
    nn::Conv2d<T> edge1, edge2, edge3, edge_out;

    CueExtractor() = default;
    CueExtractor(nn::ParamSet<T>& ps, const std::string& name, const CueConfig& cfg_)
        : cfg(cfg_),
          stem_conv(ps, name + ".stem.conv", cfg_.image_channels, cfg_.fpn[0], 3, 1, 1),
          stem_norm(ps, name + ".stem.norm", cfg_.fpn[0], cfg_.groups),
          stem_res(ps, name + ".stem.res", cfg_.fpn[0], cfg_.fpn[0], 0, cfg_.groups),
          lat3(ps, name + ".fpn.lat3", cfg_.fpn[2], cfg_.cue_channels, 1, 1, 0),
          lat4(ps, name + ".fpn.lat4", cfg_.fpn[3], cfg_.cue_channels, 1, 1, 0),
          lat5(ps, name + ".fpn.lat5", cfg_.fpn[4], cfg_.cue_channels, 1, 1, 0),
          smooth(ps, name + ".fpn.smooth", cfg_.cue_channels, cfg_.cue_channels, 3, 1, 1),
          mu_head(ps, name + ".mu_head", cfg_.cue_channels, cfg_.cue_channels, 3, 1, 1),
          logvar_head(ps, name + ".logvar_head", cfg_.cue_channels, cfg_.cue_channels, 3, 1, 1),
          project(ps, name + ".project", cfg_.cue_channels, cfg_.ctrl_channels, 1, 1, 0),
          edge1(ps, name + ".edge1", cfg_.cue_channels, 16, 3, 1, 1),
          edge2(ps, name + ".edge2", 16, 16, 3, 1, 1),
          edge3(ps, name + ".edge3", 16, 16, 3, 1, 1),
          edge_out(ps, name + ".edge_out", 16, 1, 3, 1, 1) {
        int64_t prev = cfg_.fpn[0];
        for (size_t i = 0; i < cfg_.fpn.size(); i++) {
            down_convs.emplace_back(ps, name + ".down" + std::to_string(i) + ".conv", prev,
                                    cfg_.fpn[i], 3, 2, 1);
            down_norms.emplace_back(ps, name + ".down" + std::to_string(i) + ".norm", cfg_.fpn[i],
                                    cfg_.groups);
            prev = cfg_.fpn[i];
        }
    }

    // x: (B,C,H,W) with H,W divisible by 32 -> (mu, log_var) at (C_u, H/8, W/8)
    std::pair<ad::Value<T>, ad::Value<T>> extract(const ad::Value<T>& x) const {
        if (x.size(2) % 32 != 0 || x.size(3) % 32 != 0)
            throw ShapeError("cue extractor needs dims divisible by 32, got " +
                             x.val().shape_str());
        auto h = stem_res.forward(ad::silu(stem_norm.forward(stem_conv.forward(x))));
        std::vector<ad::Value<T>> feats;
        for (size_t i = 0; i < down_convs.size(); i++) {
            h = ad::silu(down_norms[i].forward(down_convs[i].forward(h)));
            feats.push_back(h);
        }
        auto top = lat5.forward(feats[4]);                                  // /32
        auto mid = ad::add(ad::upsample_nearest2(top), lat4.forward(feats[3]));   // /16
        auto bot = ad::add(ad::upsample_nearest2(mid), lat3.forward(feats[2]));   // /8
        auto p_raw = smooth.forward(bot);
        return {mu_head.forward(p_raw), logvar_head.forward(p_raw)};
    }

    // learned map into the control space at 1/8 resolution
    ad::Value<T> project_cue(const ad::Value<T>& z_s) const { return project.forward(z_s); }

    // x8 upsampling decoder, sigmoid-bounded boundary map at image resolution
    ad::Value<T> decode_edge(const ad::Value<T>& z_s) const {
        auto h = ad::silu(edge1.forward(ad::upsample_nearest2(z_s)));
        h = ad::silu(edge2.forward(ad::upsample_nearest2(h)));
        h = ad::silu(edge3.forward(ad::upsample_nearest2(h)));
        return ad::sigmoid(edge_out.forward(h));
    }
};

// ControlNet-style residual encoder: a copy of the backbone encoder + middle
// conditioned on the recovered prior, with the projected cue added to the
// stem output and per-site zero-initialized 1x1 output convolutions, so a
// fresh encoder emits exactly zero controls.
template <typename T>
struct ResidualEncoder {
    UNetConfig cfg;
    TimeEmbed<T> time;
    nn::Conv2d<T> conv_in;
    ResBlock<T> res0a, res0b, res1a, res1b, res2, mid1, mid2;
    CrossAttention<T> attn0, attn1, attn2;
    Downsample<T> down0, down1;
    std::vector<nn::Conv2d<T>> zero_convs;

    ResidualEncoder() = default;
    ResidualEncoder(nn::ParamSet<T>& ps, const std::string& name, const UNetConfig& base_cfg)
        : cfg(base_cfg),
          time(ps, name + ".time", 64, cfg.time_dim),
          conv_in(ps, name + ".conv_in", cfg.in_channels, cfg.base, 3, 1, 1),
          res0a(ps, name + ".res0a", cfg.base, cfg.base, cfg.time_dim, cfg.groups),
          res0b(ps, name + ".res0b", cfg.base, cfg.base, cfg.time_dim, cfg.groups),
          res1a(ps, name + ".res1a", 2 * cfg.base, 2 * cfg.base, cfg.time_dim, cfg.groups),
          res1b(ps, name + ".res1b", 2 * cfg.base, 2 * cfg.base, cfg.time_dim, cfg.groups),
          res2(ps, name + ".res2", 4 * cfg.base, 4 * cfg.base, cfg.time_dim, cfg.groups),
          mid1(ps, name + ".mid1", 4 * cfg.base, 4 * cfg.base, cfg.time_dim, cfg.groups),
          mid2(ps, name + ".mid2", 4 * cfg.base, 4 * cfg.base, cfg.time_dim, cfg.groups),
          attn0(ps, name + ".attn0", cfg.base, cfg.cond_dim),
          attn1(ps, name + ".attn1", 2 * cfg.base, cfg.cond_dim),
          attn2(ps, name + ".attn2", 4 * cfg.base, cfg.cond_dim),
          down0(ps, name + ".down0", cfg.base, 2 * cfg.base),
          down1(ps, name + ".down1", 2 * cfg.base, 4 * cfg.base) {
        const int64_t chans[CondUNet<T>::kNumControls] = {
            cfg.base, cfg.base, cfg.base, 2 * cfg.base, 2 * cfg.base,
            2 * cfg.base, 4 * cfg.base, 4 * cfg.base, 4 * cfg.base};
        for (int i = 0; i < CondUNet<T>::kNumControls; i++)
            zero_convs.emplace_back(ps, name + ".zero" + std::to_string(i), chans[i], chans[i], 1,
                                    1, 0, true, nn::ParamSet<T>::Init::Zero);
    }

    // Copies the backbone encoder weights (adapters folded into the
    // attention projections); zero convs keep their zero init.
    void init_from_backbone(const CondUNet<T>& unet) {
        auto copy_param = [](const std::shared_ptr<ad::Parameter<T>>& dst,
                             const std::shared_ptr<ad::Parameter<T>>& src) {
            if (!dst || !src) return;
            check_same_shape(dst->value, src->value, "init_from_backbone");
            std::copy(src->value.begin(), src->value.end(), dst->value.begin());
        };
        auto copy_conv = [&](nn::Conv2d<T>& d, const nn::Conv2d<T>& s) {
            copy_param(d.W, s.W);
            copy_param(d.b, s.b);
        };
        auto copy_res = [&](ResBlock<T>& d, const ResBlock<T>& s) {
            copy_param(d.norm1.gamma, s.norm1.gamma);
            copy_param(d.norm1.beta, s.norm1.beta);
            copy_param(d.norm2.gamma, s.norm2.gamma);
            copy_param(d.norm2.beta, s.norm2.beta);
            copy_conv(d.conv1, s.conv1);
            copy_conv(d.conv2, s.conv2);
            if (d.has_time) {
                copy_param(d.time_proj.W, s.time_proj.W);
                copy_param(d.time_proj.b, s.time_proj.b);
            }
        };
        auto copy_attn = [&](CrossAttention<T>& d, const CrossAttention<T>& s) {
            copy_param(d.norm.gamma, s.norm.gamma);
            copy_param(d.norm.beta, s.norm.beta);
            auto merge = [](const AttnProj<T>& sp, const AttnProj<T>& dp) {
                Tensor<T> w = sp.merged_weight();
                std::copy(w.begin(), w.end(), dp.W->value.begin());
            };
            merge(s.q, d.q);
            merge(s.k, d.k);
            merge(s.v, d.v);
            merge(s.o, d.o);
        };
        copy_param(time.l1.W, unet.time.l1.W);
        copy_param(time.l1.b, unet.time.l1.b);
        copy_param(time.l2.W, unet.time.l2.W);
        copy_param(time.l2.b, unet.time.l2.b);
        copy_conv(conv_in, unet.conv_in);
        copy_res(res0a, unet.res0a);
        copy_res(res0b, unet.res0b);
        copy_res(res1a, unet.res1a);
        copy_res(res1b, unet.res1b);
        copy_res(res2, unet.res2);
        copy_res(mid1, unet.mid1);
        copy_res(mid2, unet.mid2);
        copy_attn(attn0, unet.attn0);
        copy_attn(attn1, unet.attn1);
        copy_attn(attn2, unet.attn2);
        copy_conv(down0.conv, unet.down0.conv);
        copy_conv(down1.conv, unet.down1.conv);
    }

    // R = {r_i}: 9 feature maps matching the backbone injection sites.
    std::vector<ad::Value<T>> forward(const ad::Value<T>& z_l, const ad::Value<T>& c_hat,
                                      const ad::Value<T>& p_s, int64_t t) const {
        if (p_s.size(1) != cfg.base || p_s.size(2) != z_l.size(2) || p_s.size(3) != z_l.size(3))
            throw ShapeError("residual encoder: p_s shape " + p_s.val().shape_str() +
                             " does not match stem " + z_l.val().shape_str());
        auto temb = time.forward(t, z_l.size(0));
        std::vector<ad::Value<T>> hs;
        hs.push_back(ad::add(conv_in.forward(z_l), p_s));
        hs.push_back(res0a.forward(hs[0], temb));
        hs.push_back(attn0.forward(res0b.forward(hs[1], temb), c_hat));
        hs.push_back(down0.forward(hs[2]));
        hs.push_back(res1a.forward(hs[3], temb));
        hs.push_back(attn1.forward(res1b.forward(hs[4], temb), c_hat));
        hs.push_back(down1.forward(hs[5]));
        hs.push_back(attn2.forward(res2.forward(hs[6], temb), c_hat));
        hs.push_back(mid2.forward(mid1.forward(hs[7], temb), temb));
        std::vector<ad::Value<T>> controls;
        for (int i = 0; i < CondUNet<T>::kNumControls; i++)
            controls.push_back(zero_convs[i].forward(hs[i]));
        return controls;
    }
};

// L_img + lambda_str |m_hat - m_h|_1 + lambda_kl KL
template <typename T>
ad::Value<T> loss_stage2(const ad::Value<T>& x_restored, const ad::Value<T>& x_h,
                         const ad::Value<T>& m_hat, const ad::Value<T>& m_h,
                         const ad::Value<T>& mu, const ad::Value<T>& log_var,
                         const LossWeights& w, const PerceptualPyramid<T>& pyramid) {
    auto loss = loss_privileged(x_restored, x_h, w, pyramid);
    if (w.lambda_str > 0)
        loss = ad::add(loss, ad::scale(ad::l1_loss(m_hat, m_h), T(w.lambda_str)));
    if (w.lambda_kl > 0)
        loss = ad::add(loss, ad::scale(ad::kl_standard_normal(mu, log_var), T(w.lambda_kl)));
    return loss;
}

}  // namespace textsr

#endif  // TEXTSR_STRUCTURE_HPP
