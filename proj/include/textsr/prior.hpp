#ifndef TEXTSR_PRIOR_HPP
#define TEXTSR_PRIOR_HPP

#include "blocks.hpp"
#include "perceptual.hpp"

namespace textsr {

struct PriorConfig {
    int64_t latent_channels = 4;
    int64_t width = 64;       // conv feature width (paper profile 256)
    int64_t res_blocks = 4;
    int64_t dim = 128;        // token dim D (paper profile 1024)
    int64_t pool_h = 4;
    int64_t pool_w = 16;      // N = pool_h * pool_w tokens
};

struct LossWeights {
    double lambda_lpips = 1.0;
    double lambda_fm = 1.0;
    double lambda_str = 1.0;
    double lambda_kl = 0.1;

    void validate() const {
        if (lambda_lpips < 0 || lambda_fm < 0 || lambda_str < 0 || lambda_kl < 0)
            throw DomainError("loss weights must be >= 0");
    }
};

namespace detail {

// conv -> lrelu -> conv with identity skip, fixed width
template <typename T>
struct PlainResBlock {
    nn::Conv2d<T> conv1, conv2;
    PlainResBlock() = default;
    PlainResBlock(nn::ParamSet<T>& ps, const std::string& name, int64_t ch)
        : conv1(ps, name + ".conv1", ch, ch, 3, 1, 1), conv2(ps, name + ".conv2", ch, ch, 3, 1, 1) {}
    ad::Value<T> forward(const ad::Value<T>& x) const {
        return ad::add(x, conv2.forward(ad::leaky_relu(conv1.forward(x))));
    }
};

// token-mix across N then channel-mix across D, each pre-normalized
template <typename T>
struct MixerLayer {
    nn::LayerNorm<T> norm_t, norm_c;
    nn::Linear<T> tok1, tok2, ch1, ch2;
    MixerLayer() = default;
    MixerLayer(nn::ParamSet<T>& ps, const std::string& name, int64_t tokens, int64_t dim)
        : norm_t(ps, name + ".norm_t", dim),
          norm_c(ps, name + ".norm_c", dim),
          tok1(ps, name + ".tok1", tokens, 2 * tokens),
          tok2(ps, name + ".tok2", 2 * tokens, tokens),
          ch1(ps, name + ".ch1", dim, 2 * dim),
          ch2(ps, name + ".ch2", 2 * dim, dim) {}
    ad::Value<T> forward(const ad::Value<T>& x) const {
        auto t = ad::transpose_12(norm_t.forward(x));
        t = tok2.forward(ad::leaky_relu(tok1.forward(t)));
        auto y = ad::add(x, ad::transpose_12(t));
        auto c = ch2.forward(ad::leaky_relu(ch1.forward(norm_c.forward(y))));
        return ad::add(y, c);
    }
};

}  // namespace detail

// Prior encoder: conv stem -> residual stack -> channel widening -> adaptive
// pool to a fixed token grid -> two mixer layers -> linear head. The
// privileged variant takes [z_l; z_h] (8 channels), the LQ-only variant z_l.
template <typename T>
struct PriorEncoder {
    PriorConfig cfg;
    nn::Conv2d<T> stem;
    std::vector<detail::PlainResBlock<T>> blocks;
    nn::Conv2d<T> widen1, widen2, widen3;
    detail::MixerLayer<T> mixer1, mixer2;
    nn::Linear<T> head;
    int64_t in_channels;

    PriorEncoder() = default;
    PriorEncoder(nn::ParamSet<T>& ps, const std::string& name, int64_t in_ch,
                 const PriorConfig& cfg_)
        : cfg(cfg_),
          stem(ps, name + ".stem", in_ch, cfg_.width, 3, 1, 1),
          widen1(ps, name + ".widen1", cfg_.width, cfg_.dim, 3, 1, 1),
          widen2(ps, name + ".widen2", cfg_.dim, cfg_.dim, 3, 1, 1),
          widen3(ps, name + ".widen3", cfg_.dim, cfg_.dim, 3, 1, 1),
          mixer1(ps, name + ".mixer1", cfg_.pool_h * cfg_.pool_w, cfg_.dim),
          mixer2(ps, name + ".mixer2", cfg_.pool_h * cfg_.pool_w, cfg_.dim),
          head(ps, name + ".head", cfg_.dim, cfg_.dim),
          in_channels(in_ch) {
        for (int64_t i = 0; i < cfg_.res_blocks; i++)
            blocks.emplace_back(ps, name + ".res" + std::to_string(i), cfg_.width);
    }

    // (B, in_ch, h, w) -> (B, N, D)
    ad::Value<T> forward(const ad::Value<T>& z) const {
        if (z.size(1) != in_channels)
            throw ShapeError("prior encoder expects " + std::to_string(in_channels) +
                             " channels, got " + std::to_string(z.size(1)));
        auto h = ad::leaky_relu(stem.forward(z));
        for (auto& b : blocks) h = b.forward(h);
        h = ad::leaky_relu(widen1.forward(h));
        h = ad::leaky_relu(widen2.forward(h));
        h = widen3.forward(h);
        h = ad::adaptive_avg_pool2d(h, cfg.pool_h, cfg.pool_w);
        auto tokens = ad::spatial_to_tokens(h);  // (B, N, D)
        tokens = mixer1.forward(tokens);
        tokens = mixer2.forward(tokens);
        return head.forward(tokens);
    }
};

// Privileged encoder wrapper: channel-wise concatenation [z_l; z_h].
template <typename T>
ad::Value<T> encode_privileged(const PriorEncoder<T>& enc, const ad::Value<T>& z_l,
                               const ad::Value<T>& z_h) {
    check_same_shape(z_l.val(), z_h.val(), "encode_privileged");
    return enc.forward(ad::concat_channels(z_l, z_h));
}

// Token-wise velocity field: concat normalized time -> in-proj -> four
// residual linear+LeakyReLU blocks.
template <typename T>
struct VelocityNet {
    nn::Linear<T> in_proj;
    std::vector<nn::Linear<T>> blocks;
    int64_t dim;
    mutable int64_t calls = 0;

    VelocityNet() = default;
    VelocityNet(nn::ParamSet<T>& ps, const std::string& name, int64_t dim_, int64_t n_blocks = 4)
        : in_proj(ps, name + ".in_proj", dim_ + 1, dim_), dim(dim_) {
        for (int64_t i = 0; i < n_blocks; i++)
            blocks.push_back(nn::Linear<T>(ps, name + ".block" + std::to_string(i), dim_, dim_));
    }

    // c: (B,N,D), t in [0,1]
    ad::Value<T> operator()(const ad::Value<T>& c, T t) const {
        calls++;
        int64_t B = c.size(0), N = c.size(1);
        Tensor<T> tfield({B, N, 1});
        tfield.fill(t);
        auto x = in_proj.forward(ad::concat_lastdim(c, ad::constant(tfield)));
        for (auto& b : blocks) x = ad::add(x, ad::leaky_relu(b.forward(x)));
        return x;
    }
};

// c(t) = (1-t) c_l + t c_star
template <typename T>
ad::Value<T> interpolate_path(const ad::Value<T>& c_l, const ad::Value<T>& c_star, T t) {
    if (t < T(0) || t > T(1)) throw DomainError("interpolate_path: t outside [0,1]");
    check_same_shape(c_l.val(), c_star.val(), "interpolate_path");
    return ad::add(ad::scale(c_l, T(1) - t), ad::scale(c_star, t));
}

// dc/dt = c_star - c_l, independent of t
template <typename T>
ad::Value<T> velocity_target(const ad::Value<T>& c_l, const ad::Value<T>& c_star) {
    check_same_shape(c_l.val(), c_star.val(), "velocity_target");
    return ad::sub(c_star, c_l);
}

// K explicit Euler steps of step 1/K with time argument k/K, c^0 = c0.
// The field is any callable (Value, T time) -> Value.
template <typename T, typename Field>
ad::Value<T> euler_transport(const ad::Value<T>& c0, const Field& field, int64_t K) {
    if (K < 1) throw DomainError("euler_transport: K must be >= 1");
    ad::Value<T> c = c0;
    T step = T(1) / T(K);
    for (int64_t k = 0; k < K; k++)
        c = ad::add(c, ad::scale(field(c, T(k) / T(K)), step));
    return c;
}

// L1 + weighted perceptual reconstruction term
template <typename T>
ad::Value<T> loss_privileged(const ad::Value<T>& x_restored, const ad::Value<T>& x_h,
                             const LossWeights& w, const PerceptualPyramid<T>& pyramid) {
    w.validate();
    auto loss = ad::l1_loss(x_restored, x_h);
    if (w.lambda_lpips > 0)
        loss = ad::add(loss, ad::scale(pyramid.distance(x_restored, x_h), T(w.lambda_lpips)));
    return loss;
}

// image loss + lambda_fm * mean |c_hat - c_star|
template <typename T>
ad::Value<T> loss_stage1(const ad::Value<T>& x_restored, const ad::Value<T>& x_h,
                         const ad::Value<T>& c_hat, const ad::Value<T>& c_star,
                         const LossWeights& w, const PerceptualPyramid<T>& pyramid) {
    auto loss = loss_privileged(x_restored, x_h, w, pyramid);
    return ad::add(loss, ad::scale(ad::l1_loss(c_hat, c_star), T(w.lambda_fm)));
}

}  // namespace textsr

#endif  // TEXTSR_PRIOR_HPP
