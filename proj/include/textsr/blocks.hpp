#ifndef TEXTSR_BLOCKS_HPP
#define TEXTSR_BLOCKS_HPP

#include "lora.hpp"

namespace textsr {

// (dim) sinusoidal embedding of an integer timestep.
template <typename T>
Tensor<T> sinusoidal_embedding(int64_t t, int64_t dim) {
    Tensor<T> e({dim});
    int64_t half = dim / 2;
    for (int64_t i = 0; i < half; i++) {
        T freq = std::exp(-std::log(T(10000)) * T(i) / T(half));
        e[i] = std::sin(T(t) * freq);
        e[half + i] = std::cos(T(t) * freq);
    }
    return e;
}

template <typename T>
struct TimeEmbed {
    nn::Linear<T> l1, l2;
    int64_t in_dim = 64, out_dim = 256;

    TimeEmbed() = default;
    TimeEmbed(nn::ParamSet<T>& ps, const std::string& name, int64_t in, int64_t out)
        : l1(ps, name + ".l1", in, out), l2(ps, name + ".l2", out, out), in_dim(in), out_dim(out) {}

    // (B, out_dim) embedding of a fixed timestep
    ad::Value<T> forward(int64_t t, int64_t batch) const {
        Tensor<T> base = sinusoidal_embedding<T>(t, in_dim);
        Tensor<T> rows({batch, in_dim});
        for (int64_t b = 0; b < batch; b++)
            std::copy(base.begin(), base.end(), rows.data() + b * in_dim);
        return l2.forward(ad::silu(l1.forward(ad::constant(rows))));
    }
};

template <typename T>
struct ResBlock {
    nn::GroupNorm<T> norm1, norm2;
    nn::Conv2d<T> conv1, conv2;
    nn::Linear<T> time_proj;
    nn::Conv2d<T> skip;
    bool has_time = false, has_skip = false;

    ResBlock() = default;
    ResBlock(nn::ParamSet<T>& ps, const std::string& name, int64_t in_ch, int64_t out_ch,
             int64_t time_dim = 0, int64_t groups = 8)
        : norm1(ps, name + ".norm1", in_ch, groups),
          norm2(ps, name + ".norm2", out_ch, groups),
          conv1(ps, name + ".conv1", in_ch, out_ch, 3, 1, 1),
          conv2(ps, name + ".conv2", out_ch, out_ch, 3, 1, 1) {
        if (time_dim > 0) {
            time_proj = nn::Linear<T>(ps, name + ".time_proj", time_dim, out_ch);
            has_time = true;
        }
        if (in_ch != out_ch) {
            skip = nn::Conv2d<T>(ps, name + ".skip", in_ch, out_ch, 1, 1, 0);
            has_skip = true;
        }
    }

    ad::Value<T> forward(const ad::Value<T>& x, const ad::Value<T>& temb = ad::Value<T>()) const {
        auto h = conv1.forward(ad::silu(norm1.forward(x)));
        if (has_time && temb.defined())
            h = ad::add_channel_vec(h, time_proj.forward(ad::silu(temb)));
        h = conv2.forward(ad::silu(norm2.forward(h)));
        return ad::add(h, has_skip ? skip.forward(x) : x);
    }
};

// Single-head cross-attention over pooled prior tokens: the tokens act as
// key/value, spatial positions as queries. No positional encoding, so output
// is invariant to token permutations.
template <typename T>
struct CrossAttention {
    nn::GroupNorm<T> norm;
    AttnProj<T> q, k, v, o;
    int64_t channels = 0;

    CrossAttention() = default;
    CrossAttention(nn::ParamSet<T>& ps, const std::string& name, int64_t channels_,
                   int64_t cond_dim, int64_t lora_rank = 0, T lora_scale = T(1))
        : norm(ps, name + ".norm", channels_),
          q(ps, name + ".q", channels_, channels_, lora_rank, lora_scale),
          k(ps, name + ".k", cond_dim, channels_, lora_rank, lora_scale),
          v(ps, name + ".v", cond_dim, channels_, lora_rank, lora_scale),
          o(ps, name + ".o", channels_, channels_, lora_rank, lora_scale),
          channels(channels_) {}

    ad::Value<T> forward(const ad::Value<T>& x, const ad::Value<T>& cond) const {
        int64_t H = x.size(2), W = x.size(3);
        auto tokens = ad::spatial_to_tokens(norm.forward(x));
        auto Q = q.forward(tokens);
        auto K = k.forward(cond);
        auto V = v.forward(cond);
        auto scores = ad::scale(ad::bmm_abt(Q, K), T(1) / std::sqrt(T(channels)));
        auto attn = ad::softmax_lastdim(scores);
        auto out = o.forward(ad::bmm(attn, V));
        return ad::add(x, ad::tokens_to_spatial(out, H, W));
    }
};

template <typename T>
struct Downsample {
    nn::Conv2d<T> conv;
    Downsample() = default;
    Downsample(nn::ParamSet<T>& ps, const std::string& name, int64_t in_ch, int64_t out_ch)
        : conv(ps, name + ".conv", in_ch, out_ch, 3, 2, 1) {}
    ad::Value<T> forward(const ad::Value<T>& x) const { return conv.forward(x); }
};

template <typename T>
struct Upsample {
    nn::Conv2d<T> conv;
    Upsample() = default;
    Upsample(nn::ParamSet<T>& ps, const std::string& name, int64_t in_ch, int64_t out_ch)
        : conv(ps, name + ".conv", in_ch, out_ch, 3, 1, 1) {}
    ad::Value<T> forward(const ad::Value<T>& x) const {
        return conv.forward(ad::upsample_nearest2(x));
    }
};

}  // namespace textsr

#endif  // TEXTSR_BLOCKS_HPP
