#ifndef TEXTSR_LORA_HPP
#define TEXTSR_LORA_HPP

#include <optional>

#include "nn.hpp"

namespace textsr {

// Rank-r adapter on a (d_out, d_in) weight. up is zero-initialized so a
// fresh adapter is an exact no-op.
template <typename T>
struct LoRAAdapter {
    std::shared_ptr<ad::Parameter<T>> down;  // (rank, d_in)
    std::shared_ptr<ad::Parameter<T>> up;    // (d_out, rank)
    T scale = T(1);

    LoRAAdapter() = default;
    LoRAAdapter(nn::ParamSet<T>& ps, const std::string& name, int64_t d_in, int64_t d_out,
                int64_t rank, T scale_ = T(1))
        : scale(scale_) {
        down = ps.create(name + ".lora_down", {rank, d_in}, nn::ParamSet<T>::Init::HeNormal, d_in);
        up = ps.create(name + ".lora_up", {d_out, rank}, nn::ParamSet<T>::Init::Zero);
    }

    int64_t rank() const { return down->value.size(0); }
};

// delta W = scale * up @ down
template <typename T>
Tensor<T> lora_delta(const LoRAAdapter<T>& a) {
    int64_t r = a.up->value.size(1), d_out = a.up->value.size(0), d_in = a.down->value.size(1);
    if (a.down->value.size(0) != r) throw ShapeError("lora_delta: rank mismatch");
    Tensor<T> delta({d_out, d_in});
    gemm_nn(d_out, d_in, r, a.up->value.data(), r, a.down->value.data(), d_in, delta.data(),
            d_in, false);
    for (auto& v : delta) v *= a.scale;
    return delta;
}

// W' = W + delta
template <typename T>
Tensor<T> lora_merge(const LoRAAdapter<T>& a, const Tensor<T>& base_weight) {
    Tensor<T> delta = lora_delta(a);
    check_same_shape(delta, base_weight, "lora_merge");
    Tensor<T> out = base_weight.clone();
    for (int64_t i = 0; i < out.numel(); i++) out[i] += delta[i];
    return out;
}

// Bias-free projection with an optional adapter; used for attention q/k/v/o.
template <typename T>
struct AttnProj {
    std::shared_ptr<ad::Parameter<T>> W;
    std::optional<LoRAAdapter<T>> lora;

    AttnProj() = default;
    AttnProj(nn::ParamSet<T>& ps, const std::string& name, int64_t d_in, int64_t d_out,
             int64_t lora_rank, T lora_scale) {
        W = ps.create(name + ".weight", {d_out, d_in}, nn::ParamSet<T>::Init::HeNormal, d_in);
        if (lora_rank > 0) lora.emplace(ps, name, d_in, d_out, lora_rank, lora_scale);
    }

    ad::Value<T> forward(const ad::Value<T>& x) const {
        ad::Value<T> y = ad::linear(x, ad::leaf(W), ad::Value<T>());
        if (lora) {
            auto lo = ad::linear(x, ad::leaf(lora->down), ad::Value<T>());
            auto hi = ad::linear(lo, ad::leaf(lora->up), ad::Value<T>());
            y = ad::add(y, ad::scale(hi, lora->scale));
        }
        return y;
    }

    // Effective weight with any adapter folded in.
    Tensor<T> merged_weight() const { return lora ? lora_merge(*lora, W->value) : W->value.clone(); }
};

}  // namespace textsr

#endif  // TEXTSR_LORA_HPP
