#ifndef TEXTSR_NN_HPP
#define TEXTSR_NN_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "rng.hpp"

namespace textsr {
namespace nn {

using ad::Parameter;
using ad::Value;

// Named parameter registry. Initialization draws from a stream derived from
// the parameter name, so values do not depend on construction order.
template <typename T>
class ParamSet {
public:
    explicit ParamSet(uint64_t seed = 0) : seed_(seed) {}

    enum class Init { Zero, One, HeNormal, Normal };

    std::shared_ptr<Parameter<T>> create(const std::string& name, std::vector<int64_t> shape,
                                         Init init, int64_t fan_in = 0, T init_scale = T(1)) {
        if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        Tensor<T> v(shape);
        switch (init) {
            case Init::Zero:
                break;
            case Init::One:
                v.fill(T(1));
                break;
            case Init::HeNormal: {
                Rng rng = Rng::derive(seed_, {fnv1a64(name)});
                T std = init_scale * std::sqrt(T(2) / T(fan_in > 0 ? fan_in : v.numel()));
                for (int64_t i = 0; i < v.numel(); i++) v[i] = T(rng.normal()) * std;
                break;
            }
            case Init::Normal: {
                Rng rng = Rng::derive(seed_, {fnv1a64(name)});
                for (int64_t i = 0; i < v.numel(); i++) v[i] = T(rng.normal()) * init_scale;
                break;
            }
        }
        auto p = std::make_shared<Parameter<T>>(name, std::move(v));
        items_.push_back(p);
        by_name_[name] = p;
        return p;
    }

    const std::vector<std::shared_ptr<Parameter<T>>>& items() const { return items_; }

    std::shared_ptr<Parameter<T>> find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : it->second;
    }

    // Parameters whose name starts with any of the prefixes.
    std::vector<std::shared_ptr<Parameter<T>>> with_prefix(const std::vector<std::string>& prefixes) const {
        std::vector<std::shared_ptr<Parameter<T>>> out;
        for (auto& p : items_)
            for (auto& pre : prefixes)
                if (p->name.rfind(pre, 0) == 0) {
                    out.push_back(p);
                    break;
                }
        return out;
    }

    void set_trainable(const std::vector<std::string>& prefixes, bool trainable) {
        for (auto& p : with_prefix(prefixes)) p->trainable = trainable;
    }

    void set_all_trainable(bool trainable) {
        for (auto& p : items_) p->trainable = trainable;
    }

    void zero_grad() {
        for (auto& p : items_) p->grad.zero();
    }

    uint64_t hash_prefix(const std::string& prefix) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto& p : items_) {
            if (p->name.rfind(prefix, 0) != 0) continue;
            h = fnv1a64(p->name, h);
            h = fnv1a64(p->value.data(), sizeof(T) * p->value.numel(), h);
        }
        return h;
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::vector<std::shared_ptr<Parameter<T>>> items_;
    std::map<std::string, std::shared_ptr<Parameter<T>>> by_name_;
};

// ---------------------------------------------------------------- layers

template <typename T>
struct Linear {
    std::shared_ptr<Parameter<T>> W, b;

    Linear() = default;
    Linear(ParamSet<T>& ps, const std::string& name, int64_t in, int64_t out, bool bias = true,
           typename ParamSet<T>::Init init = ParamSet<T>::Init::HeNormal, T init_scale = T(1)) {
        W = ps.create(name + ".weight", {out, in}, init, in, init_scale);
        if (bias) b = ps.create(name + ".bias", {out}, ParamSet<T>::Init::Zero);
    }

    Value<T> forward(const Value<T>& x) const {
        return ad::linear(x, ad::leaf(W), b ? ad::leaf(b) : Value<T>());
    }
};

template <typename T>
struct Conv2d {
    std::shared_ptr<Parameter<T>> W, b;
    int64_t stride = 1, pad = 0;

    Conv2d() = default;
    Conv2d(ParamSet<T>& ps, const std::string& name, int64_t in, int64_t out, int64_t k,
           int64_t stride_ = 1, int64_t pad_ = 0, bool bias = true,
           typename ParamSet<T>::Init init = ParamSet<T>::Init::HeNormal)
        : stride(stride_), pad(pad_) {
        W = ps.create(name + ".weight", {out, in, k, k}, init, in * k * k);
        if (bias) b = ps.create(name + ".bias", {out}, ParamSet<T>::Init::Zero);
    }

    Value<T> forward(const Value<T>& x) const {
        return ad::conv2d(x, ad::leaf(W), b ? ad::leaf(b) : Value<T>(), stride, pad);
    }
};

template <typename T>
struct GroupNorm {
    std::shared_ptr<Parameter<T>> gamma, beta;
    int64_t groups = 8;

    GroupNorm() = default;
    GroupNorm(ParamSet<T>& ps, const std::string& name, int64_t channels, int64_t groups_ = 8)
        : groups(groups_) {
        gamma = ps.create(name + ".weight", {channels}, ParamSet<T>::Init::One);
        beta = ps.create(name + ".bias", {channels}, ParamSet<T>::Init::Zero);
    }

    Value<T> forward(const Value<T>& x) const {
        return ad::group_norm(x, ad::leaf(gamma), ad::leaf(beta), groups);
    }
};

template <typename T>
struct LayerNorm {
    std::shared_ptr<Parameter<T>> gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParamSet<T>& ps, const std::string& name, int64_t dim) {
        gamma = ps.create(name + ".weight", {dim}, ParamSet<T>::Init::One);
        beta = ps.create(name + ".bias", {dim}, ParamSet<T>::Init::Zero);
    }

    Value<T> forward(const Value<T>& x) const {
        return ad::layer_norm(x, ad::leaf(gamma), ad::leaf(beta));
    }
};

// ------------------------------------------------------------------- AdamW

template <typename T>
class AdamW {
public:
    AdamW(std::vector<std::shared_ptr<Parameter<T>>> params, T lr, T beta1 = T(0.9),
          T beta2 = T(0.999), T eps = T(1e-8), T weight_decay = T(0))
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
          wd_(weight_decay) {
        for (auto& p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void step() {
        step_++;
        T bc1 = T(1) - std::pow(beta1_, T(step_));
        T bc2 = T(1) - std::pow(beta2_, T(step_));
        for (size_t pi = 0; pi < params_.size(); pi++) {
            auto& p = *params_[pi];
            if (!p.trainable) continue;
            T* w = p.value.data();
            const T* g = p.grad.data();
            T* m = m_[pi].data();
            T* v = v_[pi].data();
            for (int64_t i = 0; i < p.value.numel(); i++) {
                m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
                T mh = m[i] / bc1;
                T vh = v[i] / bc2;
                w[i] -= lr_ * (mh / (std::sqrt(vh) + eps_) + wd_ * w[i]);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p->grad.zero();
    }

    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }
    std::vector<Tensor<T>>& m_state() { return m_; }
    std::vector<Tensor<T>>& v_state() { return v_; }
    const std::vector<std::shared_ptr<Parameter<T>>>& params() const { return params_; }

private:
    std::vector<std::shared_ptr<Parameter<T>>> params_;
    std::vector<Tensor<T>> m_, v_;
    T lr_, beta1_, beta2_, eps_, wd_;
    int64_t step_ = 0;
};

}  // namespace nn
}  // namespace textsr

#endif  // TEXTSR_NN_HPP
