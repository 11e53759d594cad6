#ifndef TEXTSR_SCHEDULE_HPP
#define TEXTSR_SCHEDULE_HPP

#include "autodiff.hpp"

namespace textsr {

// DDPM-style cumulative schedule: alpha_bar[t] = prod_{s<=t} (1 - beta_s).
template <typename T = float>
struct NoiseSchedule {
    std::vector<T> betas;
    std::vector<T> alpha_bar;

    NoiseSchedule(int64_t steps, T beta_start, T beta_end) {
        if (steps < 1) throw DomainError("schedule: steps must be >= 1");
        if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end))
            throw DomainError("schedule: betas must satisfy 0 < start <= end < 1");
        betas.resize(steps);
        alpha_bar.resize(steps);
        T prod = T(1);
        for (int64_t t = 0; t < steps; t++) {
            betas[t] = steps == 1 ? beta_start
                                  : beta_start + (beta_end - beta_start) * T(t) / T(steps - 1);
            prod *= (T(1) - betas[t]);
            alpha_bar[t] = prod;
        }
    }

    int64_t steps() const { return static_cast<int64_t>(betas.size()); }

    T alpha_bar_at(int64_t t) const {
        if (t < 0 || t >= steps())
            throw IndexError("timestep " + std::to_string(t) + " outside [0," +
                             std::to_string(steps()) + ")");
        return alpha_bar[t];
    }

    // z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) eps
    Tensor<T> add_noise(const Tensor<T>& z0, const Tensor<T>& eps, int64_t t) const {
        check_same_shape(z0, eps, "add_noise");
        T ab = alpha_bar_at(t);
        T s0 = std::sqrt(ab), s1 = std::sqrt(T(1) - ab);
        Tensor<T> out(z0.shape());
        for (int64_t i = 0; i < out.numel(); i++) out[i] = s0 * z0[i] + s1 * eps[i];
        return out;
    }
};

// zhat = (z_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t)
template <typename T>
Tensor<T> one_step_restore(const Tensor<T>& z_t, const Tensor<T>& eps_hat, int64_t t,
                           const NoiseSchedule<T>& sched) {
    check_same_shape(z_t, eps_hat, "one_step_restore");
    T ab = sched.alpha_bar_at(t);
    T s1 = std::sqrt(T(1) - ab), inv = T(1) / std::sqrt(ab);
    Tensor<T> out(z_t.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = (z_t[i] - s1 * eps_hat[i]) * inv;
    return out;
}

template <typename T>
ad::Value<T> one_step_restore(const ad::Value<T>& z_t, const ad::Value<T>& eps_hat, int64_t t,
                              const NoiseSchedule<T>& sched) {
    check_same_shape(z_t.val(), eps_hat.val(), "one_step_restore");
    T ab = sched.alpha_bar_at(t);
    T s1 = std::sqrt(T(1) - ab), inv = T(1) / std::sqrt(ab);
    return ad::scale(ad::sub(z_t, ad::scale(eps_hat, s1)), inv);
}

}  // namespace textsr

#endif  // TEXTSR_SCHEDULE_HPP
