#ifndef TEXTSR_PERCEPTUAL_HPP
#define TEXTSR_PERCEPTUAL_HPP

#include "nn.hpp"

namespace textsr {

// Frozen random-conv scale pyramid standing in for a learned perceptual net.
// distance() is differentiable and shared between the training losses and the
// eval harness; features64() feeds the Frechet metric (16 channels pooled to
// 2x2 = 64 dims).
template <typename T>
class PerceptualPyramid {
public:
    static constexpr int64_t kLevels = 3;
    static constexpr int64_t kFeatures = 16;

    PerceptualPyramid(int64_t image_channels, uint64_t seed, nn::ParamSet<T>* ps = nullptr,
                      const std::string& prefix = "perceptual") {
        for (int64_t l = 0; l < kLevels; l++) {
            std::vector<int64_t> shape{kFeatures, image_channels, 3, 3};
            std::shared_ptr<ad::Parameter<T>> p;
            std::string name = prefix + ".conv" + std::to_string(l) + ".weight";
            if (ps)
                p = ps->create(name, shape, nn::ParamSet<T>::Init::Zero);
            else
                p = std::make_shared<ad::Parameter<T>>(name, Tensor<T>(shape));
            Rng rng = Rng::derive(seed, "perceptual", {static_cast<uint64_t>(l)});
            T std = std::sqrt(T(1) / T(9 * image_channels));
            for (int64_t i = 0; i < p->value.numel(); i++)
                p->value[i] = static_cast<T>(rng.normal()) * std;
            p->trainable = false;
            convs_.push_back(std::move(p));
        }
    }

    // Symmetric, zero iff equal (the pixel term guarantees strictness).
    ad::Value<T> distance(const ad::Value<T>& x, const ad::Value<T>& y) const {
        check_same_shape(x.val(), y.val(), "perceptual_distance");
        ad::Value<T> d = ad::l1_loss(x, y);
        ad::Value<T> xl = x, yl = y;
        for (int64_t l = 0; l < kLevels; l++) {
            if (l > 0) {
                xl = ad::avg_pool2(xl);
                yl = ad::avg_pool2(yl);
            }
            auto w = ad::leaf(convs_[l]);
            auto fx = ad::conv2d(xl, w, ad::Value<T>(), 1, 1);
            auto fy = ad::conv2d(yl, w, ad::Value<T>(), 1, 1);
            d = ad::add(d, ad::l1_loss(fx, fy));
        }
        return d;
    }

    T distance(const Tensor<T>& x, const Tensor<T>& y) const {
        Tensor<T> xb = x.ndim() == 3 ? x.reshape({1, x.size(0), x.size(1), x.size(2)}) : x;
        Tensor<T> yb = y.ndim() == 3 ? y.reshape({1, y.size(0), y.size(1), y.size(2)}) : y;
        return distance(ad::constant(xb), ad::constant(yb)).item();
    }

    // (B,C,H,W) -> (B,64) final-level features pooled to 2x2.
    Tensor<T> features64(const Tensor<T>& batch) const {
        auto x = ad::constant(batch);
        for (int64_t l = 0; l < kLevels; l++) {
            if (l > 0) x = ad::avg_pool2(x);
            if (l == kLevels - 1)
                x = ad::conv2d(x, ad::leaf(convs_[l]), ad::Value<T>(), 1, 1);
        }
        auto pooled = ad::adaptive_avg_pool2d(x, 2, 2);
        return pooled.val().reshape({batch.size(0), kFeatures * 4});
    }

    const std::vector<std::shared_ptr<ad::Parameter<T>>>& convs() const { return convs_; }

private:
    std::vector<std::shared_ptr<ad::Parameter<T>>> convs_;
};

}  // namespace textsr

#endif  // TEXTSR_PERCEPTUAL_HPP
