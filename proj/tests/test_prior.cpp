#include <catch2/catch_amalgamated.hpp>

#include "textsr/prior.hpp"

using namespace textsr;
using ad::Value;

namespace {
template <typename T>
Tensor<T> randn(std::vector<int64_t> shape, uint64_t seed, T scale = T(1)) {
    Tensor<T> t(std::move(shape));
    Rng rng(seed);
    for (int64_t i = 0; i < t.numel(); i++) t[i] = static_cast<T>(rng.normal()) * scale;
    return t;
}
}  // namespace

TEST_CASE("prior encoders: token shapes, asymmetry, determinism, live gradients") {
    nn::ParamSet<float> ps(11);
    PriorConfig cfg;
    cfg.width = 16;
    cfg.dim = 32;
    PriorEncoder<float> ep(ps, "prior_priv", 8, cfg);
    PriorEncoder<float> elq(ps, "prior_lq", 4, cfg);

    auto z_l = ad::constant(randn<float>({2, 4, 4, 16}, 1, 0.5f));
    auto z_h = ad::constant(randn<float>({2, 4, 4, 16}, 2, 0.5f));

    auto c_star = encode_privileged(ep, z_l, z_h);
    CHECK(c_star.shape() == std::vector<int64_t>{2, 64, 32});

    // swapping z_l and z_h changes the output
    auto swapped = encode_privileged(ep, z_h, z_l);
    float diff = 0;
    for (int64_t i = 0; i < c_star.val().numel(); i++)
        diff = std::max(diff, std::abs(c_star.val()[i] - swapped.val()[i]));
    CHECK(diff > 1e-4f);

    // determinism: equal inputs give equal outputs
    auto c1 = elq.forward(z_l);
    auto c2 = elq.forward(ad::constant(z_l.val().clone()));
    for (int64_t i = 0; i < c1.val().numel(); i++) REQUIRE(c1.val()[i] == c2.val()[i]);

    // batch consistency
    auto batch = randn<float>({3, 4, 4, 16}, 3, 0.5f);
    auto full = elq.forward(ad::constant(batch)).val();
    for (int64_t b = 0; b < 3; b++) {
        Tensor<float> one({1, 4, 4, 16});
        std::copy(batch.data() + b * 256, batch.data() + (b + 1) * 256, one.data());
        auto ci = elq.forward(ad::constant(one)).val();
        for (int64_t i = 0; i < ci.numel(); i++) REQUIRE(ci[i] == full[b * ci.numel() + i]);
    }

    // gradient reaches every E_lq parameter (no dead branch)
    ps.zero_grad();
    auto loss = ad::mean_all(ad::square(elq.forward(z_l)));
    ad::backward(loss);
    for (auto& p : ps.items()) {
        if (p->name.rfind("prior_lq", 0) != 0) continue;
        float asum = 0;
        for (int64_t i = 0; i < p->grad.numel(); i++) asum += std::abs(p->grad[i]);
        INFO(p->name);
        CHECK(asum > 0.f);
    }
}

TEST_CASE("interpolate_path and velocity_target") {
    auto c_l = ad::constant(Tensor<float>::from({1, 1, 1}, {0.f}));
    auto c_s = ad::constant(Tensor<float>::from({1, 1, 1}, {2.f}));

    CHECK(interpolate_path(c_l, c_s, 0.f).val()[0] == 0.f);
    CHECK(interpolate_path(c_l, c_s, 1.f).val()[0] == 2.f);
    CHECK(interpolate_path(c_l, c_s, 0.25f).val()[0] == Catch::Approx(0.5f));
    CHECK(interpolate_path(c_l, c_s, 0.5f).val()[0] == Catch::Approx(1.0f));  // midpoint = mean
    CHECK_THROWS_AS(interpolate_path(c_l, c_s, -0.1f), DomainError);
    CHECK_THROWS_AS(interpolate_path(c_l, c_s, 1.1f), DomainError);

    auto t1 = velocity_target(c_l, c_s);
    CHECK(t1.val()[0] == 2.f);
    auto t0 = velocity_target(c_s, c_s);
    CHECK(t0.val()[0] == 0.f);
    auto a = ad::constant(Tensor<float>::from({1, 1, 1}, {1.f}));
    auto b = ad::constant(Tensor<float>::from({1, 1, 1}, {3.f}));
    CHECK(velocity_target(a, b).val()[0] == 2.f);
}

TEST_CASE("euler transport: exactness, hand steps, convergence order") {
    // constant oracle field: exact for any K (telescoping)
    auto c0 = ad::constant(randn<float>({2, 8, 16}, 9));
    auto target = ad::constant(randn<float>({2, 8, 16}, 10));
    auto field = [&](const Value<float>& c, float) { return velocity_target(c0, target); };
    for (int64_t K : {1, 4, 16}) {
        auto out = euler_transport(c0, field, K);
        float rel = 0;
        for (int64_t i = 0; i < out.val().numel(); i++) {
            float denom = std::max(1.f, std::abs(target.val()[i]));
            rel = std::max(rel, std::abs(out.val()[i] - target.val()[i]) / denom);
        }
        CHECK(rel <= 1e-6f);
    }
    CHECK_THROWS_AS(euler_transport(c0, field, 0), DomainError);

    // field v(c,t) = -c, scalar start 1: K=2 gives 0.5 then 0.25
    auto one = ad::constant(Tensor<double>::from({1, 1, 1}, {1.0}));
    std::vector<double> trace;
    auto decay = [&](const Value<double>& c, double) {
        trace.push_back(c.val()[0]);
        return ad::scale(c, -1.0);
    };
    auto out2 = euler_transport(one, decay, 2);
    CHECK(trace[1] == Catch::Approx(0.5));
    CHECK(out2.val()[0] == Catch::Approx(0.25));

    // order-1 convergence on c' = -c over t in [0,1]
    auto exact = std::exp(-1.0);
    auto err_for = [&](int64_t K) {
        auto decay2 = [](const Value<double>& c, double) { return ad::scale(c, -1.0); };
        auto out = euler_transport(one, decay2, K);
        return std::abs(out.val()[0] - exact);
    };
    for (int64_t K : {8, 16, 32}) {
        double ratio = err_for(K) / err_for(2 * K);
        CHECK(ratio > 1.7);
        CHECK(ratio < 2.3);
    }
}

TEST_CASE("velocity net: shape preservation, call count, unrolled gradient") {
    nn::ParamSet<double> ps(21);
    VelocityNet<double> vel(ps, "vel", 8);
    auto c0 = ad::constant(randn<double>({1, 4, 8}, 30, 0.5));

    vel.calls = 0;
    auto field = [&](const Value<double>& c, double t) { return vel(c, t); };
    auto out = euler_transport(c0, field, 16);
    CHECK(out.shape() == c0.shape());
    CHECK(vel.calls == 16);

    // endpoint loss reaches the velocity parameters through all K steps
    auto target = ad::constant(randn<double>({1, 4, 8}, 31, 0.5));
    ps.zero_grad();
    auto loss = ad::l1_loss(euler_transport(c0, field, 4), target);
    ad::backward(loss);
    for (auto& p : ps.items()) {
        double asum = 0;
        for (int64_t i = 0; i < p->grad.numel(); i++) asum += std::abs(p->grad[i]);
        INFO(p->name);
        CHECK(asum > 0.0);
    }

    // unrolled 4-step endpoint gradient vs central differences
    auto forward = [&]() {
        return ad::mse_loss(euler_transport(c0, field, 4), target);
    };
    ps.zero_grad();
    ad::backward(forward());
    double h = 1e-6, max_err = 0;
    Rng pick(77);
    for (int rep = 0; rep < 40; rep++) {
        auto& p = ps.items()[pick.uniform_int(0, ps.items().size() - 1)];
        int64_t i = pick.uniform_int(0, p->value.numel() - 1);
        double keep = p->value[i];
        p->value[i] = keep + h;
        double fp = forward().item();
        p->value[i] = keep - h;
        double fm = forward().item();
        p->value[i] = keep;
        double num = (fp - fm) / (2 * h);
        double ana = p->grad[i];
        double denom = std::max({std::abs(num), std::abs(ana), 1e-8});
        max_err = std::max(max_err, std::abs(num - ana) / denom);
    }
    CHECK(max_err < 1e-4);
}

TEST_CASE("fmpr losses") {
    PerceptualPyramid<float> pyr(1, 123);
    LossWeights w;

    auto x = ad::constant(randn<float>({1, 1, 8, 16}, 40, 0.2f));
    auto same = ad::constant(x.val().clone());

    // identical restoration: both terms zero
    CHECK(loss_privileged(x, same, w, pyr).item() == 0.f);

    // lambda_lpips = 0 reduces to plain mean L1
    LossWeights w0 = w;
    w0.lambda_lpips = 0;
    auto y = ad::constant(randn<float>({1, 1, 8, 16}, 41, 0.2f));
    CHECK(loss_privileged(x, y, w0, pyr).item() ==
          Catch::Approx(ad::l1_loss(x, y).item()));

    // uniform +0.1 offset gives an L1 term of exactly 0.1
    Tensor<float> base = Tensor<float>::full({1, 1, 8, 16}, 0.4f);
    Tensor<float> offs = Tensor<float>::full({1, 1, 8, 16}, 0.5f);
    CHECK(loss_privileged(ad::constant(offs), ad::constant(base), w0, pyr).item() ==
          Catch::Approx(0.1f).margin(1e-6));

    // stage-1: perfect everything -> 0
    auto c = ad::constant(randn<float>({1, 4, 8}, 42));
    auto c_same = ad::constant(c.val().clone());
    CHECK(loss_stage1(x, same, c, c_same, w, pyr).item() == 0.f);

    // doubling lambda_fm exactly doubles the fm contribution
    auto c2 = ad::constant(randn<float>({1, 4, 8}, 43));
    LossWeights w1 = w, w2 = w;
    w2.lambda_fm = 2.0;
    float base_img = loss_privileged(x, y, w, pyr).item();
    float l1v = loss_stage1(x, y, c, c2, w1, pyr).item() - base_img;
    float l2v = loss_stage1(x, y, c, c2, w2, pyr).item() - base_img;
    CHECK(l2v == Catch::Approx(2.f * l1v).margin(1e-6));

    // scalar case: c_hat=1, c_star=0, perfect image -> 1.0
    auto ch = ad::constant(Tensor<float>::from({1, 1, 1}, {1.f}));
    auto cs = ad::constant(Tensor<float>::from({1, 1, 1}, {0.f}));
    CHECK(loss_stage1(x, same, ch, cs, w, pyr).item() == Catch::Approx(1.0f));

    LossWeights bad;
    bad.lambda_fm = -1;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}
