// Engine tests: forward values, finite-difference gradient checks (double),
// determinism of the threaded kernels.

#include <catch2/catch_amalgamated.hpp>

#include "textsr/autodiff.hpp"
#include "textsr/nn.hpp"
#include "textsr/rng.hpp"

using namespace textsr;
using ad::Value;

namespace {

Tensor<double> randn(std::vector<int64_t> shape, uint64_t seed, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    Rng rng(seed);
    for (int64_t i = 0; i < t.numel(); i++) t[i] = rng.normal() * scale;
    return t;
}

// Central finite differences of f against the analytic gradient of every
// input marked trainable. f builds a fresh graph each call from the tensors.
using GraphFn = std::function<Value<double>(const std::vector<Value<double>>&)>;

double max_rel_grad_error(const std::vector<Tensor<double>>& inputs, const GraphFn& f,
                          double h = 1e-5) {
    // analytic
    std::vector<std::shared_ptr<ad::Parameter<double>>> params;
    std::vector<Value<double>> leaves;
    for (size_t i = 0; i < inputs.size(); i++) {
        params.push_back(std::make_shared<ad::Parameter<double>>("p" + std::to_string(i),
                                                                 inputs[i].clone()));
        leaves.push_back(ad::leaf(params.back()));
    }
    Value<double> y = f(leaves);
    ad::backward(y);
    double max_err = 0.0;
    for (size_t pi = 0; pi < params.size(); pi++) {
        auto& p = *params[pi];
        for (int64_t i = 0; i < p.value.numel(); i++) {
            double keep = p.value[i];
            p.value[i] = keep + h;
            std::vector<Value<double>> lv;
            for (auto& pp : params) lv.push_back(ad::leaf(pp));
            double fp = f(lv).item();
            p.value[i] = keep - h;
            lv.clear();
            for (auto& pp : params) lv.push_back(ad::leaf(pp));
            double fm = f(lv).item();
            p.value[i] = keep;
            double num = (fp - fm) / (2 * h);
            double ana = p.grad[i];
            double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
            max_err = std::max(max_err, std::abs(num - ana) / denom);
        }
    }
    return max_err;
}

}  // namespace

TEST_CASE("gemm_nn matches naive multiply and is thread-count invariant") {
    Rng rng(11);
    int64_t M = 17, N = 53, K = 29;
    std::vector<float> A(M * K), B(K * N), C1(M * N), C2(M * N), ref(M * N, 0.f);
    for (auto& v : A) v = static_cast<float>(rng.normal());
    for (auto& v : B) v = static_cast<float>(rng.normal());
    for (int64_t m = 0; m < M; m++)
        for (int64_t k = 0; k < K; k++)
            for (int64_t n = 0; n < N; n++) ref[m * N + n] += A[m * K + k] * B[k * N + n];
    gemm_nn<float>(M, N, K, A.data(), K, B.data(), N, C1.data(), N, false);
    ThreadPool::set_threads(1);
    gemm_nn<float>(M, N, K, A.data(), K, B.data(), N, C2.data(), N, false);
    ThreadPool::set_threads(static_cast<int>(std::thread::hardware_concurrency()));
    for (int64_t i = 0; i < M * N; i++) {
        REQUIRE(C1[i] == C2[i]);  // bitwise, independent of threads
        REQUIRE(std::abs(C1[i] - ref[i]) < 1e-4f);
    }
}

TEST_CASE("elementwise op gradients match finite differences") {
    auto x = randn({2, 3, 4}, 100, 0.7);
    auto y = randn({2, 3, 4}, 101, 0.9);

    CHECK(max_rel_grad_error({x, y}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::mul(ad::add(v[0], v[1]), ad::sub(v[0], v[1])));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::silu(v[0]));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::sigmoid(ad::scale(v[0], 1.7)));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::exp(ad::square(v[0])));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::tanh_op(v[0]));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::sum_all(ad::leaky_relu(v[0], 0.2));
          }) < 1e-5);
    CHECK(max_rel_grad_error({x, y}, [](const std::vector<Value<double>>& v) {
              return ad::mse_loss(v[0], v[1]);
          }) < 1e-6);
    CHECK(max_rel_grad_error({x, y}, [](const std::vector<Value<double>>& v) {
              return ad::l1_loss(v[0], v[1]);
          }) < 1e-5);
}

TEST_CASE("linear and conv2d gradients match finite differences") {
    auto x = randn({2, 5, 7}, 200);
    auto W = randn({4, 7}, 201, 0.5);
    auto b = randn({4}, 202, 0.1);
    CHECK(max_rel_grad_error({x, W, b}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::linear(v[0], v[1], v[2])));
          }) < 1e-6);

    auto img = randn({2, 3, 5, 6}, 210);
    auto cw = randn({4, 3, 3, 3}, 211, 0.4);
    auto cb = randn({4}, 212, 0.1);
    CHECK(max_rel_grad_error({img, cw, cb}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::conv2d(v[0], v[1], v[2], 1, 1)));
          }) < 1e-6);
    // strided conv
    CHECK(max_rel_grad_error({img, cw, cb}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::conv2d(v[0], v[1], v[2], 2, 1)));
          }) < 1e-6);
}

TEST_CASE("normalization gradients match finite differences") {
    auto x = randn({2, 4, 3, 3}, 300);
    auto g = randn({4}, 301, 0.3);
    auto b = randn({4}, 302, 0.2);
    for (auto& v : g) v += 1.0;
    CHECK(max_rel_grad_error({x, g, b}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::group_norm(v[0], v[1], v[2], int64_t(2))));
          }) < 1e-5);

    auto t = randn({2, 5, 6}, 310);
    auto lg = randn({6}, 311, 0.3);
    auto lb = randn({6}, 312, 0.2);
    for (auto& v : lg) v += 1.0;
    CHECK(max_rel_grad_error({t, lg, lb}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::layer_norm(v[0], v[1], v[2])));
          }) < 1e-5);
}

TEST_CASE("attention primitive gradients match finite differences") {
    auto q = randn({2, 4, 5}, 400, 0.5);
    auto k = randn({2, 6, 5}, 401, 0.5);
    auto v = randn({2, 6, 5}, 402, 0.5);
    CHECK(max_rel_grad_error({q, k, v}, [](const std::vector<Value<double>>& in) {
              auto scores = ad::scale(ad::bmm_abt(in[0], in[1]), 1.0 / std::sqrt(5.0));
              auto attn = ad::softmax_lastdim(scores);
              return ad::mean_all(ad::square(ad::bmm(attn, in[2])));
          }) < 1e-5);
}

TEST_CASE("pooling, upsampling, reshape and concat gradients") {
    auto x = randn({2, 3, 4, 6}, 500);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::adaptive_avg_pool2d(v[0], 2, 3)));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::avg_pool2(v[0])));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::upsample_nearest2(v[0])));
          }) < 1e-6);
    auto y = randn({2, 2, 4, 6}, 501);
    CHECK(max_rel_grad_error({x, y}, [](const std::vector<Value<double>>& v) {
              auto c = ad::concat_channels(v[0], v[1]);
              return ad::mean_all(ad::square(ad::spatial_to_tokens(c)));
          }) < 1e-5);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              auto t = ad::spatial_to_tokens(v[0]);
              auto s = ad::tokens_to_spatial(t, 4, 6);
              return ad::mean_all(ad::square(s));
          }) < 1e-6);
    CHECK(max_rel_grad_error({x}, [](const std::vector<Value<double>>& v) {
              return ad::mean_all(ad::square(ad::reshape(v[0], {2, 3, 24})));
          }) < 1e-6);
}

TEST_CASE("kl_standard_normal closed form and gradient") {
    // mu=0, sigma=1 -> 0
    auto mu0 = Tensor<double>({4});
    auto lv0 = Tensor<double>({4});
    auto k0 = ad::kl_standard_normal(ad::constant(mu0), ad::constant(lv0));
    CHECK(k0.item() == Catch::Approx(0.0).margin(1e-12));
    // mu=1, sigma=1 -> 0.5
    auto mu1 = Tensor<double>::full({4}, 1.0);
    auto k1 = ad::kl_standard_normal(ad::constant(mu1), ad::constant(lv0));
    CHECK(k1.item() == Catch::Approx(0.5).margin(1e-12));

    auto mu = randn({3, 3}, 600, 0.8);
    auto lv = randn({3, 3}, 601, 0.5);
    CHECK(max_rel_grad_error({mu, lv}, [](const std::vector<Value<double>>& v) {
              return ad::kl_standard_normal(v[0], v[1]);
          }) < 1e-6);
}

TEST_CASE("parameter grads accumulate across reuse (weight sharing)") {
    nn::ParamSet<double> ps(77);
    nn::Linear<double> lin(ps, "shared", 3, 3);
    auto x = ad::constant(randn({2, 3}, 700));
    // apply the same layer twice; grads must sum over both applications
    auto y1 = lin.forward(x);
    auto y2 = lin.forward(y1);
    auto loss = ad::mean_all(ad::square(y2));
    ad::backward(loss);
    Tensor<double> g2 = lin.W->grad.clone();

    ps.zero_grad();
    auto z = lin.forward(x);
    auto loss1 = ad::mean_all(ad::square(lin.forward(z)));
    ad::backward(loss1);
    for (int64_t i = 0; i < g2.numel(); i++) CHECK(lin.W->grad[i] == Catch::Approx(g2[i]));

    // frozen parameter receives no grad but gradient still flows through
    ps.zero_grad();
    lin.W->trainable = false;
    nn::ParamSet<double> ps2(78);
    nn::Linear<double> first(ps2, "first", 3, 3);
    auto h = lin.forward(first.forward(x));
    ad::backward(ad::mean_all(ad::square(h)));
    double wsum = 0, fsum = 0;
    for (int64_t i = 0; i < lin.W->grad.numel(); i++) wsum += std::abs(lin.W->grad[i]);
    for (int64_t i = 0; i < first.W->grad.numel(); i++) fsum += std::abs(first.W->grad[i]);
    CHECK(wsum == 0.0);
    CHECK(fsum > 0.0);
}

TEST_CASE("rng streams are deterministic and independent") {
    Rng a = Rng::derive(42, "noise", {3, 7});
    Rng b = Rng::derive(42, "noise", {3, 7});
    Rng c = Rng::derive(42, "noise", {3, 8});
    for (int i = 0; i < 16; i++) {
        uint64_t va = a.next_u64();
        REQUIRE(va == b.next_u64());
        REQUIRE(va != c.next_u64());
    }
    // normal draws have roughly unit variance
    Rng d(9);
    double s = 0, s2 = 0;
    int n = 20000;
    for (int i = 0; i < n; i++) {
        double v = d.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / n) < 0.05);
    CHECK(std::abs(s2 / n - 1.0) < 0.05);
}

TEST_CASE("conv2d batch consistency: batched equals per-sample") {
    nn::ParamSet<float> ps(5);
    nn::Conv2d<float> conv(ps, "c", 3, 8, 3, 1, 1);
    Rng rng(123);
    Tensor<float> batch({4, 3, 8, 10});
    for (int64_t i = 0; i < batch.numel(); i++) batch[i] = static_cast<float>(rng.normal());
    auto full = conv.forward(ad::constant(batch));
    for (int64_t b = 0; b < 4; b++) {
        Tensor<float> one({1, 3, 8, 10});
        std::copy(batch.data() + b * 3 * 80, batch.data() + (b + 1) * 3 * 80, one.data());
        auto y = conv.forward(ad::constant(one));
        for (int64_t i = 0; i < y.val().numel(); i++)
            REQUIRE(y.val()[i] == full.val()[b * y.val().numel() + i]);
    }
}
