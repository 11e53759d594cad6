#ifndef TEXTSR_AUTODIFF_HPP
#define TEXTSR_AUTODIFF_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "gemm.hpp"
#include "tensor.hpp"

namespace textsr {
namespace ad {

// Define-by-run reverse-mode tape over Tensor<T>. Nodes hold values; backward
// closures scatter into parent grads. Parameter leaves share their grad
// storage with the owning Parameter, so one backward pass accumulates grads
// for every use site (e.g. a weight applied at each unrolled Euler step).

template <typename T>
struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> prev;
    std::function<void(Node&)> back;

    void ensure_grad() {
        if (!grad.defined()) {
            grad = Tensor<T>(val.shape());
        }
    }
};

template <typename T>
class Value {
public:
    Value() = default;
    explicit Value(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor<T>& val() const { return n_->val; }
    Tensor<T>& val() { return n_->val; }
    const Tensor<T>& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    std::shared_ptr<Node<T>> node() const { return n_; }
    const std::vector<int64_t>& shape() const { return n_->val.shape(); }
    int64_t size(int d) const { return n_->val.size(d); }
    T item() const { return n_->val[0]; }

private:
    std::shared_ptr<Node<T>> n_;
};

template <typename T>
Value<T> constant(Tensor<T> t) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(t);
    n->requires_grad = false;
    return Value<T>(n);
}

// Trainable or frozen parameter.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Parameter(std::string nm, Tensor<T> v, bool train = true)
        : name(std::move(nm)), value(std::move(v)), grad(value.shape()), trainable(train) {}
};

template <typename T>
Value<T> leaf(const std::shared_ptr<Parameter<T>>& p) {
    auto n = std::make_shared<Node<T>>();
    n->val = p->value;   // shares storage
    n->grad = p->grad;   // shares storage: backward accumulates into the parameter
    n->requires_grad = p->trainable;
    return Value<T>(n);
}

template <typename T>
std::shared_ptr<Node<T>> make_node(Tensor<T> out, std::vector<std::shared_ptr<Node<T>>> prev) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(out);
    n->prev = std::move(prev);
    for (auto& p : n->prev)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

template <typename T>
void backward(const Value<T>& root) {
    if (!root.node()->requires_grad) return;
    // iterative post-order topo sort
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->prev.size()) {
            Node<T>* c = n->prev[idx++].get();
            if (c->requires_grad && !visited.count(c)) {
                visited.insert(c);
                stack.push_back({c, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root.node()->ensure_grad();
    if (root.node()->val.numel() == 1)
        root.node()->grad[0] = T(1);
    else
        root.node()->grad.fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->back && n->requires_grad) {
            n->ensure_grad();
            n->back(*n);
        }
    }
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
    check_same_shape(a.val(), b.val(), "add");
    Tensor<T> out(a.shape());
    const T* pa = a.val().data();
    const T* pb = b.val().data();
    T* po = out.data();
    for (int64_t i = 0; i < out.numel(); i++) po[i] = pa[i] + pb[i];
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [](Node<T>& self) {
        const T* g = self.grad.data();
        for (int s = 0; s < 2; s++) {
            auto& p = self.prev[s];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            T* pg = p->grad.data();
            for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i];
        }
    };
    return Value<T>(n);
}

template <typename T>
Value<T> sub(const Value<T>& a, const Value<T>& b) {
    check_same_shape(a.val(), b.val(), "sub");
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = a.val()[i] - b.val()[i];
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [](Node<T>& self) {
        const T* g = self.grad.data();
        if (self.prev[0]->requires_grad) {
            self.prev[0]->ensure_grad();
            T* pg = self.prev[0]->grad.data();
            for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i];
        }
        if (self.prev[1]->requires_grad) {
            self.prev[1]->ensure_grad();
            T* pg = self.prev[1]->grad.data();
            for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] -= g[i];
        }
    };
    return Value<T>(n);
}

template <typename T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
    check_same_shape(a.val(), b.val(), "mul");
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = a.val()[i] * b.val()[i];
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [](Node<T>& self) {
        const T* g = self.grad.data();
        const T* va = self.prev[0]->val.data();
        const T* vb = self.prev[1]->val.data();
        if (self.prev[0]->requires_grad) {
            self.prev[0]->ensure_grad();
            T* pg = self.prev[0]->grad.data();
            for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i] * vb[i];
        }
        if (self.prev[1]->requires_grad) {
            self.prev[1]->ensure_grad();
            T* pg = self.prev[1]->grad.data();
            for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i] * va[i];
        }
    };
    return Value<T>(n);
}

template <typename T>
Value<T> scale(const Value<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = a.val()[i] * s;
    auto n = make_node(std::move(out), {a.node()});
    n->back = [s](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i] * s;
    };
    return Value<T>(n);
}

template <typename T>
Value<T> add_scalar(const Value<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = a.val()[i] + s;
    auto n = make_node(std::move(out), {a.node()});
    n->back = [](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i];
    };
    return Value<T>(n);
}

template <typename T>
Value<T> square(const Value<T>& a) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = a.val()[i] * a.val()[i];
    auto n = make_node(std::move(out), {a.node()});
    n->back = [](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        const T* v = self.prev[0]->val.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += T(2) * v[i] * g[i];
    };
    return Value<T>(n);
}

template <typename T>
Value<T> exp(const Value<T>& a) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = std::exp(a.val()[i]);
    auto n = make_node(std::move(out), {a.node()});
    Tensor<T> y = n->val;
    n->back = [y](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += y[i] * g[i];
    };
    return Value<T>(n);
}

template <typename T>
Value<T> sigmoid(const Value<T>& a) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = T(1) / (T(1) + std::exp(-a.val()[i]));
    auto n = make_node(std::move(out), {a.node()});
    Tensor<T> y = n->val;
    n->back = [y](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += y[i] * (T(1) - y[i]) * g[i];
    };
    return Value<T>(n);
}

template <typename T>
Value<T> tanh_op(const Value<T>& a) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) out[i] = std::tanh(a.val()[i]);
    auto n = make_node(std::move(out), {a.node()});
    Tensor<T> y = n->val;
    n->back = [y](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += (T(1) - y[i] * y[i]) * g[i];
    };
    return Value<T>(n);
}

template <typename T>
Value<T> silu(const Value<T>& a) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) {
        T x = a.val()[i];
        out[i] = x / (T(1) + std::exp(-x));
    }
    auto n = make_node(std::move(out), {a.node()});
    n->back = [](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        const T* v = self.prev[0]->val.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) {
            T s = T(1) / (T(1) + std::exp(-v[i]));
            pg[i] += s * (T(1) + v[i] * (T(1) - s)) * g[i];
        }
    };
    return Value<T>(n);
}

template <typename T>
Value<T> leaky_relu(const Value<T>& a, T slope = T(0.2)) {
    Tensor<T> out(a.shape());
    for (int64_t i = 0; i < out.numel(); i++) {
        T x = a.val()[i];
        out[i] = x > T(0) ? x : slope * x;
    }
    auto n = make_node(std::move(out), {a.node()});
    n->back = [slope](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        const T* v = self.prev[0]->val.data();
        for (int64_t i = 0; i < self.grad.numel(); i++)
            pg[i] += (v[i] > T(0) ? T(1) : slope) * g[i];
    };
    return Value<T>(n);
}

// --------------------------------------------------------------- shape moves

template <typename T>
Value<T> reshape(const Value<T>& a, std::vector<int64_t> shape) {
    Tensor<T> out = a.val().reshape(std::move(shape));
    auto n = make_node(std::move(out), {a.node()});
    n->back = [](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i];
    };
    return Value<T>(n);
}

// (B,C,H,W) -> (B, H*W, C)
template <typename T>
Value<T> spatial_to_tokens(const Value<T>& a) {
    int64_t B = a.size(0), C = a.size(1), H = a.size(2), W = a.size(3);
    Tensor<T> out({B, H * W, C});
    const T* x = a.val().data();
    T* y = out.data();
    for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
            for (int64_t s = 0; s < H * W; s++)
                y[(b * H * W + s) * C + c] = x[(b * C + c) * H * W + s];
    auto n = make_node(std::move(out), {a.node()});
    n->back = [B, C, H, W](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t b = 0; b < B; b++)
            for (int64_t c = 0; c < C; c++)
                for (int64_t s = 0; s < H * W; s++)
                    pg[(b * C + c) * H * W + s] += g[(b * H * W + s) * C + c];
    };
    return Value<T>(n);
}

// (B, H*W, C) -> (B,C,H,W)
template <typename T>
Value<T> tokens_to_spatial(const Value<T>& a, int64_t H, int64_t W) {
    int64_t B = a.size(0), S = a.size(1), C = a.size(2);
    if (S != H * W) throw ShapeError("tokens_to_spatial: token count != H*W");
    Tensor<T> out({B, C, H, W});
    const T* x = a.val().data();
    T* y = out.data();
    for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
            for (int64_t s = 0; s < S; s++)
                y[(b * C + c) * S + s] = x[(b * S + s) * C + c];
    auto n = make_node(std::move(out), {a.node()});
    n->back = [B, C, S](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t b = 0; b < B; b++)
            for (int64_t c = 0; c < C; c++)
                for (int64_t s = 0; s < S; s++)
                    pg[(b * S + s) * C + c] += g[(b * C + c) * S + s];
    };
    return Value<T>(n);
}

// (B,N,D) -> (B,D,N)
template <typename T>
Value<T> transpose_12(const Value<T>& a) {
    int64_t B = a.size(0), N = a.size(1), D = a.size(2);
    Tensor<T> out({B, D, N});
    const T* x = a.val().data();
    T* y = out.data();
    for (int64_t b = 0; b < B; b++)
        for (int64_t n2 = 0; n2 < N; n2++)
            for (int64_t d = 0; d < D; d++)
                y[(b * D + d) * N + n2] = x[(b * N + n2) * D + d];
    auto n = make_node(std::move(out), {a.node()});
    n->back = [B, N, D](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* pg = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t b = 0; b < B; b++)
            for (int64_t n2 = 0; n2 < N; n2++)
                for (int64_t d = 0; d < D; d++)
                    pg[(b * N + n2) * D + d] += g[(b * D + d) * N + n2];
    };
    return Value<T>(n);
}

// concat along dim 1 of (B,C,H,W) tensors
template <typename T>
Value<T> concat_channels(const Value<T>& a, const Value<T>& b) {
    int64_t B = a.size(0), Ca = a.size(1), H = a.size(2), W = a.size(3);
    int64_t Cb = b.size(1);
    if (b.size(0) != B || b.size(2) != H || b.size(3) != W)
        throw ShapeError("concat_channels: incompatible shapes " + a.val().shape_str() +
                         " vs " + b.val().shape_str());
    Tensor<T> out({B, Ca + Cb, H, W});
    int64_t hw = H * W;
    for (int64_t i = 0; i < B; i++) {
        std::memcpy(out.data() + i * (Ca + Cb) * hw, a.val().data() + i * Ca * hw,
                    sizeof(T) * Ca * hw);
        std::memcpy(out.data() + i * (Ca + Cb) * hw + Ca * hw, b.val().data() + i * Cb * hw,
                    sizeof(T) * Cb * hw);
    }
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [B, Ca, Cb, hw](Node<T>& self) {
        const T* g = self.grad.data();
        if (self.prev[0]->requires_grad) {
            self.prev[0]->ensure_grad();
            T* pg = self.prev[0]->grad.data();
            for (int64_t i = 0; i < B; i++)
                for (int64_t j = 0; j < Ca * hw; j++)
                    pg[i * Ca * hw + j] += g[i * (Ca + Cb) * hw + j];
        }
        if (self.prev[1]->requires_grad) {
            self.prev[1]->ensure_grad();
            T* pg = self.prev[1]->grad.data();
            for (int64_t i = 0; i < B; i++)
                for (int64_t j = 0; j < Cb * hw; j++)
                    pg[i * Cb * hw + j] += g[i * (Ca + Cb) * hw + Ca * hw + j];
        }
    };
    return Value<T>(n);
}

// concat along the last dim of (B,N,D) tensors
template <typename T>
Value<T> concat_lastdim(const Value<T>& a, const Value<T>& b) {
    int64_t B = a.size(0), N = a.size(1), Da = a.size(2), Db = b.size(2);
    if (b.size(0) != B || b.size(1) != N)
        throw ShapeError("concat_lastdim: incompatible shapes");
    Tensor<T> out({B, N, Da + Db});
    for (int64_t r = 0; r < B * N; r++) {
        std::memcpy(out.data() + r * (Da + Db), a.val().data() + r * Da, sizeof(T) * Da);
        std::memcpy(out.data() + r * (Da + Db) + Da, b.val().data() + r * Db, sizeof(T) * Db);
    }
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [B, N, Da, Db](Node<T>& self) {
        const T* g = self.grad.data();
        if (self.prev[0]->requires_grad) {
            self.prev[0]->ensure_grad();
            T* pg = self.prev[0]->grad.data();
            for (int64_t r = 0; r < B * N; r++)
                for (int64_t j = 0; j < Da; j++) pg[r * Da + j] += g[r * (Da + Db) + j];
        }
        if (self.prev[1]->requires_grad) {
            self.prev[1]->ensure_grad();
            T* pg = self.prev[1]->grad.data();
            for (int64_t r = 0; r < B * N; r++)
                for (int64_t j = 0; j < Db; j++) pg[r * Db + j] += g[r * (Da + Db) + Da + j];
        }
    };
    return Value<T>(n);
}

// ------------------------------------------------------------------- linear

// x: (..., K), W: (M, K) torch layout, optional b: (M)  ->  (..., M)
template <typename T>
Value<T> linear(const Value<T>& x, const Value<T>& W, const Value<T>& b = Value<T>()) {
    int64_t K = x.size(-1);
    int64_t M = W.size(0);
    if (W.size(1) != K) throw ShapeError("linear: weight in-dim mismatch");
    int64_t R = x.val().numel() / K;
    std::vector<int64_t> out_shape = x.shape();
    out_shape.back() = M;
    Tensor<T> out(out_shape);
    {
        std::vector<T> Wt(K * M);
        transpose(M, K, W.val().data(), Wt.data());
        gemm_nn(R, M, K, x.val().data(), K, Wt.data(), M, out.data(), M, false);
    }
    if (b.defined()) {
        T* po = out.data();
        const T* pb = b.val().data();
        for (int64_t r = 0; r < R; r++)
            for (int64_t m = 0; m < M; m++) po[r * M + m] += pb[m];
    }
    std::vector<std::shared_ptr<Node<T>>> prev = {x.node(), W.node()};
    if (b.defined()) prev.push_back(b.node());
    auto n = make_node(std::move(out), std::move(prev));
    n->back = [R, M, K](Node<T>& self) {
        const T* g = self.grad.data();
        auto& xn = self.prev[0];
        auto& wn = self.prev[1];
        if (xn->requires_grad) {
            xn->ensure_grad();
            gemm_nn(R, K, M, g, M, wn->val.data(), K, xn->grad.data(), K, true);
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            std::vector<T> gT(M * R);
            transpose(R, M, g, gT.data());
            gemm_nn(M, K, R, gT.data(), R, xn->val.data(), K, wn->grad.data(), K, true);
        }
        if (self.prev.size() > 2 && self.prev[2]->requires_grad) {
            auto& bn = self.prev[2];
            bn->ensure_grad();
            T* pb = bn->grad.data();
            for (int64_t r = 0; r < R; r++)
                for (int64_t m = 0; m < M; m++) pb[m] += g[r * M + m];
        }
    };
    return Value<T>(n);
}

// ------------------------------------------------------------------- conv2d

namespace detail {

template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, T* cols) {
    for (int64_t c = 0; c < C; c++)
        for (int64_t ki = 0; ki < kh; ki++)
            for (int64_t kj = 0; kj < kw; kj++) {
                T* row = cols + ((c * kh + ki) * kw + kj) * OH * OW;
                for (int64_t oh = 0; oh < OH; oh++) {
                    int64_t ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) {
                        for (int64_t ow = 0; ow < OW; ow++) row[oh * OW + ow] = T(0);
                        continue;
                    }
                    const T* src = x + (c * H + ih) * W;
                    for (int64_t ow = 0; ow < OW; ow++) {
                        int64_t iw = ow * stride - pad + kj;
                        row[oh * OW + ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
                    }
                }
            }
}

template <typename T>
void col2im_add(const T* cols, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t OH, int64_t OW, T* x) {
    for (int64_t c = 0; c < C; c++)
        for (int64_t ki = 0; ki < kh; ki++)
            for (int64_t kj = 0; kj < kw; kj++) {
                const T* row = cols + ((c * kh + ki) * kw + kj) * OH * OW;
                for (int64_t oh = 0; oh < OH; oh++) {
                    int64_t ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) continue;
                    T* dst = x + (c * H + ih) * W;
                    for (int64_t ow = 0; ow < OW; ow++) {
                        int64_t iw = ow * stride - pad + kj;
                        if (iw >= 0 && iw < W) dst[iw] += row[oh * OW + ow];
                    }
                }
            }
}

}  // namespace detail

// x: (B,C,H,W), W: (O,C,kh,kw), b: (O) optional
template <typename T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b,
                int64_t stride = 1, int64_t pad = 0) {
    int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    int64_t O = w.size(0), kh = w.size(2), kw = w.size(3);
    if (w.size(1) != C)
        throw ShapeError("conv2d: weight expects " + std::to_string(w.size(1)) +
                         " input channels, got " + std::to_string(C));
    int64_t OH = (H + 2 * pad - kh) / stride + 1;
    int64_t OW = (W + 2 * pad - kw) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: output would be empty");
    int64_t K = C * kh * kw, N = OH * OW;
    Tensor<T> out({B, O, OH, OW});
    const T* px = x.val().data();
    const T* pw = w.val().data();
    const T* pb = b.defined() ? b.val().data() : nullptr;
    T* po = out.data();
    parallel_for(B, [&](int64_t lo, int64_t hi) {
        std::vector<T> cols(K * N);
        for (int64_t bi = lo; bi < hi; bi++) {
            detail::im2col(px + bi * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW, cols.data());
            gemm_nn_range<T>(0, O, N, K, pw, K, cols.data(), N, po + bi * O * N, N, false);
            if (pb)
                for (int64_t o = 0; o < O; o++) {
                    T* dst = po + (bi * O + o) * N;
                    for (int64_t i = 0; i < N; i++) dst[i] += pb[o];
                }
        }
    });
    std::vector<std::shared_ptr<Node<T>>> prev = {x.node(), w.node()};
    if (b.defined()) prev.push_back(b.node());
    auto n = make_node(std::move(out), std::move(prev));
    n->back = [B, C, H, W, O, kh, kw, stride, pad, OH, OW, K, N](Node<T>& self) {
        auto& xn = self.prev[0];
        auto& wn = self.prev[1];
        const T* g = self.grad.data();
        if (xn->requires_grad) {
            xn->ensure_grad();
            std::vector<T> Wt(K * O);
            transpose(O, K, wn->val.data(), Wt.data());
            T* pgx = xn->grad.data();
            parallel_for(B, [&](int64_t lo, int64_t hi) {
                std::vector<T> dcols(K * N);
                for (int64_t bi = lo; bi < hi; bi++) {
                    gemm_nn_range<T>(0, K, N, O, Wt.data(), O, g + bi * O * N, N, dcols.data(), N, false);
                    detail::col2im_add(dcols.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                                       pgx + bi * C * H * W);
                }
            });
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            // dW += sum_b dY_b (OxN) * cols_b^T (NxK); serial over batch
            std::vector<T> cols(K * N), colsT(N * K);
            const T* px = xn->val.data();
            for (int64_t bi = 0; bi < B; bi++) {
                detail::im2col(px + bi * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW, cols.data());
                transpose(K, N, cols.data(), colsT.data());
                gemm_nn(O, K, N, g + bi * O * N, N, colsT.data(), K, wn->grad.data(), K, true);
            }
        }
        if (self.prev.size() > 2 && self.prev[2]->requires_grad) {
            auto& bn = self.prev[2];
            bn->ensure_grad();
            T* pgb = bn->grad.data();
            for (int64_t bi = 0; bi < B; bi++)
                for (int64_t o = 0; o < O; o++) {
                    const T* src = g + (bi * O + o) * N;
                    T s = T(0);
                    for (int64_t i = 0; i < N; i++) s += src[i];
                    pgb[o] += s;
                }
        }
    };
    return Value<T>(n);
}

// ----------------------------------------------------------- normalizations

// Normalizes over each (group, spatial) slice per sample; gamma/beta: (C).
template <typename T>
Value<T> group_norm(const Value<T>& x, const Value<T>& gamma, const Value<T>& beta,
                    int64_t groups, T eps = T(1e-5)) {
    int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    if (C % groups != 0) throw ShapeError("group_norm: channels not divisible by groups");
    int64_t cpg = C / groups, gsz = cpg * H * W;
    Tensor<T> out({B, C, H, W});
    Tensor<T> mean({B, groups}), rstd({B, groups});
    const T* px = x.val().data();
    T* po = out.data();
    const T* pg = gamma.val().data();
    const T* pb = beta.val().data();
    for (int64_t b = 0; b < B; b++)
        for (int64_t g = 0; g < groups; g++) {
            const T* src = px + (b * C + g * cpg) * H * W;
            T m = T(0);
            for (int64_t i = 0; i < gsz; i++) m += src[i];
            m /= T(gsz);
            T v = T(0);
            for (int64_t i = 0; i < gsz; i++) {
                T d = src[i] - m;
                v += d * d;
            }
            v /= T(gsz);
            T rs = T(1) / std::sqrt(v + eps);
            mean[b * groups + g] = m;
            rstd[b * groups + g] = rs;
            T* dst = po + (b * C + g * cpg) * H * W;
            for (int64_t c = 0; c < cpg; c++) {
                T ga = pg[g * cpg + c], be = pb[g * cpg + c];
                const T* s2 = src + c * H * W;
                T* d2 = dst + c * H * W;
                for (int64_t i = 0; i < H * W; i++) d2[i] = (s2[i] - m) * rs * ga + be;
            }
        }
    auto n = make_node(std::move(out), {x.node(), gamma.node(), beta.node()});
    n->back = [B, C, groups, cpg, H, W, gsz, mean, rstd](Node<T>& self) {
        const T* g = self.grad.data();
        auto& xn = self.prev[0];
        auto& gn = self.prev[1];
        auto& bn = self.prev[2];
        const T* px = xn->val.data();
        const T* pga = gn->val.data();
        int64_t hw = H * W;
        if (xn->requires_grad) {
            xn->ensure_grad();
            T* dx = xn->grad.data();
            for (int64_t b = 0; b < B; b++)
                for (int64_t gi = 0; gi < groups; gi++) {
                    T m = mean[b * groups + gi], rs = rstd[b * groups + gi];
                    const T* xs = px + (b * C + gi * cpg) * hw;
                    const T* gs = g + (b * C + gi * cpg) * hw;
                    // dxhat = dy * gamma;  means taken over the group slice
                    T sum_dxh = T(0), sum_dxh_xh = T(0);
                    for (int64_t c = 0; c < cpg; c++) {
                        T ga = pga[gi * cpg + c];
                        for (int64_t i = 0; i < hw; i++) {
                            T dxh = gs[c * hw + i] * ga;
                            T xh = (xs[c * hw + i] - m) * rs;
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh;
                        }
                    }
                    T inv = T(1) / T(gsz);
                    T* dxs = dx + (b * C + gi * cpg) * hw;
                    for (int64_t c = 0; c < cpg; c++) {
                        T ga = pga[gi * cpg + c];
                        for (int64_t i = 0; i < hw; i++) {
                            T dxh = gs[c * hw + i] * ga;
                            T xh = (xs[c * hw + i] - m) * rs;
                            dxs[c * hw + i] += rs * (dxh - inv * sum_dxh - xh * inv * sum_dxh_xh);
                        }
                    }
                }
        }
        if (gn->requires_grad || bn->requires_grad) {
            if (gn->requires_grad) gn->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (int64_t b = 0; b < B; b++)
                for (int64_t c = 0; c < C; c++) {
                    int64_t gi = c / cpg;
                    T m = mean[b * groups + gi], rs = rstd[b * groups + gi];
                    const T* xs = px + (b * C + c) * hw;
                    const T* gs = g + (b * C + c) * hw;
                    T dg = T(0), db = T(0);
                    for (int64_t i = 0; i < hw; i++) {
                        dg += gs[i] * (xs[i] - m) * rs;
                        db += gs[i];
                    }
                    if (gn->requires_grad) gn->grad[c] += dg;
                    if (bn->requires_grad) bn->grad[c] += db;
                }
        }
    };
    return Value<T>(n);
}

// LayerNorm over the last dim of (..., D); gamma/beta: (D)
template <typename T>
Value<T> layer_norm(const Value<T>& x, const Value<T>& gamma, const Value<T>& beta,
                    T eps = T(1e-5)) {
    int64_t D = x.size(-1);
    int64_t R = x.val().numel() / D;
    Tensor<T> out(x.shape());
    Tensor<T> mean({R}), rstd({R});
    const T* px = x.val().data();
    const T* pg = gamma.val().data();
    const T* pb = beta.val().data();
    T* po = out.data();
    for (int64_t r = 0; r < R; r++) {
        const T* src = px + r * D;
        T m = T(0);
        for (int64_t i = 0; i < D; i++) m += src[i];
        m /= T(D);
        T v = T(0);
        for (int64_t i = 0; i < D; i++) {
            T d = src[i] - m;
            v += d * d;
        }
        v /= T(D);
        T rs = T(1) / std::sqrt(v + eps);
        mean[r] = m;
        rstd[r] = rs;
        T* dst = po + r * D;
        for (int64_t i = 0; i < D; i++) dst[i] = (src[i] - m) * rs * pg[i] + pb[i];
    }
    auto n = make_node(std::move(out), {x.node(), gamma.node(), beta.node()});
    n->back = [R, D, mean, rstd](Node<T>& self) {
        const T* g = self.grad.data();
        auto& xn = self.prev[0];
        auto& gn = self.prev[1];
        auto& bn = self.prev[2];
        const T* px = xn->val.data();
        const T* pga = gn->val.data();
        if (xn->requires_grad) {
            xn->ensure_grad();
            T* dx = xn->grad.data();
            for (int64_t r = 0; r < R; r++) {
                T m = mean[r], rs = rstd[r];
                const T* xs = px + r * D;
                const T* gs = g + r * D;
                T sum_dxh = T(0), sum_dxh_xh = T(0);
                for (int64_t i = 0; i < D; i++) {
                    T dxh = gs[i] * pga[i];
                    T xh = (xs[i] - m) * rs;
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh;
                }
                T inv = T(1) / T(D);
                for (int64_t i = 0; i < D; i++) {
                    T dxh = gs[i] * pga[i];
                    T xh = (xs[i] - m) * rs;
                    dx[r * D + i] += rs * (dxh - inv * sum_dxh - xh * inv * sum_dxh_xh);
                }
            }
        }
        if (gn->requires_grad || bn->requires_grad) {
            if (gn->requires_grad) gn->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (int64_t r = 0; r < R; r++) {
                T m = mean[r], rs = rstd[r];
                const T* xs = px + r * D;
                const T* gs = g + r * D;
                for (int64_t i = 0; i < D; i++) {
                    if (gn->requires_grad) gn->grad[i] += gs[i] * (xs[i] - m) * rs;
                    if (bn->requires_grad) bn->grad[i] += gs[i];
                }
            }
        }
    };
    return Value<T>(n);
}

// ------------------------------------------------------- attention building

template <typename T>
Value<T> softmax_lastdim(const Value<T>& x) {
    int64_t D = x.size(-1);
    int64_t R = x.val().numel() / D;
    Tensor<T> out(x.shape());
    const T* px = x.val().data();
    T* po = out.data();
    for (int64_t r = 0; r < R; r++) {
        const T* src = px + r * D;
        T* dst = po + r * D;
        T mx = src[0];
        for (int64_t i = 1; i < D; i++) mx = std::max(mx, src[i]);
        T sum = T(0);
        for (int64_t i = 0; i < D; i++) {
            dst[i] = std::exp(src[i] - mx);
            sum += dst[i];
        }
        T inv = T(1) / sum;
        for (int64_t i = 0; i < D; i++) dst[i] *= inv;
    }
    auto n = make_node(std::move(out), {x.node()});
    Tensor<T> y = n->val;
    n->back = [R, D, y](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* dx = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t r = 0; r < R; r++) {
            const T* ys = y.data() + r * D;
            const T* gs = g + r * D;
            T dot = T(0);
            for (int64_t i = 0; i < D; i++) dot += gs[i] * ys[i];
            for (int64_t i = 0; i < D; i++) dx[r * D + i] += (gs[i] - dot) * ys[i];
        }
    };
    return Value<T>(n);
}

// a: (B,M,K), b: (B,K,N) -> (B,M,N)
template <typename T>
Value<T> bmm(const Value<T>& a, const Value<T>& b) {
    int64_t B = a.size(0), M = a.size(1), K = a.size(2), N = b.size(2);
    if (b.size(0) != B || b.size(1) != K) throw ShapeError("bmm: shape mismatch");
    Tensor<T> out({B, M, N});
    for (int64_t i = 0; i < B; i++)
        gemm_nn_range<T>(0, M, N, K, a.val().data() + i * M * K, K,
                         b.val().data() + i * K * N, N, out.data() + i * M * N, N, false);
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [B, M, K, N](Node<T>& self) {
        const T* g = self.grad.data();
        auto& an = self.prev[0];
        auto& bn = self.prev[1];
        if (an->requires_grad) {
            an->ensure_grad();
            std::vector<T> bT(N * K);
            for (int64_t i = 0; i < B; i++) {
                transpose(K, N, bn->val.data() + i * K * N, bT.data());
                gemm_nn_range<T>(0, M, K, N, g + i * M * N, N, bT.data(), K,
                                 an->grad.data() + i * M * K, K, true);
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            std::vector<T> aT(K * M);
            for (int64_t i = 0; i < B; i++) {
                transpose(M, K, an->val.data() + i * M * K, aT.data());
                gemm_nn_range<T>(0, K, N, M, aT.data(), M, g + i * M * N, N,
                                 bn->grad.data() + i * K * N, N, true);
            }
        }
    };
    return Value<T>(n);
}

// a: (B,M,K), b: (B,N,K) -> (B,M,N) = a . b^T
template <typename T>
Value<T> bmm_abt(const Value<T>& a, const Value<T>& b) {
    int64_t B = a.size(0), M = a.size(1), K = a.size(2), N = b.size(1);
    if (b.size(0) != B || b.size(2) != K) throw ShapeError("bmm_abt: shape mismatch");
    Tensor<T> out({B, M, N});
    for (int64_t i = 0; i < B; i++)
        gemm_abt(M, N, K, a.val().data() + i * M * K, K, b.val().data() + i * N * K, K,
                 out.data() + i * M * N, N, false);
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [B, M, K, N](Node<T>& self) {
        const T* g = self.grad.data();
        auto& an = self.prev[0];
        auto& bn = self.prev[1];
        if (an->requires_grad) {
            an->ensure_grad();
            for (int64_t i = 0; i < B; i++)
                gemm_nn_range<T>(0, M, K, N, g + i * M * N, N, bn->val.data() + i * N * K, K,
                                 an->grad.data() + i * M * K, K, true);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            std::vector<T> gT(N * M);
            for (int64_t i = 0; i < B; i++) {
                transpose(M, N, g + i * M * N, gT.data());
                gemm_nn_range<T>(0, N, K, M, gT.data(), M, an->val.data() + i * M * K, K,
                                 bn->grad.data() + i * N * K, K, true);
            }
        }
    };
    return Value<T>(n);
}

// ------------------------------------------------------------ pooling et al

template <typename T>
Value<T> adaptive_avg_pool2d(const Value<T>& x, int64_t oh, int64_t ow) {
    int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    Tensor<T> out({B, C, oh, ow});
    const T* px = x.val().data();
    T* po = out.data();
    auto bin = [](int64_t i, int64_t in, int64_t on, int64_t& lo, int64_t& hi) {
        lo = (i * in) / on;
        hi = ((i + 1) * in + on - 1) / on;
    };
    for (int64_t bc = 0; bc < B * C; bc++)
        for (int64_t i = 0; i < oh; i++)
            for (int64_t j = 0; j < ow; j++) {
                int64_t h0, h1, w0, w1;
                bin(i, H, oh, h0, h1);
                bin(j, W, ow, w0, w1);
                T s = T(0);
                for (int64_t ih = h0; ih < h1; ih++)
                    for (int64_t iw = w0; iw < w1; iw++) s += px[(bc * H + ih) * W + iw];
                po[(bc * oh + i) * ow + j] = s / T((h1 - h0) * (w1 - w0));
            }
    auto n = make_node(std::move(out), {x.node()});
    n->back = [B, C, H, W, oh, ow](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* dx = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        auto bin = [](int64_t i, int64_t in, int64_t on, int64_t& lo, int64_t& hi) {
            lo = (i * in) / on;
            hi = ((i + 1) * in + on - 1) / on;
        };
        for (int64_t bc = 0; bc < B * C; bc++)
            for (int64_t i = 0; i < oh; i++)
                for (int64_t j = 0; j < ow; j++) {
                    int64_t h0, h1, w0, w1;
                    bin(i, H, oh, h0, h1);
                    bin(j, W, ow, w0, w1);
                    T share = g[(bc * oh + i) * ow + j] / T((h1 - h0) * (w1 - w0));
                    for (int64_t ih = h0; ih < h1; ih++)
                        for (int64_t iw = w0; iw < w1; iw++) dx[(bc * H + ih) * W + iw] += share;
                }
    };
    return Value<T>(n);
}

template <typename T>
Value<T> avg_pool2(const Value<T>& x) {
    int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    int64_t OH = H / 2, OW = W / 2;
    Tensor<T> out({B, C, OH, OW});
    const T* px = x.val().data();
    T* po = out.data();
    for (int64_t bc = 0; bc < B * C; bc++)
        for (int64_t i = 0; i < OH; i++)
            for (int64_t j = 0; j < OW; j++) {
                const T* s = px + (bc * H + 2 * i) * W + 2 * j;
                po[(bc * OH + i) * OW + j] = (s[0] + s[1] + s[W] + s[W + 1]) * T(0.25);
            }
    auto n = make_node(std::move(out), {x.node()});
    n->back = [B, C, H, W, OH, OW](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* dx = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t bc = 0; bc < B * C; bc++)
            for (int64_t i = 0; i < OH; i++)
                for (int64_t j = 0; j < OW; j++) {
                    T share = g[(bc * OH + i) * OW + j] * T(0.25);
                    T* d = dx + (bc * H + 2 * i) * W + 2 * j;
                    d[0] += share;
                    d[1] += share;
                    d[W] += share;
                    d[W + 1] += share;
                }
    };
    return Value<T>(n);
}

template <typename T>
Value<T> upsample_nearest2(const Value<T>& x) {
    int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    Tensor<T> out({B, C, 2 * H, 2 * W});
    const T* px = x.val().data();
    T* po = out.data();
    for (int64_t bc = 0; bc < B * C; bc++)
        for (int64_t i = 0; i < H; i++)
            for (int64_t j = 0; j < W; j++) {
                T v = px[(bc * H + i) * W + j];
                T* d = po + (bc * 2 * H + 2 * i) * 2 * W + 2 * j;
                d[0] = v;
                d[1] = v;
                d[2 * W] = v;
                d[2 * W + 1] = v;
            }
    auto n = make_node(std::move(out), {x.node()});
    n->back = [B, C, H, W](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* dx = self.prev[0]->grad.data();
        const T* g = self.grad.data();
        for (int64_t bc = 0; bc < B * C; bc++)
            for (int64_t i = 0; i < H; i++)
                for (int64_t j = 0; j < W; j++) {
                    const T* s = g + (bc * 2 * H + 2 * i) * 2 * W + 2 * j;
                    dx[(bc * H + i) * W + j] += s[0] + s[1] + s[2 * W] + s[2 * W + 1];
                }
    };
    return Value<T>(n);
}

// x: (B,C,H,W) + v: (B,C) broadcast over spatial dims
template <typename T>
Value<T> add_channel_vec(const Value<T>& x, const Value<T>& v) {
    int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    if (v.size(0) != B || v.size(1) != C)
        throw ShapeError("add_channel_vec: vector shape mismatch");
    Tensor<T> out(x.shape());
    const T* px = x.val().data();
    const T* pv = v.val().data();
    T* po = out.data();
    for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++) {
            T bias = pv[b * C + c];
            const T* s = px + (b * C + c) * H * W;
            T* d = po + (b * C + c) * H * W;
            for (int64_t i = 0; i < H * W; i++) d[i] = s[i] + bias;
        }
    auto n = make_node(std::move(out), {x.node(), v.node()});
    n->back = [B, C, H, W](Node<T>& self) {
        const T* g = self.grad.data();
        if (self.prev[0]->requires_grad) {
            self.prev[0]->ensure_grad();
            T* pg = self.prev[0]->grad.data();
            for (int64_t i = 0; i < self.grad.numel(); i++) pg[i] += g[i];
        }
        if (self.prev[1]->requires_grad) {
            self.prev[1]->ensure_grad();
            T* pg = self.prev[1]->grad.data();
            for (int64_t b = 0; b < B; b++)
                for (int64_t c = 0; c < C; c++) {
                    const T* s = g + (b * C + c) * H * W;
                    T acc = T(0);
                    for (int64_t i = 0; i < H * W; i++) acc += s[i];
                    pg[b * C + c] += acc;
                }
        }
    };
    return Value<T>(n);
}

// ---------------------------------------------------------------- reductions

template <typename T>
Value<T> mean_all(const Value<T>& x) {
    int64_t n_el = x.val().numel();
    Tensor<T> out({1});
    T s = T(0);
    const T* px = x.val().data();
    for (int64_t i = 0; i < n_el; i++) s += px[i];
    out[0] = s / T(n_el);
    auto n = make_node(std::move(out), {x.node()});
    n->back = [n_el](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* dx = self.prev[0]->grad.data();
        T share = self.grad[0] / T(n_el);
        for (int64_t i = 0; i < n_el; i++) dx[i] += share;
    };
    return Value<T>(n);
}

template <typename T>
Value<T> sum_all(const Value<T>& x) {
    int64_t n_el = x.val().numel();
    Tensor<T> out({1});
    T s = T(0);
    for (int64_t i = 0; i < n_el; i++) s += x.val()[i];
    out[0] = s;
    auto n = make_node(std::move(out), {x.node()});
    n->back = [n_el](Node<T>& self) {
        if (!self.prev[0]->requires_grad) return;
        self.prev[0]->ensure_grad();
        T* dx = self.prev[0]->grad.data();
        for (int64_t i = 0; i < n_el; i++) dx[i] += self.grad[0];
    };
    return Value<T>(n);
}

// mean |a - b|; the subgradient at 0 is 0
template <typename T>
Value<T> l1_loss(const Value<T>& a, const Value<T>& b) {
    check_same_shape(a.val(), b.val(), "l1_loss");
    int64_t n_el = a.val().numel();
    Tensor<T> out({1});
    T s = T(0);
    for (int64_t i = 0; i < n_el; i++) s += std::abs(a.val()[i] - b.val()[i]);
    out[0] = s / T(n_el);
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [n_el](Node<T>& self) {
        T share = self.grad[0] / T(n_el);
        const T* va = self.prev[0]->val.data();
        const T* vb = self.prev[1]->val.data();
        for (int s2 = 0; s2 < 2; s2++) {
            auto& p = self.prev[s2];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            T* pg = p->grad.data();
            T sgn = s2 == 0 ? T(1) : T(-1);
            for (int64_t i = 0; i < n_el; i++) {
                T d = va[i] - vb[i];
                pg[i] += sgn * share * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
            }
        }
    };
    return Value<T>(n);
}

// mean (a - b)^2
template <typename T>
Value<T> mse_loss(const Value<T>& a, const Value<T>& b) {
    check_same_shape(a.val(), b.val(), "mse_loss");
    int64_t n_el = a.val().numel();
    Tensor<T> out({1});
    T s = T(0);
    for (int64_t i = 0; i < n_el; i++) {
        T d = a.val()[i] - b.val()[i];
        s += d * d;
    }
    out[0] = s / T(n_el);
    auto n = make_node(std::move(out), {a.node(), b.node()});
    n->back = [n_el](Node<T>& self) {
        T share = T(2) * self.grad[0] / T(n_el);
        const T* va = self.prev[0]->val.data();
        const T* vb = self.prev[1]->val.data();
        for (int s2 = 0; s2 < 2; s2++) {
            auto& p = self.prev[s2];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            T* pg = p->grad.data();
            T sgn = s2 == 0 ? T(1) : T(-1);
            for (int64_t i = 0; i < n_el; i++) pg[i] += sgn * share * (va[i] - vb[i]);
        }
    };
    return Value<T>(n);
}

// mean over elements of 0.5 * (mu^2 + exp(logvar) - logvar - 1)
template <typename T>
Value<T> kl_standard_normal(const Value<T>& mu, const Value<T>& log_var) {
    check_same_shape(mu.val(), log_var.val(), "kl_standard_normal");
    int64_t n_el = mu.val().numel();
    Tensor<T> out({1});
    T s = T(0);
    for (int64_t i = 0; i < n_el; i++) {
        T m = mu.val()[i], lv = log_var.val()[i];
        s += T(0.5) * (m * m + std::exp(lv) - lv - T(1));
    }
    out[0] = s / T(n_el);
    auto n = make_node(std::move(out), {mu.node(), log_var.node()});
    n->back = [n_el](Node<T>& self) {
        T share = self.grad[0] / T(n_el);
        const T* vm = self.prev[0]->val.data();
        const T* vl = self.prev[1]->val.data();
        if (self.prev[0]->requires_grad) {
            self.prev[0]->ensure_grad();
            T* pg = self.prev[0]->grad.data();
            for (int64_t i = 0; i < n_el; i++) pg[i] += share * vm[i];
        }
        if (self.prev[1]->requires_grad) {
            self.prev[1]->ensure_grad();
            T* pg = self.prev[1]->grad.data();
            for (int64_t i = 0; i < n_el; i++)
                pg[i] += share * T(0.5) * (std::exp(vl[i]) - T(1));
        }
    };
    return Value<T>(n);
}

}  // namespace ad
}  // namespace textsr

#endif  // TEXTSR_AUTODIFF_HPP
