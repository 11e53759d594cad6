#ifndef TEXTSR_TENSOR_HPP
#define TEXTSR_TENSOR_HPP

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "common.hpp"

namespace textsr {

// Dense row-major tensor with shared storage. Shapes are small (<= 4 dims in
// practice); reshape shares the buffer, copies are explicit via clone().
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(count(shape_), T(0))) {}

    Tensor(std::vector<int64_t> shape, std::shared_ptr<std::vector<T>> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_ && static_cast<int64_t>(data_->size()) != count(shape_))
            throw ShapeError("tensor storage size does not match shape");
    }

    static Tensor full(std::vector<int64_t> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.begin(), t.end(), value);
        return t;
    }

    static Tensor from(std::vector<int64_t> shape, std::vector<T> values) {
        if (count(shape) != static_cast<int64_t>(values.size()))
            throw ShapeError("value count does not match shape");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<T>>(std::move(values));
        return t;
    }

    bool defined() const { return static_cast<bool>(data_); }
    int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t size(int d) const { return shape_.at(d < 0 ? shape_.size() + d : d); }

    T* data() { return data_->data(); }
    const T* data() const { return data_->data(); }
    T* begin() { return data(); }
    T* end() { return data() + numel(); }
    const T* begin() const { return data(); }
    const T* end() const { return data() + numel(); }

    T& operator[](int64_t i) { return (*data_)[i]; }
    const T& operator[](int64_t i) const { return (*data_)[i]; }

    // Shares storage.
    Tensor reshape(std::vector<int64_t> shape) const {
        if (count(shape) != numel())
            throw ShapeError("reshape element count mismatch: " + shape_str(shape_) +
                             " -> " + shape_str(shape));
        return Tensor(std::move(shape), data_);
    }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<T>>(*data_);
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> t(shape_);
        for (int64_t i = 0; i < numel(); i++) t[i] = static_cast<U>((*data_)[i]);
        return t;
    }

    void fill(T v) { std::fill(begin(), end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }

    static std::string shape_str(const std::vector<int64_t>& shape) {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < shape.size(); i++) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }

    std::string shape_str() const { return shape_str(shape_); }

private:
    std::vector<int64_t> shape_;
    std::shared_ptr<std::vector<T>> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

}  // namespace textsr

#endif  // TEXTSR_TENSOR_HPP
