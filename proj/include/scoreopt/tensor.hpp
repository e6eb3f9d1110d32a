#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "scoreopt/errors.hpp"

namespace scoreopt {

/// Dense row-major tensor of doubles. Value type; all math here is
/// shape-checked and allocation-honest (no views, no aliasing).
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw ContractViolation("tensor data length does not match shape");
    }

    /// 1-D convenience: Tensor::vec({1.0, 2.0}).
    static Tensor vec(std::initializer_list<double> xs) {
        return Tensor({xs.size()}, std::vector<double>(xs));
    }
    static Tensor vec(std::vector<double> xs) {
        std::size_t n = xs.size();
        return Tensor({n}, std::move(xs));
    }
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// 2-D element access for matrices stored as {rows, cols}.
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    std::size_t rows() const { return shape_[0]; }
    std::size_t cols() const { return shape_[1]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor& operator+=(const Tensor& o) {
        check(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        check(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(Tensor a, double s) { return a *= s; }
    friend Tensor operator*(double s, Tensor a) { return a *= s; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

  private:
    void check(const Tensor& o) const {
        if (!same_shape(o)) throw ContractViolation("tensor shape mismatch");
    }
    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw ContractViolation("zero tensor dimension");
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ContractViolation("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2_sq(const Tensor& a) { return dot(a, a); }
inline double norm2(const Tensor& a) { return std::sqrt(norm2_sq(a)); }

inline double norm_inf(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

/// y += alpha * x
inline void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (!x.same_shape(y)) throw ContractViolation("axpy: shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(const Tensor& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

/// W (r x c) times v (c) -> (r)
inline Tensor matvec(const Tensor& W, const Tensor& v) {
    if (W.shape().size() != 2 || v.shape().size() != 1 || W.cols() != v.size())
        throw ContractViolation("matvec: shape mismatch");
    Tensor out({W.rows()});
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double* row = W.data() + r * W.cols();
        double s = 0.0;
        for (std::size_t c = 0; c < W.cols(); ++c) s += row[c] * v[c];
        out[r] = s;
    }
    return out;
}

/// W^T (r x c) times v (r) -> (c)
inline Tensor matvec_t(const Tensor& W, const Tensor& v) {
    if (W.shape().size() != 2 || v.shape().size() != 1 || W.rows() != v.size())
        throw ContractViolation("matvec_t: shape mismatch");
    Tensor out({W.cols()});
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double* row = W.data() + r * W.cols();
        for (std::size_t c = 0; c < W.cols(); ++c) out[c] += row[c] * v[r];
    }
    return out;
}

}  // namespace scoreopt
