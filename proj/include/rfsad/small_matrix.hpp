#pragma once

// Dense storage for the small symmetric matrices that appear in the model
// (covariances, inverse-Wishart scales, scatter sums). Dimensions are
// expected to stay small; anything above kSoftDimLimit still works but is
// not what the layout is tuned for.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rfsad/error.hpp"

namespace rfsad {

using Vec = std::vector<double>;

inline constexpr std::size_t kSoftDimLimit = 16;

class SmallMatrix {
public:
    SmallMatrix() = default;
    explicit SmallMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, 0.0) {}

    static SmallMatrix zeros(std::size_t dim) { return SmallMatrix(dim); }

    static SmallMatrix identity(std::size_t dim, double scale = 1.0) {
        SmallMatrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = scale;
        return m;
    }

    static SmallMatrix diagonal(std::span<const double> diag) {
        SmallMatrix m(diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    // Row-major entries; throws if the size is not a perfect square.
    static SmallMatrix from_rows(std::size_t dim, std::span<const double> entries) {
        if (entries.size() != dim * dim)
            throw InvalidArgument("SmallMatrix::from_rows: expected " + std::to_string(dim * dim) +
                                  " entries, got " + std::to_string(entries.size()));
        SmallMatrix m(dim);
        for (std::size_t k = 0; k < entries.size(); ++k) m.a_[k] = entries[k];
        return m;
    }

    std::size_t dim() const noexcept { return dim_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * dim_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * dim_ + j]; }

    std::span<const double> data() const noexcept { return a_; }

    SmallMatrix& operator+=(const SmallMatrix& o) {
        check_same(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }

    SmallMatrix& operator-=(const SmallMatrix& o) {
        check_same(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }

    SmallMatrix& operator*=(double s) noexcept {
        for (double& v : a_) v *= s;
        return *this;
    }

    friend SmallMatrix operator+(SmallMatrix a, const SmallMatrix& b) { return a += b; }
    friend SmallMatrix operator-(SmallMatrix a, const SmallMatrix& b) { return a -= b; }
    friend SmallMatrix operator*(double s, SmallMatrix a) { return a *= s; }

    // this += scale * u v^T
    void add_outer(std::span<const double> u, std::span<const double> v, double scale = 1.0) {
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) a_[i * dim_ + j] += scale * u[i] * v[j];
    }

    Vec multiply(std::span<const double> x) const {
        Vec y(dim_, 0.0);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) y[i] += a_[i * dim_ + j] * x[j];
        return y;
    }

    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    bool is_finite() const noexcept {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Symmetric to `rel_tol` relative to the largest entry.
    bool is_symmetric(double rel_tol = 1e-12) const noexcept {
        const double scale = std::max(max_abs(), 1e-300);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = i + 1; j < dim_; ++j)
                if (std::abs((*this)(i, j) - (*this)(j, i)) > rel_tol * scale) return false;
        return true;
    }

    friend bool operator==(const SmallMatrix&, const SmallMatrix&) = default;

private:
    void check_same(const SmallMatrix& o) const {
        if (o.dim_ != dim_) throw InvalidArgument("SmallMatrix: dimension mismatch");
    }

    std::size_t dim_ = 0;
    std::vector<double> a_;
};

// Lower-triangular Cholesky factor A = L L^T of a symmetric positive
// definite matrix. Construction fails with NotPositiveDefinite on the first
// pivot <= 0.
class Cholesky {
public:
    explicit Cholesky(const SmallMatrix& a) : l_(a.dim()) {
        if (!a.is_symmetric()) throw NotPositiveDefinite("Cholesky: matrix is not symmetric");
        const std::size_t n = a.dim();
        for (std::size_t j = 0; j < n; ++j) {
            double s = a(j, j);
            for (std::size_t k = 0; k < j; ++k) s -= l_(j, k) * l_(j, k);
            if (!(s > 0.0))
                throw NotPositiveDefinite("Cholesky: non-positive pivot at column " + std::to_string(j));
            const double ljj = std::sqrt(s);
            l_(j, j) = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                double t = a(i, j);
                for (std::size_t k = 0; k < j; ++k) t -= l_(i, k) * l_(j, k);
                l_(i, j) = t / ljj;
            }
        }
    }

    std::size_t dim() const noexcept { return l_.dim(); }
    const SmallMatrix& lower() const noexcept { return l_; }

    double log_det() const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < l_.dim(); ++i) s += std::log(l_(i, i));
        return 2.0 * s;
    }

    // Solves L y = b.
    Vec forward(std::span<const double> b) const {
        check_len(b.size());
        const std::size_t n = l_.dim();
        Vec y(b.begin(), b.end());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
            y[i] /= l_(i, i);
        }
        return y;
    }

    // Solves A x = b.
    Vec solve(std::span<const double> b) const {
        Vec x = forward(b);
        const std::size_t n = l_.dim();
        for (std::size_t ii = n; ii-- > 0;) {
            for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= l_(k, ii) * x[k];
            x[ii] /= l_(ii, ii);
        }
        return x;
    }

    // b^T A^{-1} b
    double quad_form_inverse(std::span<const double> b) const {
        const Vec y = forward(b);
        double s = 0.0;
        for (double v : y) s += v * v;
        return s;
    }

    // L z: maps standard normals to N(0, A).
    Vec lower_times(std::span<const double> z) const {
        check_len(z.size());
        const std::size_t n = l_.dim();
        Vec out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k <= i; ++k) out[i] += l_(i, k) * z[k];
        return out;
    }

private:
    void check_len(std::size_t n) const {
        if (n != l_.dim()) throw InvalidArgument("Cholesky: vector length does not match dimension");
    }

    SmallMatrix l_;
};

struct CholeskySolution {
    Vec x;
    double log_det = 0.0;
};

inline CholeskySolution cholesky_solve(const SmallMatrix& a, std::span<const double> b) {
    const Cholesky chol(a);
    return {chol.solve(b), chol.log_det()};
}

inline bool is_positive_definite(const SmallMatrix& a) {
    try {
        Cholesky chol(a);
        return true;
    } catch (const NotPositiveDefinite&) {
        return false;
    }
}

}  // namespace rfsad
