#pragma once

// Poisson random-finite-set observation model with a Gaussian spatial
// density, and the ranking-function baseline score. Everything is in log
// space: patterns of ~30 points push raw densities toward underflow.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfsad/numerics.hpp"

namespace rfsad {

// One observation: an unordered set of d-dimensional points at time t.
struct PointPattern {
    std::int64_t t = 0;
    std::size_t dim = 0;
    std::vector<Vec> points;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }

    void validate() const {
        for (const Vec& x : points)
            if (x.size() != dim)
                throw InvalidArgument("PointPattern: point of dimension " + std::to_string(x.size()) +
                                      " in a pattern of dimension " + std::to_string(dim));
    }

    Vec sum() const {
        Vec s(dim, 0.0);
        for (const Vec& x : points)
            for (std::size_t i = 0; i < dim; ++i) s[i] += x[i];
        return s;
    }

    // Undefined for an empty pattern; returns the zero vector in that case.
    Vec mean() const {
        Vec s = sum();
        if (!points.empty())
            for (double& v : s) v /= static_cast<double>(points.size());
        return s;
    }
};

struct GaussParams {
    Vec mu;
    SmallMatrix sigma;

    std::size_t dim() const noexcept { return mu.size(); }

    static GaussParams standard(std::size_t d) { return {Vec(d, 0.0), SmallMatrix::identity(d)}; }
};

struct PoissonRfsParams {
    double rate = 1.0;
    GaussParams gauss;
};

namespace detail {

inline void check_gauss(const GaussParams& g) {
    if (g.sigma.dim() != g.mu.size()) throw InvalidArgument("GaussParams: mu and sigma dimensions differ");
}

inline double gaussian_logpdf(std::span<const double> x, const GaussParams& g, const Cholesky& chol) {
    if (x.size() != g.mu.size()) throw InvalidArgument("gaussian_logpdf: dimension mismatch");
    Vec diff(x.begin(), x.end());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= g.mu[i];
    const double d = static_cast<double>(x.size());
    return -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * chol.log_det() -
           0.5 * chol.quad_form_inverse(diff);
}

// ln ||p||_2^2 for a Gaussian density: (4 pi)^{-d/2} |Sigma|^{-1/2}.
inline double gaussian_log_l2_norm_sq(std::size_t d, const Cholesky& chol) {
    return -0.5 * static_cast<double>(d) * std::log(4.0 * std::numbers::pi) - 0.5 * chol.log_det();
}

inline double poisson_log_pmf(std::size_t n, double rate) {
    const double k = static_cast<double>(n);
    return -rate + k * std::log(rate) - ln_gamma(k + 1.0);
}

}  // namespace detail

inline double gaussian_logpdf(std::span<const double> x, const GaussParams& g) {
    detail::check_gauss(g);
    return detail::gaussian_logpdf(x, g, Cholesky(g.sigma));
}

// log ||p||_2^2 for the Gaussian spatial density.
inline double gaussian_log_l2_norm_sq(const GaussParams& g) {
    detail::check_gauss(g);
    return detail::gaussian_log_l2_norm_sq(g.dim(), Cholesky(g.sigma));
}

// log f(X | lambda, mu, Sigma) = -lambda + sum_j [ln lambda + ln N(x_j; mu, Sigma)].
inline double poisson_rfs_logdensity(const PointPattern& x, const PoissonRfsParams& p) {
    if (!(p.rate > 0.0)) throw InvalidArgument("poisson_rfs_logdensity: rate must be positive");
    double s = -p.rate;
    if (x.empty()) return s;
    detail::check_gauss(p.gauss);
    const Cholesky chol(p.gauss.sigma);
    const double ln_rate = std::log(p.rate);
    for (const Vec& pt : x.points) s += ln_rate + detail::gaussian_logpdf(pt, p.gauss, chol);
    return s;
}

// Scores a pattern against known parameters. Lower is more anomalous.
// Proportionality constant fixed to 1.
class RankingScorer {
public:
    explicit RankingScorer(PoissonRfsParams params)
        : params_(std::move(params)), chol_(checked(params_).gauss.sigma) {
        log_norm_sq_ = detail::gaussian_log_l2_norm_sq(params_.gauss.dim(), chol_);
    }

    double operator()(const PointPattern& x) const {
        double s = detail::poisson_log_pmf(x.size(), params_.rate);
        for (const Vec& pt : x.points) s += detail::gaussian_logpdf(pt, params_.gauss, chol_) - log_norm_sq_;
        return s;
    }

    const PoissonRfsParams& params() const noexcept { return params_; }

private:
    static const PoissonRfsParams& checked(const PoissonRfsParams& p) {
        if (!(p.rate > 0.0)) throw InvalidArgument("RankingScorer: rate must be positive");
        detail::check_gauss(p.gauss);
        return p;
    }

    PoissonRfsParams params_;
    Cholesky chol_;
    double log_norm_sq_ = 0.0;
};

// log r(X) = log rho(n) + sum_j log p(x_j) - n log ||p||_2^2.
inline double ranking_log_score(const PointPattern& x, const PoissonRfsParams& p) {
    return RankingScorer(p)(x);
}

}  // namespace rfsad
