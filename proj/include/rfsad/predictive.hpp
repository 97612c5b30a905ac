#pragma once

// Posterior predictive checks.
//
// Cardinality: the predictive of n_{t+1} is NB(c_t, d_t / (d_t + 1)). The
// p-value is the predictive mass of every count whose probability does not
// exceed that of the observed count (the complement of the highest
// predictive probability set).
//
// Features: the sample mean of the new pattern has a multivariate t
// predictive; its Hotelling-type statistic is F(d, nu - d + 1).
//
// The two p-values are merged with Fisher's rule and compared to a
// chi-square quantile.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>

#include "rfsad/numerics.hpp"
#include "rfsad/posterior.hpp"

namespace rfsad {

struct NbPredictive {
    double r = 1.0;  // size, c_t
    double p = 0.5;  // success probability, d_t / (d_t + 1)

    static NbPredictive from_gamma(const GammaPosterior& g) {
        if (!(g.d > 0.0)) throw DomainError("NbPredictive: Gamma rate parameter must be positive");
        return {g.c, g.d / (g.d + 1.0)};
    }

    double mean() const noexcept { return r * (1.0 - p) / p; }
    double variance() const noexcept { return r * (1.0 - p) / (p * p); }
};

namespace detail {

inline void check_nb(const NbPredictive& nb) {
    if (!(nb.r > 0.0)) domain_fail("NbPredictive", "r must be positive");
    if (!(nb.p > 0.0 && nb.p < 1.0)) domain_fail("NbPredictive", "p must lie in (0, 1)");
}

inline double nb_log_pmf_unchecked(double k, const NbPredictive& nb, double ln_p, double ln_q, double lg_r) {
    return ln_gamma(nb.r + k) - lg_r - ln_gamma(k + 1.0) + nb.r * ln_p + k * ln_q;
}

// Relative tolerance under which two pmf values count as tied.
inline constexpr double kTieLogTolerance = 1e-12;
inline constexpr double kTailMass = 1e-12;

}  // namespace detail

inline double nb_log_pmf(std::size_t k, const NbPredictive& nb) {
    detail::check_nb(nb);
    return detail::nb_log_pmf_unchecked(static_cast<double>(k), nb, std::log(nb.p), std::log1p(-nb.p),
                                        ln_gamma(nb.r));
}

inline Probability nb_pmf(std::size_t k, const NbPredictive& nb) {
    return Probability::clamped(std::exp(nb_log_pmf(k, nb)));
}

// Upper tail P(N > k) = I_{1-p}(k + 1, r).
inline double nb_upper_tail(std::size_t k, const NbPredictive& nb) {
    detail::check_nb(nb);
    return reg_inc_beta(1.0 - nb.p, static_cast<double>(k) + 1.0, nb.r);
}

// Enumeration bound: mean + 40 sd, doubled until the tail beyond it is
// below 1e-12, and never below `at_least`.
inline std::size_t nb_enumeration_bound(const NbPredictive& nb, std::size_t at_least = 0) {
    detail::check_nb(nb);
    double k = std::ceil(nb.mean() + 40.0 * std::sqrt(nb.variance()));
    if (!(k < 1e9)) throw DomainError("nb_enumeration_bound: predictive too diffuse to enumerate");
    auto bound = std::max<std::size_t>(static_cast<std::size_t>(k), at_least);
    bound = std::max<std::size_t>(bound, 16);
    while (nb_upper_tail(bound, nb) >= detail::kTailMass) {
        bound *= 2;
        if (bound > (std::size_t{1} << 30))
            throw DomainError("nb_enumeration_bound: predictive too diffuse to enumerate");
    }
    return bound;
}

// pr^n: mass of all counts whose predictive probability is <= that of
// n_obs. Ties are counted in the p-value.
inline Probability cardinality_pvalue(std::size_t n_obs, const NbPredictive& nb) {
    detail::check_nb(nb);
    const std::size_t k_max = nb_enumeration_bound(nb, n_obs);
    const double ln_p = std::log(nb.p);
    const double ln_q = std::log1p(-nb.p);
    const double lg_r = ln_gamma(nb.r);
    const double ln_obs = detail::nb_log_pmf_unchecked(static_cast<double>(n_obs), nb, ln_p, ln_q, lg_r);
    const double cut = ln_obs + detail::kTieLogTolerance * std::max(1.0, std::abs(ln_obs));
    double sum = 0.0;
    for (std::size_t k = 0; k <= k_max; ++k) {
        const double lp = detail::nb_log_pmf_unchecked(static_cast<double>(k), nb, ln_p, ln_q, lg_r);
        if (lp <= cut) sum += std::exp(lp);
    }
    return Probability(std::min(sum, 1.0));
}

enum class ScaleVariant {
    derived,       // (1/l + 1/n) Psi / (nu - d + 1)
    literal  // (l + 1) / (l n (nu - d + 1)) Psi
};

// Scale multiplier kappa applied to Psi in the predictive covariance.
inline double predictive_scale(double l, double nu, std::size_t d, std::size_t n_new, ScaleVariant variant) {
    const double dof = nu - static_cast<double>(d) + 1.0;
    const double n = static_cast<double>(n_new);
    if (variant == ScaleVariant::derived) return (1.0 / l + 1.0 / n) / dof;
    return (l + 1.0) / (l * n * dof);
}

// True when the feature predictive is proper: l > 0, nu > d - 1, Psi SPD.
inline bool feature_check_ready(const NiwPosterior& post) {
    if (!(post.l > 0.0)) return false;
    if (!(post.nu - static_cast<double>(post.dim) + 1.0 > 0.0)) return false;
    return is_positive_definite(post.psi);
}

// Hotelling-type statistic of x_bar against the predictive of the mean of
// n_new fresh points. Returns nullopt when the predictive is improper.
inline std::optional<double> feature_statistic(std::span<const double> x_bar, std::size_t n_new,
                                               const NiwPosterior& post, ScaleVariant variant) {
    if (x_bar.size() != post.dim) throw InvalidArgument("feature_statistic: dimension mismatch");
    if (n_new == 0 || !(post.l > 0.0)) return std::nullopt;
    const std::size_t d = post.dim;
    if (!(post.nu - static_cast<double>(d) + 1.0 > 0.0)) return std::nullopt;
    std::optional<Cholesky> chol;
    try {
        chol.emplace(post.psi);
    } catch (const NotPositiveDefinite&) {
        return std::nullopt;
    }
    Vec diff(x_bar.begin(), x_bar.end());
    for (std::size_t i = 0; i < d; ++i) diff[i] -= post.m[i];
    const double kappa = predictive_scale(post.l, post.nu, d, n_new, variant);
    return chol->quad_form_inverse(diff) / (kappa * static_cast<double>(d));
}

// pr^{x|n} = 1 - F_{d, nu-d+1}(T^2); nullopt marks a skipped check.
inline std::optional<Probability> feature_pvalue(std::span<const double> x_bar, std::size_t n_new,
                                                 const NiwPosterior& post,
                                                 ScaleVariant variant = ScaleVariant::derived) {
    const auto t2 = feature_statistic(x_bar, n_new, post, variant);
    if (!t2) return std::nullopt;
    const double d = static_cast<double>(post.dim);
    return Probability::clamped(f_survival(*t2, d, post.nu - d + 1.0));
}

// chi-square critical values for the one- and two-p-value Fisher scores.
struct FisherThresholds {
    double alpha = 0.01;
    double dof2 = 0.0;
    double dof4 = 0.0;

    static FisherThresholds for_alpha(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("FisherThresholds: alpha must lie in (0, 1)");
        return {alpha, chisq_quantile(1.0 - alpha, 2), chisq_quantile(1.0 - alpha, 4)};
    }
};

inline constexpr double kPValueFloor = 1e-300;

struct CheckResult {
    std::int64_t t = 0;
    std::size_t n = 0;
    bool tested = false;  // false during warm-up
    Probability pr_n{1.0};
    std::optional<Probability> pr_x;
    double fisher_P = 0.0;
    int dof = 0;
    double threshold = 0.0;
    bool alarm = false;
    bool clamped = false;  // a p-value was floored at kPValueFloor

    friend bool operator==(const CheckResult&, const CheckResult&) = default;
};

inline CheckResult fisher_combine(Probability pr_n, std::optional<Probability> pr_x,
                                  const FisherThresholds& thresholds) {
    CheckResult r;
    r.tested = true;
    r.pr_n = pr_n;
    r.pr_x = pr_x;
    auto floored = [&](Probability p) {
        if (p.value() < kPValueFloor) {
            r.clamped = true;
            return kPValueFloor;
        }
        return p.value();
    };
    double log_sum = std::log(floored(pr_n));
    if (pr_x) {
        log_sum += std::log(floored(*pr_x));
        r.dof = 4;
        r.threshold = thresholds.dof4;
    } else {
        r.dof = 2;
        r.threshold = thresholds.dof2;
    }
    r.fisher_P = 0.0 - 2.0 * log_sum;
    r.alarm = r.fisher_P > r.threshold;
    return r;
}

inline CheckResult fisher_combine(Probability pr_n, std::optional<Probability> pr_x, double alpha) {
    return fisher_combine(pr_n, pr_x, FisherThresholds::for_alpha(alpha));
}

}  // namespace rfsad
