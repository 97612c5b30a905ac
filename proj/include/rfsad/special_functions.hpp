#pragma once

// Special functions backing the predictive distributions: log-gamma,
// regularized incomplete beta and gamma, the F and chi-square CDFs and the
// chi-square quantile. Pure functions, no external math dependency.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rfsad/error.hpp"

namespace rfsad {

// A value in [0, 1]. Construction from anything else throws DomainError.
class Probability {
public:
    constexpr Probability() = default;
    explicit Probability(double v) : v_(v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("Probability: value " + std::to_string(v) + " outside [0, 1]");
    }

    // Clamps tiny round-off excursions (|excess| <= 1e-12) before checking.
    static Probability clamped(double v) {
        if (v < 0.0 && v > -1e-12) v = 0.0;
        if (v > 1.0 && v < 1.0 + 1e-12) v = 1.0;
        return Probability(v);
    }

    constexpr double value() const noexcept { return v_; }

    friend constexpr auto operator<=>(Probability, Probability) = default;

private:
    double v_ = 0.0;
};

namespace detail {

inline double ln_gamma_lanczos(double x) {
    // Godfrey's g = 607/128 coefficients.
    static constexpr double cof[14] = {
        57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
        -0.491913816097620199,   .339946499848118887e-4,  .465236289270485756e-4,
        -.983744753048795646e-4, .158088703224912494e-3,  -.210264441724104883e-3,
        .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
        -.261908384015814087e-4, .368991826595316234e-5};
    double y = x;
    double tmp = x + 5.24218750000000000;
    tmp = (x + 0.5) * std::log(tmp) - tmp;
    double ser = 0.999999999999997092;
    for (double c : cof) ser += c / ++y;
    return tmp + std::log(2.5066282746310005 * ser / x);
}

inline double ln_gamma_stirling(double x) {
    const double z = 1.0 / (x * x);
    // Bernoulli-number tail through the x^-11 term.
    const double series =
        (1.0 / 12.0 +
         z * (-1.0 / 360.0 +
              z * (1.0 / 1260.0 + z * (-1.0 / 1680.0 + z * (1.0 / 1188.0 + z * (-691.0 / 360360.0)))))) /
        x;
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

}  // namespace detail

inline double ln_gamma(double x) {
    if (!(x > 0.0)) detail::domain_fail("ln_gamma", "requires x > 0, got " + std::to_string(x));
    if (std::isinf(x)) return x;
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) -
               detail::ln_gamma_lanczos(1.0 - x);
    }
    if (x >= 15.0) return detail::ln_gamma_stirling(x);
    return detail::ln_gamma_lanczos(x);
}

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz.
inline double inc_beta_cf(double x, double a, double b) {
    constexpr double fpmin = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    constexpr double eps = 1e-16;
    constexpr int max_iter = 100000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) <= eps) return h;
    }
    throw DomainError("reg_inc_beta: continued fraction did not converge");
}

inline void check_beta_args(const char* fn, double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0)) domain_fail(fn, "x must lie in [0, 1], got " + std::to_string(x));
    if (!(a > 0.0) || !(b > 0.0)) domain_fail(fn, "shape parameters must be positive");
}

// Lower and upper parts computed from the side where the continued
// fraction converges quickly.
struct BetaSplit {
    double lower;
    double upper;
};

inline BetaSplit inc_beta_split(double x, double a, double b) {
    if (x == 0.0) return {0.0, 1.0};
    if (x == 1.0) return {1.0, 0.0};
    const double ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        const double lo = front * inc_beta_cf(x, a, b) / a;
        return {lo, 1.0 - lo};
    }
    const double up = front * inc_beta_cf(1.0 - x, b, a) / b;
    return {1.0 - up, up};
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
    detail::check_beta_args("reg_inc_beta", x, a, b);
    return detail::inc_beta_split(x, a, b).lower;
}

// 1 - I_x(a, b) without cancellation in the upper tail.
inline double reg_inc_beta_complement(double x, double a, double b) {
    detail::check_beta_args("reg_inc_beta_complement", x, a, b);
    return detail::inc_beta_split(x, a, b).upper;
}

// Regularized lower incomplete gamma P(a, x).
inline double reg_lower_inc_gamma(double a, double x) {
    if (!(a > 0.0)) detail::domain_fail("reg_lower_inc_gamma", "requires a > 0");
    if (!(x >= 0.0)) detail::domain_fail("reg_lower_inc_gamma", "requires x >= 0");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    const double ln_front = -x + a * std::log(x) - ln_gamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double del = 1.0 / a;
        double sum = del;
        for (int n = 0; n < 100000; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-17) return sum * std::exp(ln_front);
        }
        throw DomainError("reg_lower_inc_gamma: series did not converge");
    }
    constexpr double fpmin = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) <= 1e-16) return 1.0 - std::exp(ln_front) * h;
    }
    throw DomainError("reg_lower_inc_gamma: continued fraction did not converge");
}

inline double chisq_cdf(double q, double dof) {
    if (!(dof > 0.0)) detail::domain_fail("chisq_cdf", "dof must be positive");
    if (!(q >= 0.0)) return 0.0;
    return reg_lower_inc_gamma(0.5 * dof, 0.5 * q);
}

inline double chisq_pdf(double q, double dof) {
    if (!(q > 0.0)) return 0.0;
    const double k = 0.5 * dof;
    return std::exp((k - 1.0) * std::log(q) - 0.5 * q - k * std::numbers::ln2 - ln_gamma(k));
}

// q with chisq_cdf(q, dof) = p. Bracketed bisection, then Newton polish
// that is only accepted while it stays inside the bracket.
inline double chisq_quantile(double p, int dof) {
    if (!(p >= 0.0 && p < 1.0)) detail::domain_fail("chisq_quantile", "p must lie in [0, 1)");
    if (dof <= 0) detail::domain_fail("chisq_quantile", "dof must be positive");
    if (p == 0.0) return 0.0;
    const double k = dof;
    double lo = 0.0;
    double hi = std::max(1.0, k);
    while (chisq_cdf(hi, k) < p) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 400 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (chisq_cdf(mid, k) < p)
            lo = mid;
        else
            hi = mid;
    }
    double q = 0.5 * (lo + hi);
    for (int it = 0; it < 5; ++it) {
        const double f = chisq_cdf(q, k) - p;
        const double fp = chisq_pdf(q, k);
        if (!(fp > 0.0)) break;
        const double next = q - f / fp;
        if (!(next > lo && next < hi)) break;
        if (std::abs(next - q) <= 1e-15 * q) {
            q = next;
            break;
        }
        q = next;
    }
    return q;
}

// CDF of the F(d1, d2) distribution.
inline double f_cdf(double y, double d1, double d2) {
    if (!(y >= 0.0)) detail::domain_fail("f_cdf", "requires y >= 0, got " + std::to_string(y));
    if (!(d1 > 0.0) || !(d2 > 0.0)) detail::domain_fail("f_cdf", "degrees of freedom must be positive");
    if (y == 0.0) return 0.0;
    if (std::isinf(y)) return 1.0;
    const double x = d1 * y / (d1 * y + d2);
    return reg_inc_beta(x, 0.5 * d1, 0.5 * d2);
}

// 1 - f_cdf(y, d1, d2), accurate deep in the upper tail.
inline double f_survival(double y, double d1, double d2) {
    if (!(y >= 0.0)) detail::domain_fail("f_survival", "requires y >= 0, got " + std::to_string(y));
    if (!(d1 > 0.0) || !(d2 > 0.0)) detail::domain_fail("f_survival", "degrees of freedom must be positive");
    if (y == 0.0) return 1.0;
    if (std::isinf(y)) return 0.0;
    // I_{d2/(d2+d1 y)}(d2/2, d1/2) avoids forming 1 - x near x = 1.
    const double x_comp = d2 / (d2 + d1 * y);
    return reg_inc_beta(x_comp, 0.5 * d2, 0.5 * d1);
}

}  // namespace rfsad
