#pragma once

// Power-discounting conjugate posteriors. The cardinality rate carries a
// Gamma(c, d) posterior (shape-rate), the spatial parameters a
// Normal-Inverse-Wishart (m, l, nu, Psi). Both are maintained by recursively
// discounted sufficient statistics:
//
//   c_t = a c_{t-1} + n_t            d_t = a d_{t-1} + 1
//   W_t = a W_{t-1} + n_t            S_t = a S_{t-1} + sum_j x_j
//   Q_t = a Q_{t-1} + sum_j x_j x_j^T                 a_pow_t = a a_pow_{t-1}
//
// which unroll exactly to the closed-form weighted sums with weights
// a^{t-i} on observation i and a^t on the prior.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "rfsad/numerics.hpp"
#include "rfsad/rfs_model.hpp"

namespace rfsad {

class DiscountFactor {
public:
    constexpr DiscountFactor() = default;
    explicit DiscountFactor(double alpha0) : a_(alpha0) {
        if (!(alpha0 >= 0.0 && alpha0 <= 1.0))
            throw InvalidArgument("DiscountFactor: alpha0 must lie in [0, 1], got " + std::to_string(alpha0));
    }
    constexpr double value() const noexcept { return a_; }

    friend constexpr bool operator==(DiscountFactor, DiscountFactor) = default;

private:
    double a_ = 1.0;
};

struct GammaPosterior {
    double c = 0.5;  // shape
    double d = 0.0;  // rate

    friend bool operator==(const GammaPosterior&, const GammaPosterior&) = default;
};

enum class PriorKind { jeffreys, explicit_values };

struct PriorSpec {
    PriorKind kind = PriorKind::jeffreys;

    // Used when kind == explicit_values.
    double c0 = 0.5;
    double d0 = 0.0;
    Vec m0;
    double l0 = 0.0;
    double nu0 = 0.0;
    SmallMatrix psi0;

    // Jeffreys degrees-of-freedom knob; defaults to -dim.
    std::optional<double> jeffreys_nu0;

    static PriorSpec jeffreys() { return {}; }

    static PriorSpec explicit_prior(double c0, double d0, Vec m0, double l0, double nu0, SmallMatrix psi0) {
        PriorSpec p;
        p.kind = PriorKind::explicit_values;
        p.c0 = c0;
        p.d0 = d0;
        p.m0 = std::move(m0);
        p.l0 = l0;
        p.nu0 = nu0;
        p.psi0 = std::move(psi0);
        return p;
    }

    // G(50.5, 5) x NIW(0, 50, 48, 49 I): the posterior a Jeffreys start
    // reaches, on average, after five in-control patterns of ten standard
    // bivariate normal points.
    static PriorSpec informative_bivariate() {
        return explicit_prior(50.5, 5.0, Vec(2, 0.0), 50.0, 48.0, SmallMatrix::identity(2, 49.0));
    }
};

// NIW posterior plus the discounted statistics it is computed from.
struct NiwPosterior {
    std::size_t dim = 0;

    // Prior hyperparameters (weighted by a_pow in every refresh).
    Vec m0;
    double l0 = 0.0;
    double nu0 = 0.0;
    SmallMatrix psi0;

    // Discounted sufficient statistics.
    double W = 0.0;  // sum a^{t-i} n_i
    Vec S;           // sum a^{t-i} sum_j x_j
    SmallMatrix Q;   // sum a^{t-i} sum_j x_j x_j^T
    double a_pow = 1.0;

    // Current hyperparameters.
    Vec m;
    double l = 0.0;
    double nu = 0.0;
    SmallMatrix psi;

    // m is meaningful only when l > 0; an improper prior with no points
    // leaves the location undefined.
    bool location_defined() const noexcept { return l > 0.0; }

    // Recomputes (m, l, nu, psi) from the prior and the statistics.
    void refresh() {
        const double w0 = a_pow * l0;
        l = w0 + W;
        nu = a_pow * nu0 + W;
        Vec weighted(dim);
        for (std::size_t i = 0; i < dim; ++i) weighted[i] = w0 * m0[i] + S[i];
        psi = a_pow * psi0;
        psi.add_outer(m0, m0, w0);
        psi += Q;
        if (l > 0.0) {
            psi.add_outer(weighted, weighted, -1.0 / l);
            m = weighted;
            for (double& v : m) v /= l;
        } else {
            m.assign(dim, 0.0);
        }
        // Keep psi exactly symmetric.
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = i + 1; j < dim; ++j) {
                const double s = 0.5 * (psi(i, j) + psi(j, i));
                psi(i, j) = s;
                psi(j, i) = s;
            }
    }

    friend bool operator==(const NiwPosterior&, const NiwPosterior&) = default;
};

struct PosteriorPair {
    GammaPosterior gamma;
    NiwPosterior niw;
};

inline PosteriorPair init_prior(const PriorSpec& spec, std::size_t dim) {
    if (dim < 1) throw InvalidArgument("init_prior: dim must be >= 1");
    PosteriorPair out;
    NiwPosterior& niw = out.niw;
    niw.dim = dim;
    if (spec.kind == PriorKind::jeffreys) {
        out.gamma = {0.5, 0.0};
        niw.m0.assign(dim, 0.0);
        niw.l0 = 0.0;
        niw.nu0 = spec.jeffreys_nu0.value_or(-static_cast<double>(dim));
        niw.psi0 = SmallMatrix::zeros(dim);
    } else {
        if (!(spec.c0 > 0.0)) throw InvalidArgument("init_prior: c0 must be positive");
        if (!(spec.d0 >= 0.0)) throw InvalidArgument("init_prior: d0 must be non-negative");
        if (!(spec.l0 >= 0.0)) throw InvalidArgument("init_prior: l0 must be non-negative");
        if (!std::isfinite(spec.nu0)) throw InvalidArgument("init_prior: nu0 must be finite");
        if (spec.m0.size() != dim) throw InvalidArgument("init_prior: m0 has the wrong dimension");
        if (spec.psi0.dim() != dim) throw InvalidArgument("init_prior: psi0 has the wrong dimension");
        if (!spec.psi0.is_finite() || !spec.psi0.is_symmetric())
            throw InvalidArgument("init_prior: psi0 must be finite and symmetric");
        out.gamma = {spec.c0, spec.d0};
        niw.m0 = spec.m0;
        niw.l0 = spec.l0;
        niw.nu0 = spec.nu0;
        niw.psi0 = spec.psi0;
    }
    niw.W = 0.0;
    niw.S.assign(dim, 0.0);
    niw.Q = SmallMatrix::zeros(dim);
    niw.a_pow = 1.0;
    niw.refresh();
    return out;
}

inline GammaPosterior gamma_update(GammaPosterior post, std::size_t n_t, DiscountFactor alpha0) {
    const double a = alpha0.value();
    post.c = a * post.c + static_cast<double>(n_t);
    post.d = a * post.d + 1.0;
    return post;
}

inline NiwPosterior niw_update(NiwPosterior post, const PointPattern& x, DiscountFactor alpha0) {
    if (x.dim != post.dim)
        throw InvalidArgument("niw_update: pattern dimension " + std::to_string(x.dim) +
                              " does not match posterior dimension " + std::to_string(post.dim));
    x.validate();
    const double a = alpha0.value();
    post.W = a * post.W + static_cast<double>(x.size());
    for (double& v : post.S) v *= a;
    post.Q *= a;
    for (const Vec& pt : x.points) {
        for (std::size_t i = 0; i < post.dim; ++i) post.S[i] += pt[i];
        post.Q.add_outer(pt, pt);
    }
    post.a_pow *= a;
    post.refresh();
    return post;
}

inline double posterior_rate_mean(const GammaPosterior& post) {
    if (!(post.d > 0.0)) throw DomainError("posterior_rate_mean: rate parameter d is zero (no data yet)");
    return post.c / post.d;
}

}  // namespace rfsad
