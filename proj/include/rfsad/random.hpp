#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

#include "rfsad/numerics.hpp"
#include "rfsad/rfs_model.hpp"

namespace rfsad {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) noexcept {
    return mix64(mix64(seed) ^ mix64(stream_id ^ 0xd1b54a32d192ed03ULL));
}

// A reproducible random stream identified by (seed, stream id). Children
// are derived by hashing, so the sequence a task sees does not depend on
// the order in which tasks are created or scheduled.
class RngStream {
public:
    using result_type = std::mt19937_64::result_type;

    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id), engine_(derive_seed(seed, stream_id)) {}

    RngStream child(std::uint64_t id) const { return RngStream(derive_seed(seed_, stream_id_), id); }

    RngStream child(std::initializer_list<std::uint64_t> path) const {
        RngStream s = *this;
        for (std::uint64_t id : path) s = s.child(id);
        return s;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double uniform() {
        double u;
        do {
            u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        } while (u == 0.0);
        return u;
    }

    double normal() { return normal_(engine_); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Inversion for rate < 30, the standard library sampler above that.
inline std::uint64_t sample_poisson(double rate, RngStream& rng) {
    if (!(rate > 0.0)) throw InvalidArgument("sample_poisson: rate must be positive");
    if (rate < 30.0) {
        const double u = rng.uniform();
        double p = std::exp(-rate);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= rate / static_cast<double>(k);
            const double next = cdf + p;
            if (next == cdf) break;  // numerically exhausted tail
            cdf = next;
        }
        return k;
    }
    std::poisson_distribution<std::uint64_t> dist(rate);
    return dist(rng);
}

// Draws from N(mu, Sigma) via the Cholesky factor of Sigma.
class MvnSampler {
public:
    explicit MvnSampler(GaussParams g) : g_(std::move(g)), chol_(g_.sigma) {
        if (g_.mu.size() != g_.sigma.dim()) throw InvalidArgument("MvnSampler: dimension mismatch");
    }

    Vec operator()(RngStream& rng) const {
        Vec z(g_.dim());
        for (double& v : z) v = rng.normal();
        Vec x = chol_.lower_times(z);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += g_.mu[i];
        return x;
    }

    const GaussParams& params() const noexcept { return g_; }

private:
    GaussParams g_;
    Cholesky chol_;
};

inline Vec sample_mvn(const GaussParams& g, RngStream& rng) { return MvnSampler(g)(rng); }

// One Poisson-RFS pattern.
inline PointPattern sample_pattern(std::int64_t t, double rate, const MvnSampler& spatial, RngStream& rng) {
    PointPattern x;
    x.t = t;
    x.dim = spatial.params().dim();
    const auto n = sample_poisson(rate, rng);
    x.points.reserve(n);
    for (std::uint64_t j = 0; j < n; ++j) x.points.push_back(spatial(rng));
    return x;
}

}  // namespace rfsad
