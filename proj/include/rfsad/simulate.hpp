#pragma once

// Generators for the in-control process (Pois(10) cardinality, standard
// bivariate normal points), the five single-step out-of-control scenarios,
// the smooth-rate sequence used to show adaptation, and the combined
// rate-and-mean shift of the worked example.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rfsad/error.hpp"
#include "rfsad/random.hpp"
#include "rfsad/rfs_model.hpp"

namespace rfsad {

enum class ScenarioKind { ic, s1, s2, s3, s4, s5, fig1, fig2 };

inline constexpr std::array<ScenarioKind, 5> kAnomalyScenarios = {ScenarioKind::s1, ScenarioKind::s2,
                                                                  ScenarioKind::s3, ScenarioKind::s4,
                                                                  ScenarioKind::s5};

inline std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::ic: return "ic";
        case ScenarioKind::s1: return "s1";
        case ScenarioKind::s2: return "s2";
        case ScenarioKind::s3: return "s3";
        case ScenarioKind::s4: return "s4";
        case ScenarioKind::s5: return "s5";
        case ScenarioKind::fig1: return "fig1";
        case ScenarioKind::fig2: return "fig2";
    }
    return "?";
}

inline std::optional<ScenarioKind> parse_scenario(std::string_view s) {
    for (auto k : {ScenarioKind::ic, ScenarioKind::s1, ScenarioKind::s2, ScenarioKind::s3, ScenarioKind::s4,
                   ScenarioKind::s5, ScenarioKind::fig1, ScenarioKind::fig2})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

inline bool is_single_step_anomaly(ScenarioKind k) {
    return k != ScenarioKind::ic && k != ScenarioKind::fig1;
}

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::ic;
    std::int64_t horizon = 30;
    std::int64_t change_time = 0;  // anomaly index for s1-s5 and fig2
    std::size_t dim = 2;

    double ic_rate = 10.0;
    Vec ic_mean;  // defaults to zero

    // Out-of-control overrides at change_time.
    double ooc_rate = 10.0;
    Vec ooc_mean;

    // Fills in the reference in-control process and the scenario's shift.
    // Default horizons: 30, except 100 for fig1 and t_c (6) for fig2.
    static ScenarioSpec make(ScenarioKind kind, std::optional<std::int64_t> horizon = std::nullopt,
                             std::int64_t change_time = 0) {
        ScenarioSpec s;
        s.kind = kind;
        s.horizon = horizon.value_or(30);
        s.change_time = change_time;
        s.ic_mean.assign(2, 0.0);
        s.ooc_mean = s.ic_mean;
        s.ooc_rate = s.ic_rate;
        const Vec shift11 = {1.0, 1.0};
        switch (kind) {
            case ScenarioKind::ic: break;
            case ScenarioKind::s1: s.ooc_mean = shift11; break;
            case ScenarioKind::s2: s.ooc_rate = 20.0; break;
            case ScenarioKind::s3: s.ooc_rate = 2.0; break;
            case ScenarioKind::s4:
                s.ooc_rate = 15.0;
                s.ooc_mean = shift11;
                break;
            case ScenarioKind::s5:
                s.ooc_rate = 5.0;
                s.ooc_mean = shift11;
                break;
            case ScenarioKind::fig1: s.horizon = horizon.value_or(100); break;
            case ScenarioKind::fig2:
                s.ooc_rate = 16.0;
                s.ooc_mean = {1.0, 0.5};
                if (change_time == 0) s.change_time = 6;
                s.horizon = horizon.value_or(s.change_time);
                break;
        }
        return s;
    }

    void validate() const {
        if (horizon < 1) throw InvalidArgument("ScenarioSpec: horizon must be >= 1");
        if (dim < 1) throw InvalidArgument("ScenarioSpec: dim must be >= 1");
        if (ic_mean.size() != dim || ooc_mean.size() != dim)
            throw InvalidArgument("ScenarioSpec: mean vectors must have dimension " + std::to_string(dim));
        if (!(ic_rate > 0.0) || !(ooc_rate > 0.0)) throw InvalidArgument("ScenarioSpec: rates must be positive");
        if (is_single_step_anomaly(kind)) {
            if (change_time < 2 || change_time > horizon)
                throw InvalidArgument("ScenarioSpec: change time must satisfy 2 <= t_c <= horizon");
        } else if (change_time != 0) {
            throw InvalidArgument("ScenarioSpec: change time is only meaningful for anomaly scenarios");
        }
    }

    GaussParams ic_gauss() const { return {ic_mean, SmallMatrix::identity(dim)}; }
    GaussParams ooc_gauss() const { return {ooc_mean, SmallMatrix::identity(dim)}; }
};

// Rate schedule of the adaptation sequence: 10 for t <= 50, linear ramp to
// 12 over t = 51..80, linear ramp down to 5 over t = 81..100, then 5.
inline double fig1_rate(std::int64_t t) {
    if (t <= 50) return 10.0;
    if (t <= 80) return 10.0 + 2.0 * static_cast<double>(t - 50) / 30.0;
    if (t <= 100) return 12.0 - 7.0 * static_cast<double>(t - 80) / 20.0;
    return 5.0;
}

inline std::vector<PointPattern> gen_batch(const ScenarioSpec& spec, RngStream& rng) {
    spec.validate();
    const MvnSampler ic(spec.ic_gauss());
    const MvnSampler ooc(spec.ooc_gauss());
    std::vector<PointPattern> out;
    out.reserve(static_cast<std::size_t>(spec.horizon));
    for (std::int64_t t = 1; t <= spec.horizon; ++t) {
        if (spec.kind == ScenarioKind::fig1)
            out.push_back(sample_pattern(t, fig1_rate(t), ic, rng));
        else if (is_single_step_anomaly(spec.kind) && t == spec.change_time)
            out.push_back(sample_pattern(t, spec.ooc_rate, ooc, rng));
        else
            out.push_back(sample_pattern(t, spec.ic_rate, ic, rng));
    }
    return out;
}

// Translates the points so the pattern's sample mean equals `target`.
inline void recenter(PointPattern& x, std::span<const double> target) {
    if (x.empty()) return;
    const Vec mean = x.mean();
    for (Vec& pt : x.points)
        for (std::size_t i = 0; i < pt.size(); ++i) pt[i] += target[i] - mean[i];
}

// Reference single instance of the combined shift: cardinalities and
// sample means of X_1..X_6.
inline constexpr std::array<std::size_t, 6> kFig2Cardinalities = {9, 7, 11, 10, 8, 16};
inline constexpr std::array<std::array<double, 2>, 6> kFig2Means = {
    {{0.21, 0.05}, {0.48, -0.18}, {-0.30, -0.15}, {0.54, 0.21}, {-0.26, -0.09}, {0.97, 0.50}}};

// Stream seed (batch 0) whose draw has exactly the reference cardinalities.
inline constexpr std::uint64_t kFig2ReplaySeed = 526989;

// Draws the instance from `seed` and translates each pattern onto the
// reference sample mean. Throws DataError if the cardinalities differ.
inline std::vector<PointPattern> fig2_replay(std::uint64_t seed = kFig2ReplaySeed) {
    RngStream rng = RngStream(seed).child(0);
    auto batch = gen_batch(ScenarioSpec::make(ScenarioKind::fig2), rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].size() != kFig2Cardinalities[i])
            throw DataError("fig2_replay: seed " + std::to_string(seed) + " does not reproduce the reference counts");
        recenter(batch[i], kFig2Means[i]);
    }
    return batch;
}

}  // namespace rfsad
