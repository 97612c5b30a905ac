#pragma once

// Online detector for one stream of point patterns. The first pattern only
// seeds the posteriors; every later pattern is checked against the current
// posterior predictive before (optionally) being absorbed.
//
// A Detector is a single-owner value: it is not internally synchronized.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rfsad/posterior.hpp"
#include "rfsad/predictive.hpp"
#include "rfsad/rfs_model.hpp"

namespace rfsad {

enum class UpdatePolicy {
    skip_on_alarm,  // an alarmed pattern does not enter the posterior
    always_update
};

inline std::string_view to_string(UpdatePolicy p) {
    return p == UpdatePolicy::skip_on_alarm ? "skip_on_alarm" : "always_update";
}

inline std::string_view to_string(ScaleVariant v) {
    return v == ScaleVariant::derived ? "derived" : "literal";
}

struct DetectorConfig {
    DiscountFactor alpha0{1.0};
    double alpha = 0.01;  // false-alarm rate
    PriorSpec prior = PriorSpec::jeffreys();
    std::size_t dim = 2;
    ScaleVariant scale_variant = ScaleVariant::derived;
    UpdatePolicy update_policy = UpdatePolicy::skip_on_alarm;
    std::size_t history_capacity = 128;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("DetectorConfig: alpha must lie in (0, 1)");
        if (dim < 1) throw InvalidArgument("DetectorConfig: dim must be >= 1");
    }
};

inline constexpr std::string_view kSnapshotFormat = "rfsad-detector";
inline constexpr int kSnapshotMajorVersion = 1;

class Detector {
public:
    explicit Detector(DetectorConfig config) : config_(std::move(config)) {
        config_.validate();
        thresholds_ = FisherThresholds::for_alpha(config_.alpha);
        auto prior = init_prior(config_.prior, config_.dim);
        gamma_ = prior.gamma;
        niw_ = std::move(prior.niw);
    }

    const DetectorConfig& config() const noexcept { return config_; }
    std::int64_t t() const noexcept { return t_; }
    const GammaPosterior& gamma() const noexcept { return gamma_; }
    const NiwPosterior& niw() const noexcept { return niw_; }
    const FisherThresholds& thresholds() const noexcept { return thresholds_; }
    const std::deque<CheckResult>& history() const noexcept { return history_; }

    // Checks `x` against the current predictive without touching the state.
    // Before the first observation nothing can be tested.
    CheckResult evaluate(const PointPattern& x) const {
        check_dim(x);
        if (t_ == 0) return untested(x);
        // c = 0 (discount 0 after an empty pattern) puts all predictive mass on 0.
        const Probability pr_n = gamma_.c > 0.0 ? cardinality_pvalue(x.size(), NbPredictive::from_gamma(gamma_))
                                                : Probability(x.empty() ? 1.0 : 0.0);
        std::optional<Probability> pr_x;
        if (!x.empty()) pr_x = feature_pvalue(x.mean(), x.size(), niw_, config_.scale_variant);
        CheckResult r = fisher_combine(pr_n, pr_x, thresholds_);
        r.t = x.t;
        r.n = x.size();
        return r;
    }

    CheckResult observe(const PointPattern& x) {
        if (x.t != t_ + 1)
            throw DataError("Detector::observe: expected time index " + std::to_string(t_ + 1) + ", got " +
                            std::to_string(x.t));
        CheckResult r = evaluate(x);
        const bool skip = r.alarm && config_.update_policy == UpdatePolicy::skip_on_alarm;
        if (!skip) {
            gamma_ = gamma_update(gamma_, x.size(), config_.alpha0);
            niw_ = niw_update(std::move(niw_), x, config_.alpha0);
        }
        t_ = x.t;
        if (config_.history_capacity > 0) {
            if (history_.size() == config_.history_capacity) history_.pop_front();
            history_.push_back(r);
        }
        return r;
    }

    nlohmann::json snapshot() const;
    static Detector restore(const nlohmann::json& doc);

private:
    void check_dim(const PointPattern& x) const {
        if (x.dim != config_.dim)
            throw DataError("Detector: pattern dimension " + std::to_string(x.dim) + " does not match " +
                            std::to_string(config_.dim));
        x.validate();
    }

    static CheckResult untested(const PointPattern& x) {
        CheckResult r;
        r.t = x.t;
        r.n = x.size();
        return r;
    }

    DetectorConfig config_;
    FisherThresholds thresholds_;
    GammaPosterior gamma_;
    NiwPosterior niw_;
    std::int64_t t_ = 0;
    std::deque<CheckResult> history_;
};

// --- snapshot (de)serialization ------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const SmallMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.dim(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double finite_number(const nlohmann::json& j, std::string_view what) {
    if (!j.is_number()) throw DataError("snapshot: field '" + std::string(what) + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw DataError("snapshot: field '" + std::string(what) + "' is not finite");
    return v;
}

inline const nlohmann::json& field(const nlohmann::json& doc, std::string_view key) {
    const auto it = doc.find(std::string(key));
    if (it == doc.end()) throw DataError("snapshot: missing field '" + std::string(key) + "'");
    return *it;
}

inline double number_field(const nlohmann::json& doc, std::string_view key) {
    return finite_number(field(doc, key), key);
}

inline Vec vector_from_json(const nlohmann::json& j, std::size_t dim, std::string_view what) {
    if (!j.is_array() || j.size() != dim)
        throw DataError("snapshot: field '" + std::string(what) + "' must be an array of length " +
                        std::to_string(dim));
    Vec v;
    v.reserve(dim);
    for (const auto& e : j) v.push_back(finite_number(e, what));
    return v;
}

inline SmallMatrix matrix_from_json(const nlohmann::json& j, std::size_t dim, std::string_view what) {
    if (!j.is_array() || j.size() != dim)
        throw DataError("snapshot: field '" + std::string(what) + "' must be a " + std::to_string(dim) + "x" +
                        std::to_string(dim) + " array");
    SmallMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const Vec row = vector_from_json(j[i], dim, what);
        for (std::size_t k = 0; k < dim; ++k) m(i, k) = row[k];
    }
    return m;
}

inline nlohmann::json prior_to_json(const PriorSpec& p) {
    nlohmann::json j;
    if (p.kind == PriorKind::jeffreys) {
        j["kind"] = "jeffreys";
        if (p.jeffreys_nu0) j["nu0"] = *p.jeffreys_nu0;
        return j;
    }
    j["kind"] = "explicit";
    j["c0"] = p.c0;
    j["d0"] = p.d0;
    j["m0"] = p.m0;
    j["l0"] = p.l0;
    j["nu0"] = p.nu0;
    j["psi0"] = matrix_to_json(p.psi0);
    return j;
}

}  // namespace detail

// Reads {"kind": "jeffreys"[, "nu0": v]} or the explicit hyperparameters
// {c0, d0, m0, l0, nu0, psi0}; a document without "kind" is explicit.
inline PriorSpec prior_from_json(const nlohmann::json& j, std::size_t dim) {
    using namespace detail;
    if (!j.is_object()) throw DataError("prior: expected a JSON object");
    const std::string kind = j.value("kind", std::string("explicit"));
    if (kind == "jeffreys") {
        PriorSpec p = PriorSpec::jeffreys();
        if (j.contains("nu0")) p.jeffreys_nu0 = number_field(j, "nu0");
        return p;
    }
    if (kind != "explicit") throw DataError("prior: unknown kind '" + kind + "'");
    return PriorSpec::explicit_prior(number_field(j, "c0"), number_field(j, "d0"),
                                     vector_from_json(field(j, "m0"), dim, "m0"), number_field(j, "l0"),
                                     number_field(j, "nu0"), matrix_from_json(field(j, "psi0"), dim, "psi0"));
}

inline nlohmann::json Detector::snapshot() const {
    using detail::matrix_to_json;
    nlohmann::json doc;
    doc["format"] = kSnapshotFormat;
    doc["version"] = std::to_string(kSnapshotMajorVersion) + ".0";
    doc["dim"] = config_.dim;
    doc["t"] = t_;
    doc["alpha0"] = config_.alpha0.value();
    doc["c"] = gamma_.c;
    doc["d"] = gamma_.d;
    doc["m"] = niw_.m;
    doc["l"] = niw_.l;
    doc["nu"] = niw_.nu;
    doc["psi"] = matrix_to_json(niw_.psi);
    doc["W"] = niw_.W;
    doc["S"] = niw_.S;
    doc["Q"] = matrix_to_json(niw_.Q);
    doc["a_pow"] = niw_.a_pow;
    doc["niw_prior"] = {{"m0", niw_.m0}, {"l0", niw_.l0}, {"nu0", niw_.nu0}, {"psi0", matrix_to_json(niw_.psi0)}};
    doc["config"] = {{"alpha", config_.alpha},
                     {"scale_variant", to_string(config_.scale_variant)},
                     {"update_policy", to_string(config_.update_policy)},
                     {"history_capacity", config_.history_capacity},
                     {"prior", detail::prior_to_json(config_.prior)}};
    return doc;
}

inline Detector Detector::restore(const nlohmann::json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw DataError("snapshot: expected a JSON object");
    if (doc.value("format", std::string()) != kSnapshotFormat) throw DataError("snapshot: wrong or missing format tag");
    const std::string version = doc.value("version", std::string());
    if (version.substr(0, version.find('.')) != std::to_string(kSnapshotMajorVersion))
        throw DataError("snapshot: unsupported version '" + version + "'");

    const auto& dim_j = field(doc, "dim");
    if (!dim_j.is_number_unsigned() || dim_j.get<std::size_t>() < 1) throw DataError("snapshot: bad dim");
    const auto dim = dim_j.get<std::size_t>();
    const auto& t_j = field(doc, "t");
    if (!t_j.is_number_integer() || t_j.get<std::int64_t>() < 0) throw DataError("snapshot: bad t");

    const auto& cfg = field(doc, "config");
    DetectorConfig config;
    try {
        config.dim = dim;
        config.alpha0 = DiscountFactor(number_field(doc, "alpha0"));
        config.alpha = number_field(cfg, "alpha");
        const std::string scale = field(cfg, "scale_variant").get<std::string>();
        if (scale == "derived")
            config.scale_variant = ScaleVariant::derived;
        else if (scale == "literal")
            config.scale_variant = ScaleVariant::literal;
        else
            throw DataError("snapshot: unknown scale_variant '" + scale + "'");
        const std::string policy = field(cfg, "update_policy").get<std::string>();
        if (policy == "skip_on_alarm")
            config.update_policy = UpdatePolicy::skip_on_alarm;
        else if (policy == "always_update")
            config.update_policy = UpdatePolicy::always_update;
        else
            throw DataError("snapshot: unknown update_policy '" + policy + "'");
        config.history_capacity = field(cfg, "history_capacity").get<std::size_t>();
        config.prior = prior_from_json(field(cfg, "prior"), dim);
        config.validate();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("snapshot: malformed config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw DataError(std::string("snapshot: invalid config: ") + e.what());
    }

    Detector det(config);
    det.t_ = t_j.get<std::int64_t>();
    det.gamma_.c = number_field(doc, "c");
    det.gamma_.d = number_field(doc, "d");
    if (!(det.gamma_.c >= 0.0) || !(det.gamma_.d >= 0.0)) throw DataError("snapshot: invalid Gamma state");

    NiwPosterior& niw = det.niw_;
    const auto& prior = field(doc, "niw_prior");
    niw.dim = dim;
    niw.m0 = vector_from_json(field(prior, "m0"), dim, "m0");
    niw.l0 = number_field(prior, "l0");
    niw.nu0 = number_field(prior, "nu0");
    niw.psi0 = matrix_from_json(field(prior, "psi0"), dim, "psi0");
    niw.W = number_field(doc, "W");
    niw.S = vector_from_json(field(doc, "S"), dim, "S");
    niw.Q = matrix_from_json(field(doc, "Q"), dim, "Q");
    niw.a_pow = number_field(doc, "a_pow");
    niw.m = vector_from_json(field(doc, "m"), dim, "m");
    niw.l = number_field(doc, "l");
    niw.nu = number_field(doc, "nu");
    niw.psi = matrix_from_json(field(doc, "psi"), dim, "psi");
    if (!(niw.W >= 0.0) || !(niw.a_pow >= 0.0 && niw.a_pow <= 1.0) || !(niw.l >= 0.0))
        throw DataError("snapshot: invalid NIW statistics");
    if (!niw.psi.is_symmetric() || !niw.Q.is_symmetric()) throw DataError("snapshot: asymmetric scale matrix");
    return det;
}

}  // namespace rfsad
