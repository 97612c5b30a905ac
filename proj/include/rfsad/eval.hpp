#pragma once

// Monte-Carlo harness comparing the predictive-check detector (PC) with the
// ranking-function baseline (RF).
//
// Design: every batch is one in-control stream of length T. For each
// t in 2..T and each anomaly scenario, a contaminated pattern X'_t is
// drawn and tested against the detector state reached on the clean prefix
// X_1..X_{t-1} (paired design: the same prefix serves every scenario and
// every t). False positives are the alarms raised on the clean X_t.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "rfsad/detector.hpp"
#include "rfsad/random.hpp"
#include "rfsad/rfs_model.hpp"
#include "rfsad/simulate.hpp"

namespace rfsad {

// Empirical lower quantile of the in-control ranking score. An observation
// alarms when its score is strictly below `cutoff`.
struct RfThreshold {
    double level = 0.01;
    double cutoff = -std::numeric_limits<double>::infinity();
    std::size_t n_samples = 0;
    PoissonRfsParams params;

    bool alarms(double score) const noexcept { return score < cutoff; }
};

// level = 0 never alarms (cutoff -inf); level = 1 always alarms (+inf).
// Otherwise the cutoff is the (k+1)-th smallest score, k = ceil(level N),
// so exactly k calibration samples fall below it.
inline RfThreshold calibrate_rf_threshold(const PoissonRfsParams& params, double level, std::size_t n_samples,
                                          RngStream& rng) {
    if (!(level >= 0.0 && level <= 1.0)) throw InvalidArgument("calibrate_rf_threshold: level must lie in [0, 1]");
    if (n_samples == 0) throw InvalidArgument("calibrate_rf_threshold: need at least one sample");
    RfThreshold thr;
    thr.level = level;
    thr.n_samples = n_samples;
    thr.params = params;
    const RankingScorer score(params);
    const MvnSampler spatial(params.gauss);
    std::vector<double> scores(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) scores[i] = score(sample_pattern(1, params.rate, spatial, rng));

    const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n_samples)));
    if (k == 0) return thr;
    if (k >= n_samples) {
        thr.cutoff = std::numeric_limits<double>::infinity();
        return thr;
    }
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k), scores.end());
    thr.cutoff = scores[k];
    return thr;
}

// 2 tp / (2 tp + fp + fn); 0 when the denominator vanishes.
inline double f1_score(double tp, double fp, double fn) {
    const double den = 2.0 * tp + fp + fn;
    return den > 0.0 ? 2.0 * tp / den : 0.0;
}

struct MethodSpec {
    enum class Kind { pc, rf };
    Kind kind = Kind::pc;
    std::string prior_label;  // "J", "inf", or "true" for RF
    DetectorConfig config;    // PC only

    std::string method_name() const { return kind == Kind::pc ? "PC" : "RF"; }

    static MethodSpec pc(std::string prior_label, DetectorConfig cfg) {
        return {Kind::pc, std::move(prior_label), std::move(cfg)};
    }
    static MethodSpec rf() { return {Kind::rf, "true", {}}; }
};

// Jeffreys and informative priors crossed with alpha0 in {0.8, 0.9, 1},
// followed by RF.
inline std::vector<MethodSpec> default_grid(double alpha = 0.01) {
    std::vector<MethodSpec> grid;
    for (const char* label : {"J", "inf"}) {
        for (double a0 : {0.8, 0.9, 1.0}) {
            DetectorConfig cfg;
            cfg.alpha = alpha;
            cfg.alpha0 = DiscountFactor(a0);
            cfg.prior = std::string(label) == "J" ? PriorSpec::jeffreys() : PriorSpec::informative_bivariate();
            cfg.history_capacity = 0;
            grid.push_back(MethodSpec::pc(label, cfg));
        }
    }
    grid.push_back(MethodSpec::rf());
    return grid;
}

struct ExperimentOptions {
    std::size_t batches = 1000;
    std::int64_t horizon = 30;
    std::uint64_t seed = 1;
    std::vector<ScenarioKind> scenarios{kAnomalyScenarios.begin(), kAnomalyScenarios.end()};
    std::size_t rf_samples = 1'000'000;
    double rf_level = 0.01;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct F1Row {
    std::string method;
    std::string prior;
    std::optional<double> alpha0;
    ScenarioKind scenario = ScenarioKind::s1;
    std::int64_t t = 0;
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double f1 = 0.0;
};

struct F1Table {
    std::vector<F1Row> rows;

    const F1Row* find(std::string_view method, std::string_view prior, std::optional<double> alpha0,
                      ScenarioKind s, std::int64_t t) const {
        for (const F1Row& r : rows)
            if (r.method == method && r.prior == prior && r.alpha0 == alpha0 && r.scenario == s && r.t == t)
                return &r;
        return nullptr;
    }
};

inline constexpr std::string_view kF1CsvVersion = "1.0";

inline void write_f1_csv(std::ostream& os, const F1Table& table) {
    os << "# rfsad-f1 v" << kF1CsvVersion << '\n';
    os << "method,prior,alpha0,scenario,t,tp,fp,fn,f1\n";
    os.precision(17);
    for (const F1Row& r : table.rows) {
        os << r.method << ',' << r.prior << ',';
        if (r.alpha0) {
            // shortest round-trip form: 0.8 rather than 0.80000000000000004
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof buf, *r.alpha0);
            os.write(buf, res.ptr - buf);
        }
        os << ',' << to_string(r.scenario) << ',' << r.t << ',' << r.tp << ',' << r.fp << ',' << r.fn << ','
           << r.f1 << '\n';
    }
}

// Per-batch alarm indicators of a finished experiment. Layout is
// [method][slot][t][batch] with slot 0 = in-control, slot 1 + s = scenario s,
// so resampling weights run over the contiguous batch axis.
class ExperimentResult {
public:
    ExperimentResult(std::vector<MethodSpec> methods, std::vector<ScenarioKind> scenarios, std::size_t batches,
                     std::int64_t horizon)
        : methods_(std::move(methods)),
          scenarios_(std::move(scenarios)),
          batches_(batches),
          horizon_(horizon),
          alarms_(methods_.size() * (scenarios_.size() + 1) * static_cast<std::size_t>(horizon) * batches, 0) {}

    const std::vector<MethodSpec>& methods() const noexcept { return methods_; }
    const std::vector<ScenarioKind>& scenarios() const noexcept { return scenarios_; }
    std::size_t batches() const noexcept { return batches_; }
    std::int64_t horizon() const noexcept { return horizon_; }
    RfThreshold rf_threshold;

    // slot 0 = in-control; slot s + 1 = scenarios()[s]
    std::uint8_t& at(std::size_t m, std::size_t slot, std::int64_t t, std::size_t b) {
        return alarms_[offset(m, slot, t) + b];
    }
    std::uint8_t at(std::size_t m, std::size_t slot, std::int64_t t, std::size_t b) const {
        return alarms_[offset(m, slot, t) + b];
    }

    // Alarm rate over batches with optional resampling multiplicities.
    double rate(std::size_t m, std::size_t slot, std::int64_t t,
                const std::vector<std::uint32_t>* weights = nullptr) const {
        const std::uint8_t* a = &alarms_[offset(m, slot, t)];
        std::uint64_t hits = 0;
        if (weights) {
            for (std::size_t b = 0; b < batches_; ++b) hits += a[b] * (*weights)[b];
        } else {
            for (std::size_t b = 0; b < batches_; ++b) hits += a[b];
        }
        return static_cast<double>(hits) / static_cast<double>(batches_);
    }

    double f1(std::size_t m, std::size_t s, std::int64_t t,
              const std::vector<std::uint32_t>* weights = nullptr) const {
        const double tp = rate(m, s + 1, t, weights);
        return f1_score(tp, rate(m, 0, t, weights), 1.0 - tp);
    }

    F1Table table() const {
        F1Table out;
        for (std::size_t m = 0; m < methods_.size(); ++m) {
            const MethodSpec& spec = methods_[m];
            for (std::size_t s = 0; s < scenarios_.size(); ++s) {
                for (std::int64_t t = 2; t <= horizon_; ++t) {
                    F1Row row;
                    row.method = spec.method_name();
                    row.prior = spec.prior_label;
                    if (spec.kind == MethodSpec::Kind::pc) row.alpha0 = spec.config.alpha0.value();
                    row.scenario = scenarios_[s];
                    row.t = t;
                    row.tp = rate(m, s + 1, t);
                    row.fp = rate(m, 0, t);
                    row.fn = 1.0 - row.tp;
                    row.f1 = f1_score(row.tp, row.fp, row.fn);
                    out.rows.push_back(std::move(row));
                }
            }
        }
        return out;
    }

private:
    std::size_t offset(std::size_t m, std::size_t slot, std::int64_t t) const {
        const std::size_t slots = scenarios_.size() + 1;
        return ((m * slots + slot) * static_cast<std::size_t>(horizon_) + static_cast<std::size_t>(t - 1)) *
               batches_;
    }

    std::vector<MethodSpec> methods_;
    std::vector<ScenarioKind> scenarios_;
    std::size_t batches_;
    std::int64_t horizon_;
    std::vector<std::uint8_t> alarms_;
};

namespace detail {

// Stream-id namespaces for order-independent derivation.
inline constexpr std::uint64_t kStreamCalibration = 1;
inline constexpr std::uint64_t kStreamBatch = 2;
inline constexpr std::uint64_t kStreamContamination = 3;
inline constexpr std::uint64_t kStreamBootstrap = 4;

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

inline ExperimentResult run_f1_experiment(const std::vector<MethodSpec>& methods, const ExperimentOptions& opt) {
    if (opt.batches < 1) throw InvalidArgument("run_f1_experiment: batches must be >= 1");
    if (opt.horizon < 2) throw InvalidArgument("run_f1_experiment: horizon must be >= 2");
    ExperimentResult result(methods, opt.scenarios, opt.batches, opt.horizon);
    const RngStream root(opt.seed);

    const ScenarioSpec ic_spec = ScenarioSpec::make(ScenarioKind::ic, opt.horizon);
    std::optional<RankingScorer> rf_score;
    const bool has_rf = std::any_of(methods.begin(), methods.end(),
                                    [](const MethodSpec& m) { return m.kind == MethodSpec::Kind::rf; });
    if (has_rf) {
        // RF uses the true in-control parameters.
        const PoissonRfsParams truth{ic_spec.ic_rate, ic_spec.ic_gauss()};
        RngStream cal = root.child(detail::kStreamCalibration);
        result.rf_threshold = calibrate_rf_threshold(truth, opt.rf_level, opt.rf_samples, cal);
        rf_score.emplace(truth);
    }

    std::vector<ScenarioSpec> specs;
    std::vector<MvnSampler> ooc_spatial;
    for (ScenarioKind k : opt.scenarios) {
        specs.push_back(ScenarioSpec::make(k, opt.horizon, 2));
        ooc_spatial.emplace_back(specs.back().ooc_gauss());
    }

    detail::parallel_for(opt.batches, opt.threads, [&](std::size_t b) {
        RngStream batch_rng = root.child({detail::kStreamBatch, b});
        const std::vector<PointPattern> clean = gen_batch(ic_spec, batch_rng);

        // contaminated[s][t - 1]; index 0 unused
        std::vector<std::vector<PointPattern>> contaminated(specs.size());
        for (std::size_t s = 0; s < specs.size(); ++s) {
            contaminated[s].resize(static_cast<std::size_t>(opt.horizon));
            for (std::int64_t t = 2; t <= opt.horizon; ++t) {
                RngStream rng = root.child({detail::kStreamContamination, b, s, static_cast<std::uint64_t>(t)});
                contaminated[s][static_cast<std::size_t>(t - 1)] =
                    sample_pattern(t, specs[s].ooc_rate, ooc_spatial[s], rng);
            }
        }

        for (std::size_t m = 0; m < methods.size(); ++m) {
            if (methods[m].kind == MethodSpec::Kind::rf) {
                for (std::int64_t t = 2; t <= opt.horizon; ++t) {
                    const auto ti = static_cast<std::size_t>(t - 1);
                    result.at(m, 0, t, b) = result.rf_threshold.alarms((*rf_score)(clean[ti]));
                    for (std::size_t s = 0; s < specs.size(); ++s)
                        result.at(m, s + 1, t, b) = result.rf_threshold.alarms((*rf_score)(contaminated[s][ti]));
                }
                continue;
            }
            Detector det(methods[m].config);
            for (std::int64_t t = 1; t <= opt.horizon; ++t) {
                const auto ti = static_cast<std::size_t>(t - 1);
                if (t >= 2)
                    for (std::size_t s = 0; s < specs.size(); ++s)
                        result.at(m, s + 1, t, b) = det.evaluate(contaminated[s][ti]).alarm;
                const CheckResult r = det.observe(clean[ti]);
                if (t >= 2) result.at(m, 0, t, b) = r.alarm;
            }
        }
    });
    return result;
}

// Paired bootstrap over batches: each replicate resamples batch indices
// once and recomputes every F1(t) from the same multiplicities.
class BootstrapF1 {
public:
    BootstrapF1(const ExperimentResult& result, std::size_t replicates, std::uint64_t seed)
        : result_(result), reps_(replicates) {
        const std::size_t M = result.methods().size();
        const std::size_t S = result.scenarios().size();
        const auto T = static_cast<std::size_t>(result.horizon());
        f1_.assign(reps_ * M * S * T, 0.0);
        RngStream rng = RngStream(seed).child(detail::kStreamBootstrap);
        std::vector<std::uint32_t> w(result.batches());
        for (std::size_t r = 0; r < reps_; ++r) {
            std::fill(w.begin(), w.end(), 0);
            for (std::size_t i = 0; i < w.size(); ++i) ++w[rng() % w.size()];
            for (std::size_t m = 0; m < M; ++m)
                for (std::int64_t t = 2; t <= result.horizon(); ++t) {
                    const double fp = result.rate(m, 0, t, &w);
                    for (std::size_t s = 0; s < S; ++s) {
                        const double tp = result.rate(m, s + 1, t, &w);
                        f1_[index(r, m, s, t)] = f1_score(tp, fp, 1.0 - tp);
                    }
                }
        }
    }

    std::size_t replicates() const noexcept { return reps_; }

    struct Interval {
        double lower;
        double upper;
    };

    // Percentile interval of F1(a) - F1(b) at confidence `level`.
    Interval difference(std::size_t a, std::size_t b, std::size_t s, std::int64_t t, double level = 0.95) const {
        std::vector<double> diffs(reps_);
        for (std::size_t r = 0; r < reps_; ++r) diffs[r] = f1_[index(r, a, s, t)] - f1_[index(r, b, s, t)];
        std::sort(diffs.begin(), diffs.end());
        const double tail = 0.5 * (1.0 - level);
        auto pick = [&](double q) {
            const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(reps_ - 1) + 0.5));
            return diffs[std::min(i, reps_ - 1)];
        };
        return {pick(tail), pick(1.0 - tail)};
    }

private:
    std::size_t index(std::size_t r, std::size_t m, std::size_t s, std::int64_t t) const {
        const std::size_t M = result_.methods().size();
        const std::size_t S = result_.scenarios().size();
        const auto T = static_cast<std::size_t>(result_.horizon());
        return ((r * M + m) * S + s) * T + static_cast<std::size_t>(t - 1);
    }

    const ExperimentResult& result_;
    std::size_t reps_;
    std::vector<double> f1_;
};

// --- adaptation trace -----------------------------------------------------

struct Fig1Trace {
    std::vector<double> alphas;
    std::vector<double> rate;                // true lambda_t
    std::vector<std::size_t> cardinality;    // n_t
    std::vector<std::vector<double>> means;  // [alpha][t - 1] posterior mean c_t / d_t
};

// Posterior rate means under a Jeffreys start for each alpha0 on one draw
// of the smooth-rate sequence.
inline Fig1Trace run_fig1(RngStream& rng, std::vector<double> alphas = {0.8, 0.9, 1.0},
                          std::int64_t horizon = 100) {
    Fig1Trace tr;
    tr.alphas = std::move(alphas);
    const ScenarioSpec spec = ScenarioSpec::make(ScenarioKind::fig1, horizon);
    const auto batch = gen_batch(spec, rng);
    tr.means.assign(tr.alphas.size(), {});
    std::vector<GammaPosterior> post(tr.alphas.size(), init_prior(PriorSpec::jeffreys(), spec.dim).gamma);
    for (const PointPattern& x : batch) {
        tr.rate.push_back(fig1_rate(x.t));
        tr.cardinality.push_back(x.size());
        for (std::size_t a = 0; a < tr.alphas.size(); ++a) {
            post[a] = gamma_update(post[a], x.size(), DiscountFactor(tr.alphas[a]));
            tr.means[a].push_back(posterior_rate_mean(post[a]));
        }
    }
    return tr;
}

// Mean |posterior mean - lambda_t| over the 1-based inclusive windows.
inline double tracking_error(const Fig1Trace& tr, std::size_t alpha_index,
                             const std::vector<std::pair<std::int64_t, std::int64_t>>& windows) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto [lo, hi] : windows)
        for (std::int64_t t = lo; t <= hi; ++t) {
            const auto i = static_cast<std::size_t>(t - 1);
            sum += std::abs(tr.means[alpha_index][i] - tr.rate[i]);
            ++count;
        }
    return count ? sum / static_cast<double>(count) : 0.0;
}

// The ten steps that close each ramp of the smooth-rate sequence.
inline std::vector<std::pair<std::int64_t, std::int64_t>> fig1_change_windows() { return {{71, 80}, {91, 100}}; }

}  // namespace rfsad
