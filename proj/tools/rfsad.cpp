// rfsad: simulate point-pattern streams, monitor them, and run the
// detector-vs-baseline evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfsad/detector.hpp"
#include "rfsad/eval.hpp"
#include "rfsad/io.hpp"
#include "rfsad/simulate.hpp"

namespace {

using namespace rfsad;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Output goes to a file or, for "-", stdout.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (path == "-") return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw DataError("cannot open " + path + " for writing");
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

json read_json_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip
    return std::string(buf, res.ptr);
}

PriorSpec parse_prior(const std::string& arg, std::size_t dim) {
    if (arg == "jeffreys") return PriorSpec::jeffreys();
    if (arg == "informative") {
        if (dim != 2) throw UsageError("--prior informative is defined for dim 2 only");
        return PriorSpec::informative_bivariate();
    }
    return prior_from_json(read_json_file(arg), dim);
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string scenario = "ic";
    std::uint64_t batches = 1;
    std::optional<std::int64_t> horizon;
    std::uint64_t seed = 1;
    std::optional<std::int64_t> change_time;
    bool replay = false;
    std::string out = "-";
};

int cmd_simulate(const SimulateArgs& a) {
    const auto kind = parse_scenario(a.scenario);
    if (!kind) throw UsageError("unknown scenario " + a.scenario);
    if (a.replay) {
        if (*kind != ScenarioKind::fig2 || a.batches != 1 || a.horizon || a.change_time)
            throw UsageError("--replay takes only --scenario fig2 and optionally --seed");
        Sink sink(a.out);
        write_observation_header(sink.os(), 2);
        for (const PointPattern& x : fig2_replay(a.seed)) write_observation(sink.os(), 0, x);
        return 0;
    }
    if (a.change_time && !is_single_step_anomaly(*kind))
        throw UsageError("--change-time only applies to anomaly scenarios (s1..s5, fig2)");
    std::int64_t tc = a.change_time.value_or(0);
    if (is_single_step_anomaly(*kind) && !a.change_time && *kind != ScenarioKind::fig2)
        throw UsageError("--change-time is required for scenario " + a.scenario);
    const ScenarioSpec spec = ScenarioSpec::make(*kind, a.horizon, tc);
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    Sink sink(a.out);
    write_observation_header(sink.os(), spec.dim);
    const RngStream root(a.seed);
    for (std::uint64_t b = 0; b < a.batches; ++b) {
        RngStream rng = root.child(b);
        for (const PointPattern& x : gen_batch(spec, rng)) write_observation(sink.os(), b, x);
    }
    return 0;
}

// --- monitor ----------------------------------------------------------------

struct MonitorArgs {
    std::string input;
    double alpha0 = 1.0;
    double alpha = 0.01;
    std::string prior = "jeffreys";
    std::string scale = "derived";
    std::string policy = "skip";
    std::string out = "-";
};

inline constexpr std::string_view kMonitorFormat = "rfsad-monitor";
inline constexpr std::string_view kMonitorVersion = "1.0";

int cmd_monitor(const MonitorArgs& a) {
    auto in = open_input(a.input);
    ObservationReader reader(in);

    DetectorConfig cfg;
    try {
        cfg.alpha0 = DiscountFactor(a.alpha0);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    cfg.alpha = a.alpha;
    cfg.dim = reader.dim();
    cfg.prior = parse_prior(a.prior, cfg.dim);
    cfg.scale_variant = a.scale == "literal" ? ScaleVariant::literal : ScaleVariant::derived;
    cfg.update_policy = a.policy == "always" ? UpdatePolicy::always_update : UpdatePolicy::skip_on_alarm;
    cfg.history_capacity = 0;
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    Sink sink(a.out);
    std::ostream& os = sink.os();
    write_csv_header(os, kMonitorFormat, kMonitorVersion);
    os << "batch,t,n,pr_n,pr_x,P,dof,threshold,alarm,c,d,l,nu\n";

    std::optional<Detector> det;
    std::uint64_t batch = 0;
    std::size_t alarms = 0, tested = 0, rows = 0;
    Observation ob;
    while (reader.next(ob)) {
        if (!det || ob.batch != batch) {
            det.emplace(cfg);
            batch = ob.batch;
        }
        if (ob.pattern.t != det->t() + 1)
            throw DataError("batch " + std::to_string(ob.batch) + ": expected t=" + std::to_string(det->t() + 1) +
                            ", got t=" + std::to_string(ob.pattern.t));
        const CheckResult r = det->observe(ob.pattern);
        ++rows;
        os << ob.batch << ',' << r.t << ',' << r.n << ',';
        if (r.tested) {
            ++tested;
            alarms += r.alarm;
            os << fmt(r.pr_n.value()) << ',' << (r.pr_x ? fmt(r.pr_x->value()) : "") << ',' << fmt(r.fisher_P)
               << ',' << r.dof << ',' << fmt(r.threshold) << ',' << (r.alarm ? "true" : "false");
        } else {
            os << ",,,,,";
        }
        const auto& g = det->gamma();
        const auto& n = det->niw();
        os << ',' << fmt(g.c) << ',' << fmt(g.d) << ',' << fmt(n.l) << ',' << fmt(n.nu) << '\n';
    }
    os << "# summary: rows=" << rows << " tested=" << tested << " alarms=" << alarms << '\n';
    return 0;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
    std::uint64_t batches = 1000;
    std::uint64_t seed = 1;
    std::string grid = "default";
    std::int64_t horizon = 30;
    std::uint64_t rf_samples = 1'000'000;
    unsigned threads = 0;
    std::string out = "-";
};

std::vector<MethodSpec> grid_from_json(const json& doc) {
    if (!doc.is_array() || doc.empty()) throw DataError("grid: expected a non-empty JSON array");
    std::vector<MethodSpec> grid;
    for (const auto& e : doc) {
        if (!e.is_object() || !e.contains("method")) throw DataError("grid: every entry needs a method");
        const auto method = e["method"].get<std::string>();
        if (method == "RF") {
            grid.push_back(MethodSpec::rf());
            continue;
        }
        if (method != "PC") throw DataError("grid: method must be PC or RF");
        DetectorConfig cfg;
        cfg.history_capacity = 0;
        cfg.alpha0 = DiscountFactor(e.value("alpha0", 1.0));
        cfg.alpha = e.value("alpha", 0.01);
        std::string label = "J";
        if (e.contains("prior")) {
            const auto& p = e["prior"];
            if (p.is_string() && p == "jeffreys") {
                cfg.prior = PriorSpec::jeffreys();
            } else if (p.is_string() && p == "informative") {
                cfg.prior = PriorSpec::informative_bivariate();
                label = "inf";
            } else {
                cfg.prior = prior_from_json(p, cfg.dim);
                label = "custom";
            }
        }
        label = e.value("label", label);
        if (e.value("scale", std::string("derived")) == "literal") cfg.scale_variant = ScaleVariant::literal;
        cfg.validate();
        grid.push_back(MethodSpec::pc(label, cfg));
    }
    return grid;
}

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.batches < 1) throw UsageError("--batches must be >= 1");
    if (a.horizon < 2) throw UsageError("--horizon must be >= 2");
    const auto grid = a.grid == "default" ? default_grid() : grid_from_json(read_json_file(a.grid));
    ExperimentOptions opt;
    opt.batches = a.batches;
    opt.seed = a.seed;
    opt.horizon = a.horizon;
    opt.rf_samples = a.rf_samples;
    opt.threads = a.threads;
    const auto result = run_f1_experiment(grid, opt);
    Sink sink(a.out);
    write_f1_csv(sink.os(), result.table());
    return 0;
}

// --- calibrate-rf -----------------------------------------------------------

struct CalibrateArgs {
    double lambda = 10.0;
    std::uint64_t samples = 1'000'000;
    double quantile = 0.01;
    std::uint64_t seed = 1;
    std::string out = "-";
};

int cmd_calibrate(const CalibrateArgs& a) {
    if (!(a.lambda > 0.0)) throw UsageError("--lambda must be positive");
    if (a.samples < 1) throw UsageError("--samples must be >= 1");
    if (!(a.quantile >= 0.0 && a.quantile <= 1.0)) throw UsageError("--quantile must lie in [0, 1]");
    const PoissonRfsParams params{a.lambda, GaussParams::standard(2)};
    RngStream rng(a.seed);
    const RfThreshold thr = calibrate_rf_threshold(params, a.quantile, a.samples, rng);
    json doc = {{"format", "rfsad-rf-threshold"},
                {"version", "1.0"},
                {"level", thr.level},
                {"n_samples", thr.n_samples},
                {"seed", a.seed},
                {"lambda", a.lambda},
                {"mu", params.gauss.mu},
                {"sigma", detail::matrix_to_json(params.gauss.sigma)}};
    if (std::isfinite(thr.cutoff)) {
        doc["cutoff"] = thr.cutoff;
    } else {
        doc["cutoff"] = nullptr;
        doc["cutoff_kind"] = thr.cutoff < 0 ? "never_alarm" : "always_alarm";
    }
    Sink sink(a.out);
    sink.os() << doc.dump(2) << '\n';
    return 0;
}

// --- fig1 -------------------------------------------------------------------

struct Fig1Args {
    std::uint64_t seed = 1;
    std::string out = "-";
};

int cmd_fig1(const Fig1Args& a) {
    RngStream rng(a.seed);
    const Fig1Trace tr = run_fig1(rng);
    Sink sink(a.out);
    std::ostream& os = sink.os();
    write_csv_header(os, "rfsad-fig1", "1.0");
    os << "t,lambda,n,alpha0,posterior_mean\n";
    for (std::size_t i = 0; i < tr.rate.size(); ++i)
        for (std::size_t k = 0; k < tr.alphas.size(); ++k)
            os << i + 1 << ',' << fmt(tr.rate[i]) << ',' << tr.cardinality[i] << ',' << fmt(tr.alphas[k]) << ','
               << fmt(tr.means[k][i]) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anomaly detection for streams of point patterns"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Generate observation streams as JSONL");
    auto* scenario_opt =
        s->add_option("--scenario", sim.scenario, "ic, s1..s5, fig1 or fig2 (fig2 with --replay)")->capture_default_str();
    s->add_option("--batches", sim.batches, "Number of independent streams")->capture_default_str();
    s->add_option("--horizon", sim.horizon, "Stream length T");
    auto* seed_opt = s->add_option("--seed", sim.seed)->capture_default_str();
    s->add_option("--change-time", sim.change_time, "Anomaly time for s1..s5 and fig2");
    s->add_flag("--replay", sim.replay, "Reference fig2 instance (seed defaults to the stored one)");
    s->add_option("--out", sim.out, "Output path, - for stdout")->capture_default_str();

    MonitorArgs mon;
    auto* m = app.add_subcommand("monitor", "Run the detector over a JSONL stream");
    m->add_option("--input", mon.input)->required();
    m->add_option("--alpha0", mon.alpha0, "Discount factor in [0, 1]")->capture_default_str();
    m->add_option("--alpha", mon.alpha, "False-alarm rate in (0, 1)")->capture_default_str();
    m->add_option("--prior", mon.prior, "jeffreys, informative or a JSON prior file")->capture_default_str();
    m->add_option("--scale", mon.scale, "Feature predictive scale")
        ->check(CLI::IsMember({"derived", "literal"}))
        ->capture_default_str();
    m->add_option("--update", mon.policy, "Posterior update after an alarm")
        ->check(CLI::IsMember({"skip", "always"}))
        ->capture_default_str();
    m->add_option("--out", mon.out)->capture_default_str();

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "F1(t) comparison of the detector grid against the baseline");
    e->add_option("--batches", ev.batches)->capture_default_str();
    e->add_option("--seed", ev.seed)->capture_default_str();
    e->add_option("--grid", ev.grid, "default or a JSON grid file")->capture_default_str();
    e->add_option("--horizon", ev.horizon)->capture_default_str();
    e->add_option("--rf-samples", ev.rf_samples, "Baseline calibration sample count")->capture_default_str();
    e->add_option("--threads", ev.threads, "0 uses every core")->capture_default_str();
    e->add_option("--out", ev.out)->capture_default_str();

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate-rf", "Calibrate the ranking-function cutoff");
    c->add_option("--lambda", cal.lambda)->capture_default_str();
    c->add_option("--samples", cal.samples)->capture_default_str();
    c->add_option("--quantile", cal.quantile)->capture_default_str();
    c->add_option("--seed", cal.seed)->capture_default_str();
    c->add_option("--out", cal.out)->capture_default_str();

    Fig1Args f1;
    auto* f = app.add_subcommand("fig1", "Posterior rate means on the smooth-rate sequence (plot data)");
    f->add_option("--seed", f1.seed)->capture_default_str();
    f->add_option("--out", f1.out)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 1;
    }

    if (sim.replay && seed_opt->count() == 0) sim.seed = kFig2ReplaySeed;
    if (sim.replay && scenario_opt->count() == 0) sim.scenario = "fig2";

    try {
        if (*s) return cmd_simulate(sim);
        if (*m) return cmd_monitor(mon);
        if (*e) return cmd_evaluate(ev);
        if (*c) return cmd_calibrate(cal);
        if (*f) return cmd_fig1(f1);
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const InvalidArgument& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    }
    return 1;
}
