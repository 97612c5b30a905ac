#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rfsad/detector.hpp"
#include "rfsad/simulate.hpp"

using namespace rfsad;

namespace {

std::vector<PointPattern> ic_stream(std::uint64_t seed, std::int64_t horizon = 30) {
    RngStream rng(seed);
    return gen_batch(ScenarioSpec::make(ScenarioKind::ic, horizon), rng);
}

PointPattern at(std::int64_t t, std::vector<Vec> pts) {
    PointPattern x;
    x.t = t;
    x.dim = 2;
    x.points = std::move(pts);
    return x;
}

DetectorConfig config(double alpha0 = 1.0, UpdatePolicy policy = UpdatePolicy::skip_on_alarm) {
    DetectorConfig c;
    c.alpha0 = DiscountFactor(alpha0);
    c.update_policy = policy;
    return c;
}

}  // namespace

TEST(Detector, FirstPatternOnlySeeds) {
    Detector det(config());
    const auto xs = ic_stream(1);
    const CheckResult r1 = det.observe(xs[0]);
    EXPECT_FALSE(r1.tested);
    EXPECT_FALSE(r1.alarm);
    EXPECT_EQ(det.t(), 1);
    EXPECT_DOUBLE_EQ(det.gamma().c, 0.5 + static_cast<double>(xs[0].size()));
    EXPECT_DOUBLE_EQ(det.gamma().d, 1.0);
    const CheckResult r2 = det.observe(xs[1]);
    EXPECT_TRUE(r2.tested);
    EXPECT_EQ(r2.dof, 4);
    EXPECT_EQ(r2.n, xs[1].size());
}

TEST(Detector, ReplayedExampleAlarmsOnlyAtChange) {
    Detector det(config());
    for (const PointPattern& x : fig2_replay()) {
        const CheckResult r = det.observe(x);
        EXPECT_EQ(r.alarm, x.t == 6) << "t=" << x.t << " P=" << r.fisher_P;
    }
}

TEST(Detector, EmptyPatternUsesCardinalityOnly) {
    Detector det(config());
    const auto xs = ic_stream(2, 5);
    for (int i = 0; i < 4; ++i) det.observe(xs[i]);
    const CheckResult r = det.observe(at(5, {}));
    EXPECT_TRUE(r.tested);
    EXPECT_FALSE(r.pr_x.has_value());
    EXPECT_EQ(r.dof, 2);
    EXPECT_DOUBLE_EQ(r.threshold, det.thresholds().dof2);
    // an empty pattern after ~10 points per step is far in the tail
    EXPECT_LT(r.pr_n.value(), 1e-3);
}

TEST(Detector, SkipOnAlarmKeepsPosterior) {
    Detector det(config());
    const auto xs = ic_stream(3, 10);
    for (int i = 0; i < 9; ++i) det.observe(xs[i]);
    const GammaPosterior g = det.gamma();
    const NiwPosterior n = det.niw();
    std::vector<Vec> far(40, Vec{6.0, 6.0});
    for (std::size_t j = 0; j < far.size(); ++j) far[j][0] += 0.01 * static_cast<double>(j);
    const CheckResult r = det.observe(at(10, far));
    ASSERT_TRUE(r.alarm);
    EXPECT_EQ(det.t(), 10);
    EXPECT_EQ(det.gamma(), g);
    EXPECT_EQ(det.niw(), n);
}

TEST(Detector, AlwaysUpdateMatchesDirectSums) {
    for (double alpha0 : {1.0, 0.9, 0.8}) {
        Detector det(config(alpha0, UpdatePolicy::always_update));
        RngStream rng(4);
        const auto xs = gen_batch(ScenarioSpec::make(ScenarioKind::s4, 30, 12), rng);
        for (const auto& x : xs) det.observe(x);
        const auto ref = oracle::direct_posterior(xs, alpha0, 0.5, 0.0, Vec(2, 0.0), 0.0, -2.0, SmallMatrix::zeros(2));
        EXPECT_NEAR(det.gamma().c, ref.c, 1e-10 * ref.c);
        EXPECT_NEAR(det.gamma().d, ref.d, 1e-10 * ref.d);
        EXPECT_NEAR(det.niw().l, ref.l, 1e-10 * ref.l);
        EXPECT_NEAR(det.niw().nu, ref.nu, 1e-10 * ref.l);
        for (std::size_t i = 0; i < 2; ++i) {
            EXPECT_NEAR(det.niw().m[i], ref.m[i], 1e-10);
            for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(det.niw().psi(i, j), ref.psi(i, j), 1e-9 * ref.psi(0, 0));
        }
    }
}

TEST(Detector, EvaluateDoesNotChangeState) {
    Detector det(config(0.9));
    const auto xs = ic_stream(5, 12);
    for (int i = 0; i < 11; ++i) det.observe(xs[i]);
    const nlohmann::json before = det.snapshot();
    const CheckResult e = det.evaluate(xs[11]);
    EXPECT_EQ(det.snapshot(), before);
    EXPECT_EQ(det.observe(xs[11]), e);
}

TEST(Detector, RejectsOutOfOrderAndWrongDimension) {
    Detector det(config());
    const auto xs = ic_stream(6, 3);
    EXPECT_THROW(det.observe(xs[1]), DataError);
    det.observe(xs[0]);
    EXPECT_THROW(det.observe(xs[0]), DataError);
    EXPECT_THROW(det.observe(xs[2]), DataError);
    PointPattern three;
    three.t = 2;
    three.dim = 3;
    three.points = {{0.0, 0.0, 0.0}};
    EXPECT_THROW(det.observe(three), DataError);
    EXPECT_EQ(det.t(), 1);
}

TEST(Detector, RejectsBadConfig) {
    DetectorConfig c;
    c.alpha = 0.0;
    EXPECT_THROW(Detector{c}, InvalidArgument);
    c.alpha = 1.0;
    EXPECT_THROW(Detector{c}, InvalidArgument);
    EXPECT_THROW(DiscountFactor(1.5), InvalidArgument);
    EXPECT_THROW(DiscountFactor(-0.1), InvalidArgument);
}

TEST(Detector, LargerAlphaAlarmsOnSuperset) {
    // With always_update both detectors share the same state, so only the
    // threshold differs.
    std::size_t strict = 0, loose = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        DetectorConfig a = config(0.9, UpdatePolicy::always_update), b = a;
        a.alpha = 0.01;
        b.alpha = 0.1;
        Detector da(a), db(b);
        RngStream rng(100 + s);
        for (const auto& x : gen_batch(ScenarioSpec::make(ScenarioKind::s5, 30, 15), rng)) {
            const bool ra = da.observe(x).alarm, rb = db.observe(x).alarm;
            if (ra) {
                EXPECT_TRUE(rb);
            }
            strict += ra;
            loose += rb;
        }
    }
    EXPECT_GT(loose, strict);
}

TEST(Detector, HistoryIsBounded) {
    DetectorConfig c = config();
    c.history_capacity = 5;
    Detector det(c);
    for (const auto& x : ic_stream(7, 12)) det.observe(x);
    ASSERT_EQ(det.history().size(), 5u);
    EXPECT_EQ(det.history().front().t, 8);
    EXPECT_EQ(det.history().back().t, 12);
    c.history_capacity = 0;
    Detector none(c);
    for (const auto& x : ic_stream(7, 3)) none.observe(x);
    EXPECT_TRUE(none.history().empty());
}

TEST(Detector, ZeroDiscountAfterEmptyPattern) {
    Detector det(config(0.0, UpdatePolicy::always_update));
    det.observe(at(1, {}));
    EXPECT_EQ(det.gamma().c, 0.0);
    EXPECT_EQ(det.gamma().d, 1.0);
    const CheckResult empty = det.evaluate(at(2, {}));
    EXPECT_DOUBLE_EQ(empty.pr_n.value(), 1.0);
    EXPECT_FALSE(empty.alarm);
    const CheckResult one = det.evaluate(at(2, {{0.0, 0.0}}));
    EXPECT_TRUE(one.alarm);
    EXPECT_TRUE(one.clamped);
    // the state stays restorable
    EXPECT_NO_THROW(Detector::restore(det.snapshot()));
}

TEST(Snapshot, RestoreContinuesIdentically) {
    for (double alpha0 : {1.0, 0.85}) {
        DetectorConfig c = config(alpha0);
        c.prior = PriorSpec::informative_bivariate();
        c.scale_variant = ScaleVariant::literal;
        Detector det(c);
        RngStream rng(8);
        const auto xs = gen_batch(ScenarioSpec::make(ScenarioKind::s1, 30, 14), rng);
        for (int i = 0; i < 10; ++i) det.observe(xs[i]);
        // through text, as a file would be
        Detector copy = Detector::restore(nlohmann::json::parse(det.snapshot().dump()));
        EXPECT_EQ(copy.snapshot(), det.snapshot());
        for (std::size_t i = 10; i < xs.size(); ++i) {
            const CheckResult a = det.observe(xs[i]);
            const CheckResult b = copy.observe(xs[i]);
            EXPECT_EQ(a, b) << "t=" << xs[i].t;
        }
        EXPECT_EQ(copy.gamma(), det.gamma());
        EXPECT_EQ(copy.niw(), det.niw());
    }
}

TEST(Snapshot, RoundTripBeforeFirstObservation) {
    Detector det(config());
    Detector copy = Detector::restore(det.snapshot());
    EXPECT_EQ(copy.t(), 0);
    const auto xs = ic_stream(9, 4);
    for (const auto& x : xs) EXPECT_EQ(det.observe(x), copy.observe(x));
}

TEST(Snapshot, RejectsCorruptDocuments) {
    Detector det(config(0.9));
    for (const auto& x : ic_stream(10, 5)) det.observe(x);
    const nlohmann::json good = det.snapshot();
    EXPECT_NO_THROW(Detector::restore(good));

    auto broken = [&](auto mutate) {
        nlohmann::json j = good;
        mutate(j);
        return j;
    };
    EXPECT_THROW(Detector::restore(nlohmann::json::array()), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["format"] = "other"; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["version"] = "2.0"; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j.erase("psi"); })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["c"] = "ten"; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["d"] = -1.0; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["t"] = -3; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["m"] = {0.0}; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["psi"][0][1] = 99.0; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["alpha0"] = 1.5; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["config"]["alpha"] = 0.0; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["config"]["update_policy"] = "never"; })), DataError);
    EXPECT_THROW(Detector::restore(broken([](auto& j) { j["config"]["prior"]["kind"] = "flat"; })), DataError);
    // minor versions are accepted
    EXPECT_NO_THROW(Detector::restore(broken([](auto& j) { j["version"] = "1.7"; })));
}

TEST(PriorJson, ReadsBothKinds) {
    const PriorSpec j = prior_from_json(nlohmann::json{{"kind", "jeffreys"}, {"nu0", -1.0}}, 2);
    EXPECT_EQ(j.kind, PriorKind::jeffreys);
    EXPECT_EQ(j.jeffreys_nu0, -1.0);
    const auto doc = nlohmann::json::parse(
        R"({"c0": 50.5, "d0": 5, "m0": [0, 0], "l0": 50, "nu0": 48, "psi0": [[49, 0], [0, 49]]})");
    const PriorSpec e = prior_from_json(doc, 2);
    EXPECT_EQ(e.kind, PriorKind::explicit_values);
    EXPECT_EQ(e.c0, 50.5);
    EXPECT_EQ(e.psi0(1, 1), 49.0);
    EXPECT_THROW(prior_from_json(doc, 3), DataError);
    EXPECT_THROW(prior_from_json(nlohmann::json{{"kind", "jeffreys"}, {"nu0", "x"}}, 2), DataError);
}
