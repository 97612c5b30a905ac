#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "oracles.hpp"
#include "rfsad/predictive.hpp"
#include "rfsad/random.hpp"

using namespace rfsad;

namespace {

NiwPosterior fixed_posterior(std::size_t dim, double l, double nu, SmallMatrix psi, Vec m) {
    PriorSpec spec = PriorSpec::explicit_prior(1.0, 1.0, std::move(m), l, nu, std::move(psi));
    return init_prior(spec, dim).niw;
}

}  // namespace

TEST(NbPmf, Examples) {
    EXPECT_NEAR(nb_pmf(0, NbPredictive{1.0, 0.5}).value(), 0.5, 1e-15);
    EXPECT_NEAR(nb_pmf(3, NbPredictive{1.0, 0.5}).value(), 0.0625, 1e-15);
}

TEST(NbPmf, AgreesWithBoost) {
    for (double r : {0.5, 3.0, 50.5, 400.0})
        for (double p : {0.1, 0.5, 5.0 / 6.0, 0.99})
            for (std::size_t k : {0, 1, 7, 30, 200}) {
                boost::math::negative_binomial_distribution<double> nb(r, p);
                const double ref = boost::math::pdf(nb, static_cast<double>(k));
                // conditioning: the log pmf is a difference of terms this large
                const double kd = static_cast<double>(k);
                const double scale = std::lgamma(r + kd) + std::abs(std::lgamma(r)) + std::lgamma(kd + 1.0) +
                                     std::abs(r * std::log(p)) + std::abs(kd * std::log1p(-p)) + 1.0;
                const double tol = 4e-16 * scale * ref + 1e-300;
                EXPECT_NEAR(nb_pmf(k, NbPredictive{r, p}).value(), ref, tol);
            }
}

TEST(NbPmf, MassUpToBoundIsOneMinusTail) {
    for (double r : {0.5, 10.5, 50.5})
        for (double p : {0.2, 5.0 / 6.0}) {
            const NbPredictive nb{r, p};
            const std::size_t K = static_cast<std::size_t>(std::ceil(nb.mean() + 40.0 * std::sqrt(nb.variance())));
            double sum = 0.0;
            for (std::size_t k = 0; k <= K; ++k) sum += nb_pmf(k, nb).value();
            EXPECT_LT(std::abs(1.0 - sum), 1e-12);
            EXPECT_LT(nb_upper_tail(K, nb), 1e-12);
        }
}

TEST(NbPmf, PoissonGammaMixtureMonteCarlo) {
    // n | lambda ~ Pois(lambda), lambda ~ Gamma(shape 50.5, rate 5) gives NB(50.5, 5/6).
    std::mt19937_64 rng(42);
    std::gamma_distribution<double> lam(50.5, 1.0 / 5.0);
    std::map<std::size_t, double> counts;
    const int draws = 1'000'000;
    for (int i = 0; i < draws; ++i) {
        std::poisson_distribution<std::size_t> pn(lam(rng));
        counts[pn(rng)] += 1.0;
    }
    const NbPredictive nb{50.5, 5.0 / 6.0};
    double tv = 0.0, covered = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        const double pk = nb_pmf(k, nb).value();
        covered += pk;
        tv += std::abs(counts[k] / draws - pk);
    }
    tv = 0.5 * (tv + (1.0 - covered));
    EXPECT_LT(tv, 0.01);
}

TEST(NbPredictiveTest, FromGamma) {
    const auto nb = NbPredictive::from_gamma(GammaPosterior{50.5, 5.0});
    EXPECT_EQ(nb.r, 50.5);
    EXPECT_DOUBLE_EQ(nb.p, 5.0 / 6.0);
    EXPECT_NEAR(nb.mean(), 10.1, 1e-12);
    EXPECT_THROW(NbPredictive::from_gamma(GammaPosterior{0.5, 0.0}), DomainError);
}

TEST(CardinalityPvalue, ModeGivesOne) {
    const NbPredictive nb{50.5, 5.0 / 6.0};
    // mode = floor((r - 1)(1 - p) / p) = floor(9.9) = 9
    EXPECT_NEAR(cardinality_pvalue(9, nb).value(), 1.0, 1e-12);
}

TEST(CardinalityPvalue, MatchesEnumeration) {
    const NbPredictive nb{50.5, 5.0 / 6.0};
    const double p16 = cardinality_pvalue(16, nb).value();
    double brute = 0.0;
    const double l16 = oracle::nb_log_pmf(16, nb.r, nb.p);
    for (int k = 0; k <= 200; ++k) {
        const double lk = oracle::nb_log_pmf(k, nb.r, nb.p);
        if (lk <= l16 + 1e-12 * std::abs(l16)) brute += std::exp(lk);
    }
    EXPECT_NEAR(p16, brute, 1e-13);
    EXPECT_LT(p16, cardinality_pvalue(15, nb).value());
    EXPECT_GT(p16, cardinality_pvalue(17, nb).value());
    EXPECT_LT(cardinality_pvalue(60, nb).value(), 1e-6);
}

TEST(CardinalityPvalue, GridAgainstOracle) {
    for (double r : {0.5, 1.5, 5.5, 10.5, 50.5})
        for (double p : {0.3, 0.5, 5.0 / 6.0, 0.95}) {
            const NbPredictive nb{r, p};
            for (std::size_t n = 0; n <= 100; ++n)
                EXPECT_NEAR(cardinality_pvalue(n, nb).value(), oracle::cardinality_pvalue(n, r, p), 2e-12)
                    << "r=" << r << " p=" << p << " n=" << n;
        }
}

TEST(CardinalityPvalue, TiesCountedInPvalue) {
    // r = 1 (geometric) has strictly decreasing pmf; r = 2, p = 1/2 has
    // pmf(0) = pmf(1) = 1/4, so both observations see the same p-value 1.
    const NbPredictive nb{2.0, 0.5};
    EXPECT_NEAR(cardinality_pvalue(0, nb).value(), 1.0, 1e-12);
    EXPECT_NEAR(cardinality_pvalue(1, nb).value(), 1.0, 1e-12);
    EXPECT_GT(cardinality_pvalue(40, nb).value(), 0.0);
}

TEST(CardinalityPvalue, ExcludedSetIsStrictlyMoreProbable) {
    const NbPredictive nb{10.5, 0.5};
    for (std::size_t n = 0; n < 60; ++n) {
        const double pn = nb_pmf(n, nb).value();
        double excluded = 0.0;
        for (std::size_t k = 0; k < 400; ++k) {
            const double pk = nb_pmf(k, nb).value();
            if (pk > pn * (1.0 + 1e-11)) excluded += pk;
        }
        EXPECT_NEAR(cardinality_pvalue(n, nb).value(), 1.0 - excluded, 1e-11);
    }
}

TEST(CardinalityPvalue, InvalidPredictive) {
    EXPECT_THROW(cardinality_pvalue(3, NbPredictive{0.0, 0.5}), DomainError);
    EXPECT_THROW(cardinality_pvalue(3, NbPredictive{1.0, 1.0}), DomainError);
}

TEST(FeaturePvalue, AtPredictiveMeanIsOne) {
    const auto post = fixed_posterior(2, 50.0, 48.0, SmallMatrix::identity(2, 49.0), Vec{0.2, -0.1});
    EXPECT_NEAR(feature_pvalue(Vec{0.2, -0.1}, 10, post)->value(), 1.0, 1e-15);
}

TEST(FeaturePvalue, UnivariateReductionMatchesStudentT) {
    // d = 1: T^2 = t^2 with t ~ t_{nu} scaled, so p = 2 (1 - F_t(|t|)).
    const double l = 12.0, nu = 9.0, psi = 7.5, m = 0.4;
    const auto post = fixed_posterior(1, l, nu, SmallMatrix::identity(1, psi), Vec{m});
    boost::math::students_t_distribution<double> st(nu);
    for (std::size_t n : {1u, 4u, 25u})
        for (double xbar : {-2.0, 0.0, 0.9, 3.5}) {
            const double scale = std::sqrt((1.0 / l + 1.0 / n) * psi / nu);
            const double t = (xbar - m) / scale;
            const double ref = 2.0 * boost::math::cdf(boost::math::complement(st, std::abs(t)));
            EXPECT_NEAR(feature_pvalue(Vec{xbar}, n, post)->value(), ref, 1e-12);
        }
}

TEST(FeaturePvalue, ScaleVariantsCoincideForSinglePoint) {
    const auto post = fixed_posterior(2, 7.0, 9.0, SmallMatrix::from_rows(2, std::vector<double>{5, 1, 1, 3}), Vec{0, 1});
    const Vec xbar{1.3, -0.7};
    EXPECT_NEAR(feature_pvalue(xbar, 1, post, ScaleVariant::derived)->value(),
                feature_pvalue(xbar, 1, post, ScaleVariant::literal)->value(), 1e-14);
    EXPECT_NE(feature_pvalue(xbar, 5, post, ScaleVariant::derived)->value(),
              feature_pvalue(xbar, 5, post, ScaleVariant::literal)->value());
}

TEST(FeaturePvalue, SkippedWhenPredictiveImproper) {
    auto jeff = init_prior(PriorSpec::jeffreys(), 2).niw;
    EXPECT_FALSE(feature_pvalue(Vec{0, 0}, 3, jeff).has_value());
    EXPECT_FALSE(feature_check_ready(jeff));
    const auto post = fixed_posterior(2, 50.0, 48.0, SmallMatrix::identity(2, 49.0), Vec{0, 0});
    EXPECT_FALSE(feature_pvalue(Vec{0, 0}, 0, post).has_value());
    // nu - d + 1 <= 0
    const auto low = fixed_posterior(2, 3.0, 1.0, SmallMatrix::identity(2), Vec{0, 0});
    EXPECT_FALSE(feature_pvalue(Vec{0, 0}, 3, low).has_value());
    // singular Psi
    const auto sing = fixed_posterior(2, 3.0, 8.0, SmallMatrix::from_rows(2, std::vector<double>{1, 1, 1, 1}), Vec{0, 0});
    EXPECT_FALSE(feature_pvalue(Vec{0, 0}, 3, sing).has_value());
}

TEST(FeaturePvalue, UniformUnderTheModel) {
    // Sigma ~ IW(nu, Psi), mu ~ N(m, Sigma / l), xbar ~ N(mu, Sigma / n).
    const double l = 50.0;
    const int nu = 48;
    const auto post = fixed_posterior(2, l, nu, SmallMatrix::identity(2, 49.0), Vec{0.0, 0.0});
    RngStream rng(2024);
    std::vector<double> ps;
    for (int i = 0; i < 10000; ++i) {
        // Wishart(nu, Psi^{-1}) with Psi^{-1} = I / 49, then invert.
        double w00 = 0, w01 = 0, w11 = 0;
        for (int k = 0; k < nu; ++k) {
            const double a = rng.normal() / 7.0, b = rng.normal() / 7.0;
            w00 += a * a;
            w01 += a * b;
            w11 += b * b;
        }
        const double det = w00 * w11 - w01 * w01;
        const SmallMatrix sigma = SmallMatrix::from_rows(2, std::vector<double>{w11 / det, -w01 / det, -w01 / det, w00 / det});
        const std::size_t n = 1 + static_cast<std::size_t>(i % 20);
        const double var_scale = 1.0 / l + 1.0 / static_cast<double>(n);
        const Vec xbar = sample_mvn(GaussParams{Vec{0.0, 0.0}, var_scale * sigma}, rng);
        ps.push_back(feature_pvalue(xbar, n, post)->value());
    }
    EXPECT_LT(oracle::ks_uniform(ps), 0.02);
}

TEST(FisherCombine, Examples) {
    const auto r1 = fisher_combine(Probability(1.0), Probability(1.0), 0.01);
    EXPECT_EQ(r1.fisher_P, 0.0);
    EXPECT_FALSE(std::signbit(r1.fisher_P));
    EXPECT_FALSE(r1.alarm);
    EXPECT_EQ(r1.dof, 4);

    const auto r2 = fisher_combine(Probability(0.01), Probability(0.01), 0.01);
    EXPECT_NEAR(r2.fisher_P, -2.0 * std::log(1e-4), 1e-12);
    EXPECT_NEAR(r2.threshold, oracle::chisq4_quantile(0.99), 1e-9);
    EXPECT_TRUE(r2.alarm);

    const auto r3 = fisher_combine(Probability(0.5), std::nullopt, 0.01);
    EXPECT_NEAR(r3.fisher_P, 2.0 * std::log(2.0), 1e-14);
    EXPECT_NEAR(r3.threshold, -2.0 * std::log(0.01), 1e-9);
    EXPECT_EQ(r3.dof, 2);
    EXPECT_FALSE(r3.alarm);
}

TEST(FisherCombine, FloorsZeroPvalues) {
    const auto r = fisher_combine(Probability(0.0), Probability(0.3), 0.01);
    EXPECT_TRUE(r.clamped);
    EXPECT_TRUE(std::isfinite(r.fisher_P));
    EXPECT_NEAR(r.fisher_P, -2.0 * (std::log(1e-300) + std::log(0.3)), 1e-9);
    EXPECT_TRUE(r.alarm);
}

TEST(FisherCombine, MonotoneInEachPvalue) {
    const auto th = FisherThresholds::for_alpha(0.05);
    double prev = -1.0;
    for (double p = 1.0; p > 1e-8; p *= 0.7) {
        const double P = fisher_combine(Probability(p), Probability(0.4), th).fisher_P;
        EXPECT_GE(P, prev);
        prev = P;
    }
}

TEST(FisherCombine, RejectsBadAlpha) {
    EXPECT_THROW(FisherThresholds::for_alpha(0.0), InvalidArgument);
    EXPECT_THROW(FisherThresholds::for_alpha(1.0), InvalidArgument);
}
