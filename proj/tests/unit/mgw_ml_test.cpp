#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mgw/estimators.hpp"
#include "oracles.hpp"

using namespace mgw;

namespace {

MgwParams random_params(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {0.05 + 0.9 * u(gen), 0.4 + 3.0 * u(gen), 0.5 + 6.0 * u(gen), 0.5 + 2.0 * u(gen),
            1.0 + 10.0 * u(gen)};
}

std::array<double, 5> as_array(const MgwParams& q) { return {q.p, q.alpha, q.beta, q.k, q.lambda}; }

} // namespace

TEST(MgwScore, MatchesFiniteDifferences) {
    std::mt19937_64 gen(41);
    for (int t = 0; t < 100; ++t) {
        const auto truth = random_params(gen);
        const auto xs = sample_mgw(truth, 150, gen());
        const auto q = random_params(gen);
        const auto s = mgw_score(xs, q);
        for (int i = 0; i < 5; ++i) {
            const double fd = oracle::mgw_score_fd(xs, as_array(q), i);
            ASSERT_NEAR(s[i], fd, 1e-4 * std::fabs(fd) + 1e-8) << "trial " << t << " component " << i;
        }
    }
}

TEST(MgwScore, GammaCollapse) {
    const auto xs = sample_mgw(MgwParams::gamma(1.7, 2.0), 400, 2);
    const Fit g = fit_gamma_ml(xs);
    const MgwParams q{1.0, g.params.alpha, g.params.beta, 0.9, 3.0};
    const auto s = mgw_score(xs, q);
    const auto [ga, gb] = gamma_score(xs, q.alpha, q.beta);
    EXPECT_NEAR(s[1], ga, 1e-9 * xs.size());
    EXPECT_NEAR(s[2], gb, 1e-9 * xs.size());
    EXPECT_NEAR(s[1], 0.0, 1e-6 * xs.size());
    EXPECT_NEAR(s[2], 0.0, 1e-6 * xs.size());
    EXPECT_EQ(s[3], 0.0);
    EXPECT_EQ(s[4], 0.0);
}

TEST(MgwInner, LikelihoodNeverDecreases) {
    std::mt19937_64 gen(42);
    for (int t = 0; t < 100; ++t) {
        const auto xs = sample_mgw(random_params(gen), 200, gen());
        std::vector<double> trace;
        mgw_em_inner(xs, random_params(gen), {}, &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) {
            ASSERT_GE(trace[i] - trace[i - 1], -1e-9) << t << " " << i;
        }
    }
}

TEST(MgwInner, StopsWithSmallScores) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.3, 9.0}, 500, 3);
    const auto r = mgw_em_inner(xs, {0.5, 0.8, 2.0, 1.3, 5.0});
    ASSERT_TRUE(r.converged);
    const auto s = mgw_score(xs, r.params);
    EXPECT_LT(std::fabs(s[0]), 1e-3);
    EXPECT_LT(std::fabs(s[2]), 1e-3);
    EXPECT_LT(std::fabs(s[4]), 1e-3);
    EXPECT_EQ(r.params.alpha, 0.8);
    EXPECT_EQ(r.params.k, 1.3);
}

TEST(MgwInner, ReducesToMixedExponentialEm) {
    const auto xs = sample_mgw(MgwParams::mixed_exponential(0.3, 2.0, 9.0), 300, 4);
    const auto cur = MgwParams::mixed_exponential(0.4, 1.5, 6.0);
    const auto me = mixed_exponential_em_step(xs, cur);
    const auto pass = detail::mgw_pass(detail::WeightedSample::from(xs), cur);
    EXPECT_NEAR(pass.next.p, me.next.p, 1e-13);
    EXPECT_NEAR(pass.next.beta, me.next.beta, 1e-12);
    EXPECT_NEAR(pass.next.lambda, me.next.lambda, 1e-12);
}

TEST(MgwPass, HessianMatchesFiniteDifferences) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.3, 9.0}, 300, 5);
    const MgwParams q{0.45, 0.9, 2.5, 1.2, 8.0};
    const auto d = detail::mgw_pass(detail::WeightedSample::from(xs), q);
    auto score_at = [&](double a, double k) { return mgw_score(xs, {q.p, a, q.beta, k, q.lambda}); };
    const double h = 1e-5;
    const double haa = (score_at(q.alpha + h, q.k)[1] - score_at(q.alpha - h, q.k)[1]) / (2 * h);
    const double hkk = (score_at(q.alpha, q.k + h)[3] - score_at(q.alpha, q.k - h)[3]) / (2 * h);
    const double hak = (score_at(q.alpha, q.k + h)[1] - score_at(q.alpha, q.k - h)[1]) / (2 * h);
    EXPECT_NEAR(d.h_aa, haa, 1e-5 * std::fabs(haa));
    EXPECT_NEAR(d.h_kk, hkk, 1e-5 * std::fabs(hkk));
    EXPECT_NEAR(d.h_ak, hak, 1e-5 * std::fabs(hak) + 1e-6);
}

TEST(StepFactor, QuadraticExample) {
    EXPECT_DOUBLE_EQ(adaptive_step_factor({-1.0, -1.0}, {{{-1.0, 0.0}, {0.0, -1.0}}}, 0.01, 1e-12), 0.01);
}

TEST(StepFactor, NeverExceedsOneAndFallsBack) {
    std::mt19937_64 gen(43);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double f = adaptive_step_factor({z(gen), z(gen)}, {{{z(gen), z(gen)}, {z(gen), z(gen)}}},
                                              std::exp(3 * z(gen)), 1e-12);
        ASSERT_GT(f, 0.0);
        ASSERT_LE(f, 1.0);
    }
    EXPECT_EQ(adaptive_step_factor({1.0, 1.0}, {{{0.0, 0.0}, {0.0, 0.0}}}, 0.01, 1e-12), 1.0);
    EXPECT_EQ(adaptive_step_factor({1.0, 0.0}, {{{1e-14, 0.0}, {0.0, 0.0}}}, 0.01, 1e-12), 1.0);
    EXPECT_EQ(adaptive_step_factor({0.0, 0.0}, {{{-1.0, 0.0}, {0.0, -1.0}}}, 0.01, 1e-12), 1.0);
}

TEST(GradientStep, MovesAlongScore) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.3, 9.0}, 400, 6);
    const auto inner = mgw_em_inner(xs, {0.5, 1.2, 2.0, 0.9, 6.0});
    const auto st = mgw_gradient_step(xs, inner.params);
    const auto s = mgw_score(xs, inner.params);
    EXPECT_DOUBLE_EQ(st.gradient[0], s[1]);
    EXPECT_DOUBLE_EQ(st.gradient[1], s[3]);
    const double f = st.factor * std::pow(0.5, st.halvings);
    EXPECT_NEAR(st.alpha, inner.params.alpha + f * s[1], 1e-12);
    EXPECT_NEAR(st.k, inner.params.k + f * s[3], 1e-12);
    EXPECT_GT(st.alpha, 0.0);
    EXPECT_GT(st.k, 0.0);
}

TEST(GradientStep, HalvesUntilInsideDomain) {
    // A shape far below its optimum with a huge gradient would step negative.
    const auto xs = sample_mgw({0.5, 3.0, 1.0, 3.0, 5.0}, 400, 7);
    MlConfig cfg;
    cfg.eps0 = 1e6;
    const auto st = mgw_gradient_step(xs, {0.5, 20.0, 1.0, 20.0, 5.0}, cfg);
    EXPECT_GT(st.alpha, 0.0);
    EXPECT_GT(st.k, 0.0);
}

TEST(InitialSets, TwelveOrTen) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.0, 9.0}, 400, 8);
    auto prior = compute_prior_fits(xs);
    ASSERT_TRUE(prior.mixture.has_value());
    ASSERT_NE(prior.mixed_exponential.degeneracy, Degeneracy::A_MixedExpToExp);
    const auto starts = mgw_initial_sets(xs, prior);
    ASSERT_EQ(starts.size(), 12u);
    EXPECT_EQ(starts[2].p, 0.5);
    EXPECT_EQ(starts[2].alpha, prior.gamma.params.alpha);
    EXPECT_EQ(starts[2].beta, prior.gamma.params.beta);
    EXPECT_EQ(starts[2].k, prior.weibull.params.k);
    EXPECT_EQ(starts[2].lambda, prior.weibull.params.lambda);
    EXPECT_EQ(starts[1].p, 1.0 - starts[0].p);
    EXPECT_EQ(starts[1].beta, starts[0].lambda);
    EXPECT_EQ(starts[3], prior.mixture->params);

    prior.mixed_exponential.degeneracy = Degeneracy::A_MixedExpToExp;
    EXPECT_EQ(mgw_initial_sets(xs, prior).size(), 10u);
    prior.mixture.reset();
    EXPECT_EQ(mgw_initial_sets(xs, prior).size(), 9u);
}

TEST(InitialSets, SkewnessStartsMatchTheMean) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.0, 9.0}, 400, 9);
    const auto starts = mgw_initial_sets(xs, compute_prior_fits(xs));
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    for (std::size_t i = starts.size() - 8; i < starts.size(); ++i) {
        const auto& q = starts[i];
        EXPECT_EQ(q.p, 0.5);
        EXPECT_NEAR(q.alpha * q.beta, mean, 1e-12 * mean);
        EXPECT_NEAR(q.lambda * std::tgamma(1 + 1 / q.k), mean, 1e-10 * mean);
    }
    EXPECT_NEAR(weibull_skewness(weibull_shape_for_skewness(1.5)), 1.5, 1e-9);
}

TEST(MgwMl, ConvergedAndAtLeastAsGoodAsNestedFits) {
    const auto xs = sample_mgw({0.4847, 0.6513, 5.3140, 1.3761, 9.5088}, 300, 2);
    const auto prior = compute_prior_fits(xs);
    const Fit f = fit_mgw_ml(xs, prior);
    const auto s = mgw_score(xs, f.params);
    for (int i = 1; i < 5; ++i) EXPECT_LT(std::fabs(s[i]), 1e-3) << i;
    EXPECT_TRUE(std::fabs(s[0]) < 1e-3 || p_score_waived(f.params.p, s[0], 1e-4));
    EXPECT_GE(f.log_lik, prior.gamma.log_lik - 1e-6);
    EXPECT_GE(f.log_lik, prior.weibull.log_lik - 1e-6);
    EXPECT_GE(f.log_lik, prior.mixed_exponential.log_lik - 1e-6);
    EXPECT_NE(classify_pdf_shape(f.params), PdfShape::Other);
}

TEST(MgwMl, ReportPicksBestConvergedStart) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.3, 9.0}, 250, 10);
    const auto report = mgw_ml_report(xs, compute_prior_fits(xs));
    ASSERT_TRUE(report.winner.has_value());
    for (const auto& o : report.starts) {
        if (o.status == StartStatus::Converged) {
            EXPECT_LE(o.log_lik, report.starts[*report.winner].log_lik);
        }
    }
}

TEST(MgwMl, Deterministic) {
    const auto xs = sample_mgw({0.4, 0.8, 3.0, 1.3, 9.0}, 200, 11);
    const auto prior = compute_prior_fits(xs);
    const Fit a = fit_mgw_ml(xs, prior);
    const Fit b = fit_mgw_ml(xs, prior);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.log_lik, b.log_lik);
}

TEST(MgwMl, TimeLimitStopsEveryStart) {
    const auto xs = sample_mgw({0.48, 0.65, 5.3, 1.38, 9.5}, 2000, 21);
    MlConfig cfg;
    cfg.time_limit = 1e-6;
    const auto report = mgw_ml_report(xs, compute_prior_fits(xs), cfg);
    ASSERT_FALSE(report.starts.empty());
    for (const auto& s : report.starts) EXPECT_EQ(s.status, StartStatus::TimedOut);
    EXPECT_FALSE(report.winner);
    EXPECT_THROW(fit_mgw_ml(xs, compute_prior_fits(xs), cfg), EstimationError);
    cfg.time_limit = -1.0;
    EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(MgwMl, PruneRule) {
    MlConfig cfg;
    EXPECT_TRUE(detail::should_prune({0.5, 30.0, 0.01, 1.0, 5.0}, cfg));
    EXPECT_FALSE(detail::should_prune({0.5, 30.0, 1.0, 1.0, 5.0}, cfg));
    EXPECT_TRUE(detail::should_prune({0.5, 1.0, 1.0, 30.0, 0.05}, cfg));
    EXPECT_FALSE(detail::should_prune({0.5, 20.0, 0.01, 1.0, 5.0}, cfg));
}

TEST(MgwMl, PScoreWaiver) {
    EXPECT_TRUE(p_score_waived(1.0 - 1e-5, 3.0, 1e-4));
    EXPECT_FALSE(p_score_waived(1.0 - 1e-5, -3.0, 1e-4));
    EXPECT_TRUE(p_score_waived(1e-5, -3.0, 1e-4));
    EXPECT_FALSE(p_score_waived(0.5, 3.0, 1e-4));
}
