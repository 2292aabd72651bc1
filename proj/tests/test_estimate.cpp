#include <cmath>

#include <gtest/gtest.h>

#include "addsel/estimate.hpp"

using namespace addsel;

namespace {

Dataset noiseless_data(const AdditiveModel& m, int n, std::uint64_t seed) {
    const Matrix X = gen_design(DesignLaw::independent_uniform(), n, m.q, seed);
    return {X, gen_response(m, X, seed + 1)};
}

}  // namespace

TEST(DefaultMTarget, Values) {
    EXPECT_EQ(default_m_target(1000, 2.0), 4);
    EXPECT_EQ(default_m_target(32, 2.0), 2);
    EXPECT_EQ(default_m_target(33, 2.0), 3);
    EXPECT_EQ(default_m_target(1, 1.0), 2);
    EXPECT_EQ(default_m_target(1000, 1.0), 10);
}

TEST(EstimateComponent, NoiselessRecovery) {
    const AdditiveModel m = gen_model(5, 2, 2.0, 80.0, 1.0, 0.0, 3);
    const Dataset d = noiseless_data(m, 400, 10);
    const BasisSpec spec = BasisSpec::uniform(5, 5);
    for (int target : m.J0) {
        const ComponentEstimate est = estimate_component(d, spec, 2, 0.01, target, 5);
        EXPECT_EQ(est.selected, m.J0);
        EXPECT_EQ(est.n_half, 200);
        const auto th = est.theta();
        const auto& truth = m.coefficients(target);
        ASSERT_EQ(th.size(), 5u);
        for (std::size_t k = 0; k < th.size(); ++k) EXPECT_NEAR(th[k], k < truth.size() ? truth[k] : 0.0, 1e-8);
        EXPECT_LT(component_risk(m, est), 1e-15);
    }
}

TEST(EstimateComponent, SingleCovariateMatchesDirectLeastSquares) {
    AdditiveModel m = gen_model(1, 1, 2.0, 80.0, 1.0, 0.0, 4);
    m.sigma = 0.4;
    const Matrix X = gen_design(DesignLaw::independent_uniform(), 300, 1, 11);
    const Vector Y = gen_response(m, X, 12);
    EstimateOptions opt;
    opt.known_J0 = Subset{0};
    const ComponentEstimate est = estimate_component({X, Y}, BasisSpec::uniform(1, 3), 1, 0.16, 0, 7, opt);
    Matrix B(150, 6);
    for (int i = 0; i < 150; ++i)
        for (int k = 0; k < 6; ++k) B(i, k) = eval_basis(k + 2, X(150 + i, 0));
    const Vector direct = B.colPivHouseholderQr().solve(Y.tail(150));
    ASSERT_EQ(est.coefficients.size(), 6);
    EXPECT_LT((est.coefficients - direct).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EstimateComponent, SampleSplitting) {
    AdditiveModel m = gen_model(4, 2, 2.0, 80.0, 1.0, 0.0, 5);
    m.sigma = 0.5;
    const Matrix X = gen_design(DesignLaw::independent_uniform(), 200, 4, 13);
    const Vector Y = gen_response(m, X, 14);
    const BasisSpec spec = BasisSpec::uniform(4, 4);
    const int target = m.J0.front();
    const ComponentEstimate base = estimate_component({X, Y}, spec, 2, 0.25, target, 4);

    // second-half responses do not touch the selection
    Vector Y2 = Y;
    Y2.tail(100).setConstant(42.0);
    EXPECT_EQ(estimate_component({X, Y2}, spec, 2, 0.25, target, 4).selected, base.selected);

    // first-half data do not touch the fit once the selection is fixed
    EstimateOptions opt;
    opt.known_J0 = base.selected;
    Matrix X3 = X;
    Vector Y3 = Y;
    X3.topRows(100) = gen_design(DesignLaw::independent_uniform(), 100, 4, 99);
    Y3.head(100).setRandom();
    const ComponentEstimate moved = estimate_component({X3, Y3}, spec, 2, 0.25, target, 4, opt);
    EXPECT_EQ((moved.coefficients - base.coefficients).cwiseAbs().maxCoeff(), 0.0);
}

TEST(EstimateComponent, Errors) {
    const AdditiveModel m = gen_model(3, 1, 2.0, 80.0, 1.0, 0.0, 6);
    const Dataset odd = noiseless_data(m, 41, 1);
    const BasisSpec spec = BasisSpec::uniform(3, 3);
    EXPECT_THROW(estimate_component(odd, spec, 1, 0.1, 0, 3), ValidationError);
    const Dataset d = noiseless_data(m, 40, 1);
    EXPECT_THROW(estimate_component(d, spec, 1, 0.1, 3, 3), ValidationError);
    EXPECT_THROW(estimate_component(d, spec, 1, 0.1, 0, 0), ValidationError);
    // more columns than second-half rows
    EXPECT_THROW(estimate_component(d, spec, 1, 0.1, 0, 30), ValidationError);
}

TEST(ComponentRisk, ClosedFormsAndQuadrature) {
    const AdditiveModel m = gen_model(3, 1, 2.0, 80.0, 0.7, 0.0, 7);
    const int j = m.J0.front();
    ComponentEstimate est;
    est.target = j;
    est.m_target = 5;
    est.coefficients = Vector::Zero(4);
    EXPECT_NEAR(component_risk(m, est), 0.7, 1e-12);
    est.coefficients = Vector::Map(m.coefficients(j).data() + 1, 4);
    EXPECT_NEAR(component_risk(m, est), 0.0, 1e-24);
    est.coefficients = Vector::LinSpaced(4, -0.3, 0.4);
    const double closed = component_risk(m, est);
    // quadrature branch with a density table equal to the uniform one
    EXPECT_NEAR(component_risk(m, est, DesignLaw::custom({DensityTable({1.0, 1.0})})), closed, 1e-9);
    double direct = 0.0;
    const auto fhat = est.theta();
    for (int g = 0; g < 20000; ++g) {
        const double x = (g + 0.5) / 20000;
        const double diff = m.component(j, x) - eval_series(fhat, x);
        direct += diff * diff / 20000;
    }
    EXPECT_NEAR(closed, direct, 1e-9);
}

TEST(RateExperiment, DegenerateWhenExactlyRepresentable) {
    ExperimentConfig c;
    c.q = 3;
    c.s = 1;
    c.qstar = 1;
    c.sigma = 0.0;
    c.sigma2 = 0.01;
    c.m_rule = "fixed:5";
    c.m_target = 5;
    c.target = 0;
    const RateResult r = rate_experiment(c, {40, 80, 160, 320}, 10, 50);
    EXPECT_TRUE(r.degenerate);
    EXPECT_FALSE(r.slope.has_value());
    EXPECT_EQ(r.errors, 0);
}

TEST(RateExperiment, RiskFallsWithN) {
    ExperimentConfig c;
    c.q = 3;
    c.s = 1;
    c.qstar = 1;
    c.sigma = 1.0;
    c.m_rule = "fixed:5";
    c.m_target = 5;
    c.target = 2;
    c.seed = 9;
    const RateResult r = rate_experiment(c, {50, 100, 200, 400}, 20, 200);
    ASSERT_TRUE(r.slope.has_value());
    // parametric fit: risk ~ n^{-1}
    EXPECT_NEAR(*r.slope, -1.0, 0.25);
    EXPECT_LE(r.band_low, *r.slope);
    EXPECT_GE(r.band_high, *r.slope);
    EXPECT_NEAR(r.target_slope, -0.8, 1e-12);
    for (const auto& p : r.points) EXPECT_EQ(p.risks.size(), 20u);
}

TEST(RateExperiment, Errors) {
    ExperimentConfig c;
    c.q = 3;
    c.s = 1;
    c.qstar = 1;
    EXPECT_THROW(rate_experiment(c, {50, 100, 200}, 20), ValidationError);
    EXPECT_THROW(rate_experiment(c, {50, 100, 200, 400}, 9), ValidationError);
    c.s = 0;
    EXPECT_THROW(rate_experiment(c, {50, 100, 200, 400}, 20), ValidationError);
}
