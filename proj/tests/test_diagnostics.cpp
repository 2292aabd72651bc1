#include <cmath>

#include <gtest/gtest.h>

#include "addsel/diagnostics.hpp"
#include "addsel/simulate.hpp"

using namespace addsel;

namespace {

Matrix gaussian(int r, int c, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> z(0.0, scale);
    Matrix M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = z(rng);
    return M;
}

double naive_rip(const DesignBlocks& b, int qstar, const Subset& J0) {
    double best = 0.0;
    for_each_subset_up_to(b.q(), qstar, [&](const Subset& J) {
        const Matrix A = b.columns(set_union(J, J0), false);
        if (A.cols() == 0) return true;
        Eigen::SelfAdjointEigenSolver<Matrix> es(A.transpose() * A - Matrix::Identity(A.cols(), A.cols()));
        best = std::max(best, es.eigenvalues().cwiseAbs().maxCoeff());
        return true;
    });
    return best;
}

bool naive_event(const BlockGram& emp, const BlockGram& pop, int qstar, const Subset& J0, double delta) {
    bool ok = true;
    for_each_subset_up_to(emp.blocks(), qstar, [&](const Subset& J) {
        const Subset S = set_union(J, J0);
        if (emp.d(S) == 0) return true;
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(emp.sub(S), pop.sub(S));
        const Vector& ev = es.eigenvalues();
        if (ev.minCoeff() < 1.0 - delta || ev.maxCoeff() > 1.0 + delta) ok = false;
        return ok;
    });
    return ok;
}

double power_iteration_norm(const Matrix& M) {
    Vector v = Vector::Ones(M.cols()) / std::sqrt(static_cast<double>(M.cols()));
    v(0) += 0.3;
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
        const Vector w = M * (M * v);
        lambda = std::sqrt(w.norm());
        v = w / w.norm();
    }
    return lambda;
}

}  // namespace

TEST(Rip, OrthonormalColumnsGiveZero) {
    Rng rng(1);
    const Matrix Q = Eigen::HouseholderQR<Matrix>(gaussian(30, 12, rng)).householderQ() * Matrix::Identity(30, 12);
    const DesignBlocks b = DesignBlocks::from_matrix(Q, {3, 3, 2, 2, 2});
    EXPECT_NEAR(rip_constant(b, 3, {}), 0.0, 1e-12);
    EXPECT_NEAR(rip_constant(b, 2, {1}), 0.0, 1e-12);
}

TEST(Rip, SingleBlockMatchesPowerIteration) {
    Rng rng(2);
    const DesignBlocks b = DesignBlocks::from_matrix(gaussian(40, 5, rng, 1.0 / std::sqrt(40.0)), {5});
    const Matrix D = b.A.transpose() * b.A - Matrix::Identity(5, 5);
    EXPECT_NEAR(rip_constant(b, 1, {}), power_iteration_norm(D), 1e-8);
    EXPECT_NEAR(rip_constant(b, 0, {0}), power_iteration_norm(D), 1e-8);
}

TEST(Rip, MatchesNaiveEnumeration) {
    const std::vector<std::vector<int>> layouts = {{1, 1, 1, 1, 1, 1, 1}, {2, 1, 3, 1, 2, 2}, {4, 4, 4, 4}, {1, 0, 2, 1, 3}};
    int cases = 0;
    for (std::size_t li = 0; li < layouts.size(); ++li) {
        const auto& dims = layouts[li];
        int total = 0;
        for (int w : dims) total += w;
        for (int t = 0; t < 6; ++t) {
            Rng rng(100 * li + t);
            const int n = 12 + 6 * t;
            const DesignBlocks b = DesignBlocks::from_matrix(gaussian(n, total, rng, 1.0 / std::sqrt(double(n))), dims);
            const int q = static_cast<int>(dims.size());
            for (const Subset& J0 : {Subset{}, Subset{0}, Subset{1, q - 1}})
                for (int qs = 0; qs <= 3; ++qs) {
                    const auto r = rip_constant_detail(b, qs, J0);
                    EXPECT_NEAR(r.delta, naive_rip(b, qs, J0), 1e-10) << li << " " << t << " " << qs;
                    ++cases;
                }
        }
    }
    EXPECT_EQ(cases, 4 * 6 * 3 * 4);
}

TEST(Rip, ArgmaxAttainsValue) {
    Rng rng(3);
    const DesignBlocks b = DesignBlocks::from_matrix(gaussian(50, 10, rng, 1.0 / std::sqrt(50.0)), std::vector<int>(10, 1));
    const auto r = rip_constant_detail(b, 3, {});
    const Matrix A = b.columns(r.argmax, false);
    Eigen::SelfAdjointEigenSolver<Matrix> es(A.transpose() * A - Matrix::Identity(A.cols(), A.cols()));
    EXPECT_NEAR(es.eigenvalues().cwiseAbs().maxCoeff(), r.delta, 1e-12);
    EXPECT_LE(static_cast<int>(r.argmax.size()), 3);
}

TEST(Rip, BudgetExceeded) {
    Rng rng(4);
    const DesignBlocks b = DesignBlocks::from_matrix(gaussian(20, 40, rng), std::vector<int>(40, 1));
    EXPECT_THROW(rip_constant(b, 4, {}, 1000), BudgetExceeded);
}

TEST(EventE, SyntheticEqualGrams) {
    const BlockGram pop = population_gram(BasisSpec::uniform(4, 3), DesignLaw::gaussian_copula(0.4));
    for (double d : {1e-6, 0.1, 0.9}) EXPECT_TRUE(event_E_check(pop, pop, 2, {}, d));
    EXPECT_THROW(event_E_check(pop, pop, 2, {}, 0.0), ValidationError);
}

TEST(EventE, LargeSample) {
    const BasisSpec spec = BasisSpec::uniform(3, 3);
    const Matrix X = gen_design(DesignLaw::independent_uniform(), 100000, 3, 5);
    EXPECT_TRUE(event_E_check(Dataset{X, Vector::Zero(100000)}, spec, DesignLaw::independent_uniform(), 3, {}, 0.5));
}

TEST(EventE, MatchesNaiveGeneralizedEigenvalues) {
    const BasisSpec spec = BasisSpec::uniform(5, 3);
    int agree = 0, holds = 0;
    for (int t = 0; t < 30; ++t) {
        const double r = 0.1 * (t % 6);
        const DesignLaw law = DesignLaw::gaussian_copula(r);
        const BlockGram pop = population_gram(spec, law);
        const Matrix X = gen_design(law, 40 + 10 * t, 5, 500 + t);
        const BlockGram emp = sample_gram(spec, X, {0, 1, 2, 3, 4});
        const double delta = 0.3 + 0.02 * t;
        const Subset J0 = t % 3 == 0 ? Subset{} : Subset{t % 5};
        const bool fast = event_E_check(emp, pop, 2, J0, delta);
        EXPECT_EQ(fast, naive_event(emp, pop, 2, J0, delta)) << t;
        agree += fast == naive_event(emp, pop, 2, J0, delta);
        holds += fast;
    }
    EXPECT_EQ(agree, 30);
    EXPECT_GT(holds, 0);
    EXPECT_LT(holds, 30);
}

TEST(EventE, EquivalentToRipOnIndependentDesigns) {
    const BasisSpec spec = BasisSpec::uniform(6, 3);
    const DesignLaw U = DesignLaw::independent_uniform();
    int holds = 0;
    for (int t = 0; t < 100; ++t) {
        const Matrix X = gen_design(U, 60 + 4 * t, 6, 900 + t);
        const Dataset d{X, Vector::Zero(X.rows())};
        const Subset J0 = t % 2 ? Subset{1} : Subset{};
        const double rip = rip_constant(build_design(X, spec), 2, J0);
        const bool ev = event_E_check(d, spec, U, 2, J0, 0.5);
        EXPECT_EQ(ev, rip <= 0.5) << t << " " << rip;
        holds += ev;
    }
    EXPECT_GT(holds, 0);
    EXPECT_LT(holds, 100);
}

TEST(EventE, FailureFrequencyDecreasesWithN) {
    const BasisSpec spec = BasisSpec::uniform(4, 3);
    const DesignLaw U = DesignLaw::independent_uniform();
    const auto small = estimate_event_E_failure(spec, U, 50, 2, {}, 0.5, 40, 1);
    const auto large = estimate_event_E_failure(spec, U, 800, 2, {}, 0.5, 40, 1);
    EXPECT_GT(small.failure, large.failure);
    EXPECT_EQ(large.trials, 40);
}

TEST(EventA, NoTailMeansZeroResidual) {
    const AdditiveModel m = gen_model(4, 2, 2.0, 50.0, 1.0, 0.0, 7);
    const BasisSpec spec = BasisSpec::uniform(4, 5);
    const Matrix X = gen_design(DesignLaw::independent_uniform(), 200, 4, 8);
    EXPECT_LT(truncation_residual(X, m, spec, DesignLaw::independent_uniform()).cwiseAbs().maxCoeff(), 1e-12);
    GeometryReport g;
    g.kappa = kappa_values(m, DesignLaw::independent_uniform());
    EXPECT_TRUE(event_A_check(Dataset{X, Vector::Zero(200)}, m, spec, g, 0.001));
}

TEST(EventA, QuadratureResidualAgreesUnderUniformTable) {
    // custom density equal to the uniform one takes the quadrature branch
    const AdditiveModel m = gen_model(3, 2, 1.5, 400.0, 1.0, 0.2, 9, [] {
        ModelShape s;
        s.tail_start = 6;
        return s;
    }());
    const BasisSpec spec = BasisSpec::uniform(3, 5);
    const Matrix X = gen_design(DesignLaw::independent_uniform(), 100, 3, 10);
    const Vector a = truncation_residual(X, m, spec, DesignLaw::independent_uniform());
    const Vector b = truncation_residual(X, m, spec, DesignLaw::custom({DensityTable({1.0, 1.0})}));
    EXPECT_GT(a.norm(), 1e-3);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EventA, FrequencyDominatesClosedForm) {
    ModelShape shape;
    shape.tail_start = 6;
    const AdditiveModel m = gen_model(4, 2, 1.5, 400.0, 1.0, 0.0005, 15, shape);
    const BasisSpec spec = BasisSpec::uniform(4, 5);
    const DesignLaw U = DesignLaw::independent_uniform();
    GeometryReport g;
    g.kappa = kappa_values(m, U);
    for (int n : {20, 40, 80}) {
        int ok = 0;
        const int trials = 500;
        for (int t = 0; t < trials; ++t) {
            const Matrix X = gen_design(U, n, 4, derive_seed(3, Stream::design, static_cast<std::uint64_t>(t)));
            ok += event_A_check(Dataset{X, Vector::Zero(n)}, m, spec, g, 0.001);
        }
        const double bound = event_A_bound(n, spec.d_l(2));
        EXPECT_GE(static_cast<double>(ok) / trials, 1.0 - bound - 3.0 * std::sqrt(bound * (1 - bound) / trials)) << n;
    }
}

TEST(ChiSquare, ClosedForms) {
    for (int d : {1, 3, 20}) {
        const auto b = chi2_tail_bounds(d, 0.0);
        EXPECT_EQ(b.upper, 1.0);
        EXPECT_EQ(b.lower, 1.0);
    }
    EXPECT_DOUBLE_EQ(chi2_tail_bounds(2, 2.0).upper, 0.7788007830714049);
    EXPECT_DOUBLE_EQ(chi2_tail_bounds(2, 2.0).lower, std::exp(-0.5));
    EXPECT_THROW(chi2_tail_bounds(0, 1.0), DomainError);
    double prev_u = 2.0, prev_l = 2.0;
    for (double x = 0.0; x < 50.0; x += 0.5) {
        const auto b = chi2_tail_bounds(5, x);
        EXPECT_LE(b.upper, prev_u);
        EXPECT_LE(b.lower, prev_l);
        prev_u = b.upper;
        prev_l = b.lower;
    }
}

TEST(ChiSquare, MonteCarloDominance) {
    Rng rng(11);
    std::chi_squared_distribution<double> chi(5.0);
    const int N = 100000;
    std::vector<double> draws(N);
    for (double& v : draws) v = chi(rng) - 5.0;
    for (double x : {1.0, 2.0, 5.0, 10.0}) {
        const double freq = std::count_if(draws.begin(), draws.end(), [x](double v) { return v >= x; }) / double(N);
        const double se = std::sqrt(freq * (1.0 - freq) / N);
        EXPECT_LE(freq, chi2_tail_bounds(5, x).upper + 3.0 * se) << x;
    }
}

TEST(Bennett, ClosedFormAndDominance) {
    EXPECT_DOUBLE_EQ(bennett_truncation_bound(16, 1.0, 3.0), 0.1353352832366127);
    EXPECT_NEAR(bennett_truncation_bound(16, 1e-12, 3.0), 1.0, 1e-10);
    EXPECT_THROW(bennett_truncation_bound(16, 0.0, 3.0), DomainError);
    // residual g = a sqrt2 cos(2 pi u): ||g||^2 = a^2 = x, sup^2 = 2 a^2
    const double a2 = 0.3;
    for (int n : {2, 4, 8}) {
        Rng rng(12 + n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int exceed = 0;
        const int T = 10000;
        for (int t = 0; t < T; ++t) {
            double m = 0.0;
            for (int i = 0; i < n; ++i) {
                const double c = std::cos(2.0 * std::numbers::pi * u(rng));
                m += 2.0 * a2 * c * c;
            }
            exceed += m / n - a2 > a2;
        }
        const double freq = exceed / double(T);
        EXPECT_LE(freq, bennett_truncation_bound(n, a2, 2.0 * a2) + 3.0 * std::sqrt(freq * (1 - freq) / T)) << n;
    }
}

TEST(SubsetCount, ExactAndBound) {
    const auto a = subset_count_bound(8, 2);
    EXPECT_EQ(a.exact, 37);
    EXPECT_NEAR(a.bound.convert_to<double>(), 16.0 * std::exp(2.0), 1e-9);
    const auto full = subset_count_bound(30, 30);
    EXPECT_EQ(full.exact, BigInt(1) << 30);
    EXPECT_TRUE(full.holds());
    const auto big = subset_count_bound(10000, 50);
    EXPECT_TRUE(big.holds());
    EXPECT_GT(big.exact, BigInt(1) << 200);
    Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        const int q = std::uniform_int_distribution<int>(1, 400)(rng);
        const int qs = std::uniform_int_distribution<int>(1, q)(rng);
        EXPECT_TRUE(subset_count_bound(q, qs).holds()) << q << " " << qs;
    }
    EXPECT_THROW(subset_count_bound(3, 0), DomainError);
}

TEST(Cprime, ArithmeticAndMonotone) {
    EXPECT_TRUE(check_cprime(0.5, 0.001));
    EXPECT_FALSE(check_cprime(0.5, 0.01));
    for (double d = 0.05; d < 0.95; d += 0.05) {
        bool seen_false = false;
        for (double c = 1e-5; c < 0.5; c *= 1.2) {
            const bool ok = check_cprime(d, c);
            if (seen_false) {
                EXPECT_FALSE(ok) << d << " " << c;
            }
            seen_false = seen_false || !ok;
        }
    }
    EXPECT_DOUBLE_EQ(c_delta(0.5), 0.25 / 1.5);
}

namespace {

BoundParams reference_params() {
    BoundParams p;
    p.n = 500;
    p.sigma2 = 1.0;
    p.rho = 0.0;
    p.kappa_l = {0.5, 1.0};
    p.d_l = {5, 10};
    p.s = 2;
    p.qstar = 2;
    p.q = 20;
    p.delta = 0.5;
    p.cprime = 0.001;
    return p;
}

// Second, long-double implementation of the three-term bound.
long double reference_bound(const BoundParams& p) {
    const long double cd = (1.0L - p.delta) * (1.0L - p.delta) / (1.0L + p.delta);
    long double total = p.p_event_E_fail.value_or(0.0);
    if (!p.parametric) total += std::exp(-3.0L * p.n / (16.0L * p.d_l[p.qstar - 1]));
    auto binom = [](int n, int k) {
        long double r = 1.0L;
        for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    };
    for (int l = 1; l <= p.s; ++l)
        for (int m = 0; m <= p.qstar - (p.s - l); ++m) {
            const long double w = binom(p.s, l) * binom(p.q - p.s, m);
            const long double g = (1.0L - p.rho * p.rho) * p.kappa_l[l - 1];
            const long double dd = p.d_l[p.qstar - p.s + l - 1];
            const long double num = cd * cd * p.n * p.n * g * g;
            const long double den = 8.0L * p.sigma2 * p.sigma2 * dd + cd * p.sigma2 * p.n * g;
            total += w * (2.0L * std::exp(-num / (32.0L * den)) + std::exp(-cd * p.n * g / (1024.0L * p.sigma2)) +
                          std::exp(-cd * cd * p.n * g / (16384.0L * p.cprime * p.sigma2)));
        }
    return total;
}

}  // namespace

TEST(Bound, ReferenceValue) {
    const BoundParams p = reference_params();
    // frozen from a 40-digit evaluation of the same term structure
    EXPECT_NEAR(selection_error_bound(p), 423.81104512486989, 1e-12 * 423.8);
    EXPECT_NEAR(selection_error_bound(p), static_cast<double>(reference_bound(p)), 1e-12 * 423.8);
    BoundParams q = p;
    q.p_event_E_fail = 0.125;
    q.parametric = true;
    EXPECT_NEAR(selection_error_bound(q), static_cast<double>(reference_bound(q)), 1e-12 * 423.8);
    const BoundTerms t = selection_error_terms(q);
    EXPECT_EQ(t.event_E, 0.125);
    EXPECT_EQ(t.event_A, 0.0);
    EXPECT_NEAR(t.total, t.event_E + t.event_A + t.chi_square + t.gauss_signal + t.gauss_residual, 1e-12);
}

TEST(Bound, Monotonicity) {
    BoundParams p = reference_params();
    double prev = 1e300;
    for (int n = 100; n <= 1000000; n *= 2) {
        p.n = n;
        const double v = selection_error_bound(p);
        EXPECT_LE(v, prev);
        prev = v;
    }
    EXPECT_LT(prev, 1e-10);
    p = reference_params();
    for (double s2 : {0.5, 1.0, 2.0}) {
        BoundParams a = p, b = p;
        a.sigma2 = s2;
        b.sigma2 = 2.0 * s2;
        EXPECT_LE(selection_error_bound(a), selection_error_bound(b));
        BoundParams k = a;
        for (double& v : k.kappa_l) v *= 2.0;
        EXPECT_LE(selection_error_bound(k), selection_error_bound(a));
    }
}

TEST(Bound, AssumptionViolations) {
    BoundParams p = reference_params();
    p.rho = 1.0;
    EXPECT_THROW(selection_error_bound(p), AssumptionViolation);
    p = reference_params();
    p.kappa_l[0] = 0.0;
    EXPECT_THROW(selection_error_bound(p), AssumptionViolation);
}

namespace {

ConditionParams condition_params(int n) {
    ConditionParams c;
    c.n = n;
    c.q = 20;
    c.s = 2;
    c.qstar = 3;
    c.sigma2 = 1.0;
    c.kappa = 0.5;
    c.kappa1 = 0.5;
    c.kappa_l = {0.5, 0.9};
    c.d_l = {5, 10, 15};
    c.alpha = 2.0;
    return c;
}

}  // namespace

TEST(Conditions, SmallNFailsLargeNPasses) {
    const auto small = corollary_conditions(condition_params(10));
    for (const auto& [k, v] : small) EXPECT_FALSE(v) << k;
    const auto large = corollary_conditions(condition_params(100000));
    for (const auto& [k, v] : large) EXPECT_TRUE(v) << k;
    EXPECT_EQ(small.size(), 4u);
}

TEST(Conditions, StrongSignalLimit) {
    ConditionParams c = condition_params(100);
    c.kappa = c.kappa1 = 1e12;
    c.kappa_l = {1e12, 1e12};
    const auto t = corollary_terms(c);
    EXPECT_NEAR(t.at("general"), 15 * std::log(20.0), 1e-9);
    EXPECT_NEAR(t.at("per_level"), 10 * std::log(20.0), 1e-9);
    EXPECT_NEAR(t.at("qstar_equals_s"), 10 * std::log(20.0), 1e-9);
}

TEST(Conditions, GeneralImpliesPerLevel) {
    Rng rng(14);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int general_true = 0;
    for (int t = 0; t < 2000; ++t) {
        ConditionParams c;
        c.q = 5 + static_cast<int>(40 * u(rng));
        c.qstar = 1 + static_cast<int>(4 * u(rng));
        c.s = 1 + static_cast<int>(c.qstar * u(rng));
        c.n = 10 + static_cast<int>(5000 * u(rng));
        c.sigma2 = 0.1 + 2.0 * u(rng);
        c.rho_qstar = 0.8 * u(rng);
        c.rho_s = c.rho_qstar * u(rng);
        c.kappa = 0.05 + u(rng);
        c.kappa1 = c.kappa * (1.0 + u(rng));
        for (int l = 0; l < c.s; ++l) c.kappa_l.push_back(c.kappa * (1.0 + 3.0 * u(rng)));
        int d = 0;
        for (int l = 0; l < std::max(c.qstar, c.s); ++l) c.d_l.push_back(d += 1 + static_cast<int>(6 * u(rng)));
        c.c3 = 0.5 + u(rng);
        c.parametric = u(rng) < 0.5;
        const auto r = corollary_conditions(c);
        if (r.at("general")) {
            ++general_true;
            EXPECT_TRUE(r.at("per_level")) << t;
        }
    }
    EXPECT_GT(general_true, 100);
}
