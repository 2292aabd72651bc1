#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "addsel/basis.hpp"
#include "addsel/population.hpp"
#include "addsel/rng.hpp"
#include "addsel/subsets.hpp"

using namespace addsel;

TEST(Basis, PointValues) {
    EXPECT_EQ(eval_basis(1, 0.37), 1.0);
    EXPECT_DOUBLE_EQ(eval_basis(2, 0.0), 1.4142135623730951);
    EXPECT_EQ(eval_basis(3, 0.0), 0.0);
    EXPECT_NEAR(eval_basis(5, 0.125), std::sqrt(2.0), 1e-15);
}

TEST(Basis, DomainErrors) {
    EXPECT_THROW(eval_basis(0, 0.5), DomainError);
    EXPECT_THROW(eval_basis(2, -0.01), DomainError);
    EXPECT_THROW(eval_basis(2, 1.01), DomainError);
}

TEST(Basis, Orthonormality) {
    const int N = 20000;
    for (int j = 1; j <= 7; ++j)
        for (int k = 1; k <= 7; ++k) {
            double acc = 0.0;
            for (int i = 0; i < N; ++i) {
                const double x = (i + 0.5) / N;
                acc += eval_basis(j, x) * eval_basis(k, x);
            }
            EXPECT_NEAR(acc / N, j == k ? 1.0 : 0.0, 1e-10) << j << "," << k;
        }
}

TEST(Basis, DesignBlockSingleRow) {
    const std::vector<double> x{0.0};
    const Matrix A = build_design_block(x, 3, false);
    ASSERT_EQ(A.rows(), 1);
    ASSERT_EQ(A.cols(), 3);
    EXPECT_DOUBLE_EQ(A(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(A(0, 1), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(A(0, 2), 0.0);
}

TEST(Basis, CenteredLevelOneHasNoColumns) {
    const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
    EXPECT_EQ(build_design_block(x, 1, true).cols(), 0);
    EXPECT_THROW(build_design_block(std::vector<double>{}, 3, true), DomainError);
}

TEST(Basis, EmpiricalCenteringRemovesColumnMeans) {
    std::vector<double> x;
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) x.push_back(u(rng));
    const Matrix A = build_design_block(x, 5, true, true);
    EXPECT_LT(A.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Basis, UniformGramConcentration) {
    Rng rng(2024);
    Matrix X = sample_design(DesignLaw::independent_uniform(), 4096, 1, rng);
    const DesignBlocks b = build_design(X, BasisSpec::uniform(1, 5, false));
    const Matrix D = b.A.transpose() * b.A - Matrix::Identity(5, 5);
    Eigen::SelfAdjointEigenSolver<Matrix> es(D);
    EXPECT_LT(es.eigenvalues().cwiseAbs().maxCoeff(), 0.15);
}

TEST(Basis, GramErrorHalvesWhenSampleQuadruples) {
    auto mean_err = [](int n) {
        double acc = 0.0;
        for (int r = 0; r < 40; ++r) {
            Rng rng(derive_seed(99, Stream::auxiliary, static_cast<std::uint64_t>(n * 100 + r)));
            const Matrix X = sample_design(DesignLaw::independent_uniform(), n, 2, rng);
            const DesignBlocks b = build_design(X, BasisSpec::uniform(2, 5));
            Eigen::SelfAdjointEigenSolver<Matrix> es(b.A.transpose() * b.A - Matrix::Identity(8, 8));
            acc += es.eigenvalues().cwiseAbs().maxCoeff();
        }
        return acc / 40;
    };
    const double ratio = mean_err(1600) / mean_err(400);
    EXPECT_GT(ratio, 0.5 * 0.7);
    EXPECT_LT(ratio, 0.5 * 1.3);
}

TEST(Basis, ColumnOrderingAndIntercept) {
    Matrix X(3, 2);
    X << 0.1, 0.7, 0.4, 0.2, 0.9, 0.5;
    BasisSpec spec = BasisSpec::uniform(2, 3);
    spec.intercept = true;
    const DesignBlocks b = build_design(X, spec);
    EXPECT_EQ(b.dims, (std::vector<int>{2, 2}));
    EXPECT_EQ(b.offset, (std::vector<int>{0, 2}));
    const Matrix A1 = b.columns({1});
    ASSERT_EQ(A1.cols(), 3);
    EXPECT_NEAR(A1(0, 0), eval_basis(2, 0.7) / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(A1(2, 1), eval_basis(3, 0.5) / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(A1(1, 2), 1.0 / std::sqrt(3.0), 1e-15);
    EXPECT_EQ(b.columns({1}, false).cols(), 2);
}

TEST(Population, UniformGramIsIdentity) {
    const BlockGram one = population_gram(BasisSpec::uniform(1, 9, false), DesignLaw::independent_uniform());
    EXPECT_LT((one.G - Matrix::Identity(9, 9)).cwiseAbs().maxCoeff(), 1e-10);
    const BlockGram bg = population_gram(BasisSpec::uniform(3, 7), DesignLaw::independent_uniform());
    EXPECT_LT((bg.G - Matrix::Identity(18, 18)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Population, UncenteredBlocksShareTheConstant) {
    const BlockGram bg = population_gram(BasisSpec::uniform(2, 3, false), DesignLaw::independent_uniform());
    EXPECT_NEAR(bg.G(0, 3), 1.0, 1e-12);
    EXPECT_NEAR(bg.G(1, 4), 0.0, 1e-12);
}

TEST(Population, LinearDensityEntry) {
    // p(x) = 2x, V spanned by phi_2: integral of 2x * 2cos^2(2 pi x) equals 1
    const DesignLaw law = DesignLaw::custom({DensityTable({0.0, 2.0})});
    const BlockGram bg = population_gram(BasisSpec::uniform(1, 2), law);
    ASSERT_EQ(bg.G.rows(), 1);
    const int N = 10000;
    double oracle = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x = (i + 0.5) / N;
        const double c = std::cos(2.0 * std::numbers::pi * x);
        oracle += 2.0 * x * 2.0 * c * c;
    }
    oracle /= N;
    EXPECT_NEAR(oracle, 1.0, 1e-8);
    EXPECT_NEAR(bg.G(0, 0), oracle, 1e-8);
}

TEST(Population, NonNormalizedDensityRejected) {
    EXPECT_THROW(DensityTable({1.0, 1.5}), ValidationError);
}

TEST(Population, IndependentBlocksAreDiagonal) {
    const DesignLaw law = DesignLaw::custom({DensityTable({0.5, 1.5}), DensityTable({1.2, 0.8})});
    const BlockGram bg = population_gram(BasisSpec::uniform(2, 4), law);
    EXPECT_LT(bg.sub({0}, {1}).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(bg.sub({0}).cwiseAbs().maxCoeff(), 0.5);
}

// Cross-block entries E[phi_a(U1) phi_b(U2)] of the Gaussian copula, frozen from an
// adaptive two-dimensional quadrature over the latent normal pair (tolerance 1e-12).
TEST(Population, CopulaCrossGramMatchesQuadratureOracle) {
    struct Entry {
        double r;
        int a, b;
        double value;
    };
    const Entry oracle[] = {
        {0.3, 2, 2, 0.05151218721538989}, {0.3, 3, 3, 0.13668187034060486}, {0.3, 2, 3, 0.0},
        {0.3, 4, 4, 0.0144411709978926},  {0.3, 2, 4, 0.026719935465150866}, {0.3, 5, 5, 0.04762896924120136},
        {0.6, 2, 2, 0.2341323054575799},  {0.6, 3, 3, 0.3297318837102002},  {0.6, 4, 4, 0.06142501648503933},
        {0.6, 2, 4, 0.10328149447554832}, {0.6, 5, 5, 0.10075849653785053},
    };
    for (const auto& e : oracle) {
        const BlockGram bg = population_gram(BasisSpec::uniform(2, 5), DesignLaw::gaussian_copula(e.r));
        EXPECT_NEAR(bg.G(e.a - 2, 4 + e.b - 2), e.value, 1e-11) << e.r << " " << e.a << " " << e.b;
        EXPECT_LT((bg.sub({0}) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Population, CopulaGramAgreesWithSampleGram) {
    const BasisSpec spec = BasisSpec::uniform(3, 3);
    const DesignLaw law = DesignLaw::gaussian_copula(0.5);
    Rng rng(77);
    const Matrix X = sample_design(law, 200000, 3, rng);
    const BlockGram emp = sample_gram(spec, X, {0, 1, 2});
    const BlockGram pop = population_gram(spec, law);
    EXPECT_LT((emp.G - pop.G).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Population, PermutingSubsetPermutesBlocks) {
    const BasisSpec spec = BasisSpec::uniform(3, 3);
    const DesignLaw law = DesignLaw::gaussian_copula(0.4);
    const BlockGram a = population_gram(spec, law, {0, 1, 2});
    const BlockGram b = population_gram(spec, law, {2, 0, 1});
    EXPECT_LT((a.sub({0}, {2}) - b.sub({1}, {0})).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((a.sub({1}, {2}) - b.sub({2}, {0})).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(b.covariates, (std::vector<int>{2, 0, 1}));
}

TEST(Population, SampleDesignMomentsAndRange) {
    Rng rng(5);
    const int n = 5000;
    const Matrix X = sample_design(DesignLaw::independent_uniform(), n, 4, rng);
    EXPECT_GE(X.minCoeff(), 0.0);
    EXPECT_LE(X.maxCoeff(), 1.0);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(X.col(j).mean(), 0.5, 4.0 / std::sqrt(12.0 * n));
    Rng one(6);
    const Matrix x1 = sample_design(DesignLaw::gaussian_copula(0.2), 1, 3, one);
    EXPECT_EQ(x1.rows(), 1);
    EXPECT_THROW(DesignLaw::gaussian_copula(1.0), ValidationError);
}

TEST(Population, CustomDensitySampling) {
    const DensityTable t({0.0, 2.0});
    EXPECT_NEAR(t.quantile(0.25), 0.5, 1e-12);
    Rng rng(8);
    const Matrix X = sample_design(DesignLaw::custom({t}), 20000, 1, rng);
    EXPECT_NEAR(X.col(0).mean(), 2.0 / 3.0, 0.01);
}

TEST(Subsets, OrderingAndCounts) {
    EXPECT_TRUE(parsimony_less({3}, {0, 1}));
    EXPECT_TRUE(parsimony_less({0, 2}, {1, 2}));
    EXPECT_FALSE(parsimony_less({1, 2}, {1, 2}));
    EXPECT_EQ(count_subsets_up_to(8, 2), 37u);
    EXPECT_EQ(binomial_saturating(100, 5), 75287520u);
    EXPECT_EQ(binomial_saturating(200, 100), std::numeric_limits<std::uint64_t>::max());
    EXPECT_THROW(check_budget(11, 10, "x", "y"), BudgetExceeded);
    std::vector<Subset> seen;
    for_each_subset_up_to(4, 2, [&](const Subset& s) {
        seen.push_back(s);
        return true;
    });
    ASSERT_EQ(seen.size(), 11u);
    EXPECT_TRUE(seen.front().empty());
    EXPECT_EQ(seen[1], Subset{0});
    EXPECT_EQ(seen.back(), (Subset{2, 3}));
    EXPECT_EQ(to_string(Subset{1, 4}), "{1,4}");
    EXPECT_EQ(set_union({0, 3}, {1, 3}), (Subset{0, 1, 3}));
    EXPECT_EQ(set_difference({0, 1, 3}, {1}), (Subset{0, 3}));
    EXPECT_EQ(complement({1}, 3), (Subset{0, 2}));
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
    EXPECT_EQ(derive_seed(1, Stream::design, 0), derive_seed(1, Stream::design, 0));
    std::set<std::uint64_t> seeds;
    for (std::uint64_t t = 0; t < 100; ++t)
        for (Stream s : {Stream::design, Stream::model, Stream::noise, Stream::bootstrap, Stream::auxiliary})
            seeds.insert(derive_seed(7, s, t));
    EXPECT_EQ(seeds.size(), 500u);
}
