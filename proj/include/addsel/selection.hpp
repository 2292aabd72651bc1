#pragma once

// Penalized projection-norm selection: maximize ||P_J Y||_n^2 - sigma^2 d_J / n
// over |J| <= qstar, exhaustively or by forward stepwise search.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addsel/basis.hpp"
#include "addsel/error.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

inline constexpr double kRankTolerance = 1e-10;

struct Dataset {
    Matrix X;  ///< n x q, entries in [0,1]
    Vector Y;  ///< n

    int n() const { return static_cast<int>(X.rows()); }
    int q() const { return static_cast<int>(X.cols()); }

    void validate() const {
        if (X.rows() < 1) throw ValidationError("Dataset: n must be >= 1");
        if (Y.size() != X.rows()) throw ValidationError("Dataset: Y length does not match the rows of X");
        if (!X.allFinite() || !Y.allFinite()) throw ValidationError("Dataset: missing or non-finite entries");
        if (X.size() > 0 && (X.minCoeff() < 0.0 || X.maxCoeff() > 1.0))
            throw ValidationError("Dataset: covariates must lie in [0,1]");
    }

    Dataset rows(Eigen::Index start, Eigen::Index count) const {
        return {X.middleRows(start, count), Y.segment(start, count)};
    }
};

/// ||v||_n^2 = (1/n) sum v_i^2.
inline double empirical_norm_sq(const Vector& v) {
    return v.size() == 0 ? 0.0 : v.squaredNorm() / static_cast<double>(v.size());
}

/// Orthonormal basis of the column space of A (rank decided at 1e-10 times the largest column norm).
inline Matrix column_space_basis(const Matrix& A) {
    if (A.cols() == 0) return Matrix(A.rows(), 0);
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(kRankTolerance);
    const auto rank = qr.rank();
    Matrix Q = Matrix::Identity(A.rows(), rank);
    Q = qr.householderQ() * Q;
    return Q;
}

/// P Y where P projects onto the column space of A.
inline Vector project(const Matrix& A, const Vector& Y) {
    if (A.rows() != Y.size()) throw ValidationError("project: design has " + std::to_string(A.rows()) +
                                                    " rows but Y has length " + std::to_string(Y.size()));
    if (A.cols() == 0) return Vector::Zero(Y.size());
    const Matrix Q = column_space_basis(A);
    return Q * (Q.transpose() * Y);
}

/// ||P_J Y||_n^2 for the column space of A_J; 0 for an empty design.
inline double project_norm_sq(const Matrix& A, const Vector& Y) {
    if (A.rows() != Y.size()) throw ValidationError("project_norm_sq: design has " + std::to_string(A.rows()) +
                                                    " rows but Y has length " + std::to_string(Y.size()));
    if (A.cols() == 0) return 0.0;
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(kRankTolerance);
    const auto rank = qr.rank();
    Vector qty = Y;
    qty.applyOnTheLeft(qr.householderQ().transpose());
    return qty.head(rank).squaredNorm() / static_cast<double>(Y.size());
}

inline int projection_rank(const Matrix& A) {
    if (A.cols() == 0) return 0;
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(kRankTolerance);
    return static_cast<int>(qr.rank());
}

enum class SearchMode { exhaustive, greedy };

inline const char* to_string(SearchMode m) { return m == SearchMode::exhaustive ? "exhaustive" : "greedy"; }

struct CriterionValue {
    Subset J;
    double value;  ///< ||P_J Y||_n^2 - sigma^2 d_J / n
};

struct SelectionResult {
    Subset chosen;
    std::vector<CriterionValue> criterion;  ///< every evaluated subset, in evaluation order
    double sigma2 = 0.0;
    int qstar = 0;
    SearchMode search_mode = SearchMode::exhaustive;

    /// Criterion value of J if it was evaluated.
    std::optional<double> value_of(const Subset& J) const {
        for (const auto& c : criterion)
            if (c.J == J) return c.value;
        return std::nullopt;
    }
};

/// Associative argmax merge under (value desc, |J| asc, lexicographic asc).
inline bool better_candidate(const CriterionValue& a, const CriterionValue& b) {
    if (a.value != b.value) return a.value > b.value;
    return parsimony_less(a.J, b.J);
}

struct SelectionOptions {
    std::uint64_t budget = 1'000'000;
};

inline double criterion_value(const DesignBlocks& blocks, const Vector& Y, const Subset& J, double sigma2) {
    const double n = static_cast<double>(Y.size());
    return project_norm_sq(blocks.columns(J), Y) - sigma2 * blocks.d(J) / n;
}

inline SelectionResult select_exhaustive(const DesignBlocks& blocks, const Vector& Y, int qstar, double sigma2,
                                         const SelectionOptions& opt = {}) {
    if (blocks.n() != Y.size()) throw ValidationError("select_exhaustive: design and response lengths differ");
    if (qstar < 0) throw ValidationError("select_exhaustive: qstar must be >= 0");
    const auto count = count_subsets_up_to(blocks.q(), qstar);
    check_budget(count, opt.budget, "select_exhaustive", "use greedy search mode");
    SelectionResult res;
    res.sigma2 = sigma2;
    res.qstar = qstar;
    res.search_mode = SearchMode::exhaustive;
    res.criterion.reserve(static_cast<std::size_t>(count));
    CriterionValue best{{}, 0.0};
    bool have = false;
    for_each_subset_up_to(blocks.q(), qstar, [&](const Subset& J) {
        // with an intercept column the empty design still projects onto the constant
        const double v = J.empty() && blocks.intercept.size() == 0 ? 0.0 : criterion_value(blocks, Y, J, sigma2);
        CriterionValue cv{J, v};
        if (!have || better_candidate(cv, best)) {
            best = cv;
            have = true;
        }
        res.criterion.push_back(std::move(cv));
        return true;
    });
    res.chosen = best.J;
    return res;
}

inline SelectionResult select_exhaustive(const Dataset& data, const BasisSpec& spec, int qstar, double sigma2,
                                         const SelectionOptions& opt = {}) {
    data.validate();
    return select_exhaustive(build_design(data.X, spec), data.Y, qstar, sigma2, opt);
}

/// Forward stepwise surrogate: add the covariate with the largest criterion gain until none improves.
inline SelectionResult select_greedy(const DesignBlocks& blocks, const Vector& Y, int qstar, double sigma2) {
    if (blocks.n() != Y.size()) throw ValidationError("select_greedy: design and response lengths differ");
    SelectionResult res;
    res.sigma2 = sigma2;
    res.qstar = qstar;
    res.search_mode = SearchMode::greedy;
    Subset current;
    double current_value = blocks.intercept.size() == 0 ? 0.0 : criterion_value(blocks, Y, current, sigma2);
    res.criterion.push_back({current, current_value});
    while (static_cast<int>(current.size()) < qstar) {
        CriterionValue best{{}, 0.0};
        bool have = false;
        for (int j = 0; j < blocks.q(); ++j) {
            if (contains(current, j)) continue;
            Subset cand = set_union(current, Subset{j});
            CriterionValue cv{cand, criterion_value(blocks, Y, cand, sigma2)};
            if (!have || better_candidate(cv, best)) {
                best = cv;
                have = true;
            }
            res.criterion.push_back(std::move(cv));
        }
        if (!have || !(best.value > current_value)) break;
        current = best.J;
        current_value = best.value;
    }
    res.chosen = current;
    return res;
}

inline SelectionResult select_greedy(const Dataset& data, const BasisSpec& spec, int qstar, double sigma2) {
    data.validate();
    return select_greedy(build_design(data.X, spec), data.Y, qstar, sigma2);
}

/// ||P_J0 f||_n^2 - ||P_J f||_n^2 for function values f at the sample.
inline double empirical_projection_gap(const DesignBlocks& blocks, const Subset& J, const Subset& J0,
                                       const Vector& f_values) {
    return project_norm_sq(blocks.columns(J0), f_values) - project_norm_sq(blocks.columns(J), f_values);
}

inline double empirical_projection_gap(const Dataset& data, const BasisSpec& spec, const Subset& J, const Subset& J0,
                                       const Vector& f_values) {
    return empirical_projection_gap(build_design(data.X, spec), J, J0, f_values);
}

}  // namespace addsel
