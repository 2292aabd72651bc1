#pragma once

// Trigonometric function system on [0,1], the truncated spaces V_j and the
// scaled design blocks A_j = (phi_jk(X_j^i) / sqrt(n))_{i,k}.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addsel/error.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// phi_1 = 1, phi_{2k} = sqrt2 cos(2 pi k x), phi_{2k+1} = sqrt2 sin(2 pi k x). No argument checks.
inline double eval_basis_unchecked(int k, double x) {
    if (k == 1) return 1.0;
    const int freq = k / 2;
    const double arg = 2.0 * std::numbers::pi * freq * x;
    return (k % 2 == 0) ? std::numbers::sqrt2 * std::cos(arg) : std::numbers::sqrt2 * std::sin(arg);
}

inline double eval_basis(int k, double x) {
    if (k < 1) throw DomainError("eval_basis: index k must be >= 1, got " + std::to_string(k));
    if (!(x >= 0.0 && x <= 1.0))
        throw DomainError("eval_basis: x must lie in [0,1], got " + std::to_string(x));
    return eval_basis_unchecked(k, x);
}

/// Writes phi_1(x), ..., phi_m(x) into out[0..m-1] using the angle-addition recurrence.
inline void eval_basis_all(int m, double x, std::span<double> out) {
    if (m <= 0) return;
    out[0] = 1.0;
    const double theta = 2.0 * std::numbers::pi * x;
    const double c1 = std::cos(theta), s1 = std::sin(theta);
    double c = 1.0, s = 0.0;
    for (int k = 2; k <= m; k += 2) {
        const double cn = c * c1 - s * s1;
        const double sn = s * c1 + c * s1;
        c = cn;
        s = sn;
        // re-anchor periodically to keep the recurrence drift below 1e-13
        if ((k / 2) % 64 == 0) {
            c = std::cos(theta * (k / 2));
            s = std::sin(theta * (k / 2));
        }
        out[k - 1] = std::numbers::sqrt2 * c;
        if (k + 1 <= m) out[k] = std::numbers::sqrt2 * s;
    }
}

/// sum_k theta[k-1] * phi_k(x); theta indexed from phi_1.
inline double eval_series(std::span<const double> theta, double x) {
    const int m = static_cast<int>(theta.size());
    if (m == 0) return 0.0;
    double acc = theta[0];
    const double t = 2.0 * std::numbers::pi * x;
    const double c1 = std::cos(t), s1 = std::sin(t);
    double c = 1.0, s = 0.0;
    for (int k = 2; k <= m; k += 2) {
        const double cn = c * c1 - s * s1;
        const double sn = s * c1 + c * s1;
        c = cn;
        s = sn;
        if ((k / 2) % 64 == 0) {
            c = std::cos(t * (k / 2));
            s = std::sin(t * (k / 2));
        }
        acc += theta[k - 1] * std::numbers::sqrt2 * c;
        if (k + 1 <= m) acc += theta[k] * std::numbers::sqrt2 * s;
    }
    return acc;
}

/// Per-covariate truncation levels and centering convention.
struct BasisSpec {
    std::vector<int> m;          ///< m_j >= 1: V_j lives in span(phi_1..phi_{m_j})
    std::vector<bool> centered;  ///< centered V_j excludes phi_1
    bool empirical_centering = false;  ///< subtract sample column means from centered columns
    bool intercept = false;            ///< append a constant column to every candidate design

    static BasisSpec uniform(int q, int level, bool centered_all = true) {
        BasisSpec s;
        s.m.assign(static_cast<std::size_t>(q), level);
        s.centered.assign(static_cast<std::size_t>(q), centered_all);
        s.validate();
        return s;
    }

    int q() const { return static_cast<int>(m.size()); }

    /// First basis index used by covariate j (2 when centered, 1 otherwise).
    int first_index(int j) const { return centered[static_cast<std::size_t>(j)] ? 2 : 1; }

    int dim(int j) const {
        const int mj = m[static_cast<std::size_t>(j)];
        return centered[static_cast<std::size_t>(j)] ? mj - 1 : mj;
    }

    int d(const Subset& J) const {
        int total = 0;
        for (int j : J) total += dim(j);
        return total;
    }

    /// d_l = max over |J| = l of d_J: the sum of the l largest block dimensions.
    int d_l(int l) const {
        std::vector<int> dims;
        dims.reserve(m.size());
        for (int j = 0; j < q(); ++j) dims.push_back(dim(j));
        std::sort(dims.rbegin(), dims.rend());
        int total = 0;
        for (int i = 0; i < std::min<int>(l, static_cast<int>(dims.size())); ++i) total += dims[i];
        return total;
    }

    void validate() const {
        if (m.size() != centered.size())
            throw ValidationError("BasisSpec: m and centered must have the same length");
        for (std::size_t j = 0; j < m.size(); ++j)
            if (m[j] < 1)
                throw ValidationError("BasisSpec: m_j must be >= 1 (covariate " + std::to_string(j) + ")");
    }
};

/// Column block for one covariate: entries phi_k(x_i)/sqrt(n), k = first..m.
inline Matrix build_design_block(std::span<const double> xcol, int m, bool centered,
                                 bool empirical_centering = false) {
    const auto n = static_cast<Eigen::Index>(xcol.size());
    if (n == 0) throw DomainError("build_design_block: empty covariate column");
    if (m < 1) throw DomainError("build_design_block: m must be >= 1");
    const int first = centered ? 2 : 1;
    const int cols = m - first + 1;
    Matrix A(n, cols);
    if (cols == 0) return A;
    std::vector<double> buf(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = xcol[static_cast<std::size_t>(i)];
        if (!(x >= 0.0 && x <= 1.0)) throw DomainError("build_design_block: covariate value outside [0,1]");
        eval_basis_all(m, x, buf);
        for (int c = 0; c < cols; ++c) A(i, c) = buf[static_cast<std::size_t>(first - 1 + c)];
    }
    if (centered && empirical_centering) A.rowwise() -= A.colwise().mean();
    A /= std::sqrt(static_cast<double>(n));
    return A;
}

/// Column-concatenated blocks with fixed ordering (ascending covariate, then ascending frequency).
struct DesignBlocks {
    Matrix A;                  ///< n x sum_j dim_j
    std::vector<int> offset;   ///< first column of block j
    std::vector<int> dims;     ///< columns of block j
    Vector intercept;          ///< empty, or the constant column 1/sqrt(n)

    int n() const { return static_cast<int>(A.rows()); }
    int q() const { return static_cast<int>(dims.size()); }

    int d(const Subset& J) const {
        int total = 0;
        for (int j : J) total += dims[static_cast<std::size_t>(j)];
        return total;
    }

    /// A_J (plus the intercept column last, when present).
    Matrix columns(const Subset& J, bool with_intercept = true) const {
        const bool icpt = with_intercept && intercept.size() > 0;
        Matrix out(A.rows(), d(J) + (icpt ? 1 : 0));
        int c = 0;
        for (int j : J) {
            const int w = dims[static_cast<std::size_t>(j)];
            if (w > 0) out.middleCols(c, w) = A.middleCols(offset[static_cast<std::size_t>(j)], w);
            c += w;
        }
        if (icpt) out.col(c) = intercept;
        return out;
    }

    /// Blocks from an arbitrary n x (sum dims) matrix, e.g. a Gaussian measurement matrix.
    static DesignBlocks from_matrix(Matrix A, std::vector<int> dims) {
        DesignBlocks b;
        int off = 0;
        for (int w : dims) {
            b.offset.push_back(off);
            off += w;
        }
        if (off != A.cols()) throw ValidationError("DesignBlocks: block dimensions do not match matrix columns");
        b.A = std::move(A);
        b.dims = std::move(dims);
        return b;
    }
};

/// Builds all blocks A_1..A_q from an n x q matrix with entries in [0,1].
inline DesignBlocks build_design(const Matrix& X, const BasisSpec& spec) {
    spec.validate();
    if (X.cols() != spec.q())
        throw ValidationError("build_design: X has " + std::to_string(X.cols()) + " columns, spec has q=" +
                              std::to_string(spec.q()));
    const auto n = X.rows();
    std::vector<int> dims;
    for (int j = 0; j < spec.q(); ++j) dims.push_back(spec.dim(j));
    int total = 0;
    for (int w : dims) total += w;
    Matrix A(n, total);
    std::vector<double> col(static_cast<std::size_t>(n));
    int off = 0;
    for (int j = 0; j < spec.q(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = X(i, j);
        const Matrix Aj = build_design_block(col, spec.m[static_cast<std::size_t>(j)],
                                             spec.centered[static_cast<std::size_t>(j)], spec.empirical_centering);
        if (Aj.cols() > 0) A.middleCols(off, Aj.cols()) = Aj;
        off += static_cast<int>(Aj.cols());
    }
    DesignBlocks b = DesignBlocks::from_matrix(std::move(A), std::move(dims));
    if (spec.intercept) b.intercept = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    return b;
}

}  // namespace addsel
