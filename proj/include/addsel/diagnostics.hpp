#pragma once

// Concentration events, RIP-type constants and the closed-form probability
// bounds attached to the selection criterion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <Eigen/Dense>

#include "addsel/basis.hpp"
#include "addsel/error.hpp"
#include "addsel/geometry.hpp"
#include "addsel/model.hpp"
#include "addsel/population.hpp"
#include "addsel/rng.hpp"
#include "addsel/selection.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

namespace detail {

/// Result of scanning the maximal sets J0 u R, |R| = K, for pencil violations.
struct PencilScan {
    double value = 0.0;   ///< largest exact deviation found above the starting threshold
    Subset argmax;        ///< covariates attaining `value` (empty when nothing exceeded)
    bool exceeded = false;
    std::uint64_t sets = 0;
};

/// Cholesky test for strict positive definiteness.
inline bool positive_definite(const Matrix& M) {
    if (M.rows() == 0) return true;
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) return false;
    return llt.matrixLLT().diagonal().minCoeff() > 0.0;
}

/// Scans every set T = J0 u R with R drawn from the remaining blocks, |R| = K, and checks
/// (1+t) P_T - E_T > 0 and E_T - (1-t) P_T > 0 on principal submatrices. Interlacing makes the
/// maximal sets sufficient. A failing set is re-evaluated exactly as max |lambda - 1| over the
/// pencil (E_T, P_T). With `grow` the threshold rises to every exceeding value (an exact max
/// search); otherwise the scan stops at the first exact violation.
class PencilScanner {
public:
    PencilScanner(const Matrix& E, const Matrix& P, bool p_identity, std::vector<int> dims, const Subset& J0)
        : dims_(std::move(dims)), p_identity_(p_identity) {
        const int q = static_cast<int>(dims_.size());
        std::vector<int> off(static_cast<std::size_t>(q));
        int acc = 0;
        for (int j = 0; j < q; ++j) {
            off[static_cast<std::size_t>(j)] = acc;
            acc += dims_[static_cast<std::size_t>(j)];
        }
        for (int j : J0) {
            if (j < 0 || j >= q) throw ValidationError("J0 index out of range");
        }
        J0_ = J0;
        for (int j = 0; j < q; ++j)
            if (!contains(J0, j) && dims_[static_cast<std::size_t>(j)] > 0) pool_.push_back(j);
        // permuted column order: J0 blocks, then pool blocks
        std::vector<int> perm;
        auto push_block = [&](int j, std::vector<int>& starts) {
            starts.push_back(static_cast<int>(perm.size()));
            for (int c = 0; c < dims_[static_cast<std::size_t>(j)]; ++c) perm.push_back(off[static_cast<std::size_t>(j)] + c);
        };
        std::vector<int> j0_starts;
        for (int j : J0_) push_block(j, j0_starts);
        j0_cols_ = static_cast<int>(perm.size());
        for (int j : pool_) push_block(j, pool_start_);
        pool_start_.push_back(static_cast<int>(perm.size()));
        const auto N = static_cast<Eigen::Index>(perm.size());
        E_.resize(N, N);
        P_.resize(N, N);
        for (Eigen::Index a = 0; a < N; ++a)
            for (Eigen::Index b = 0; b < N; ++b) {
                E_(a, b) = E(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
                P_(a, b) = p_identity ? (a == b ? 1.0 : 0.0) : P(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
            }
        unit_dims_ = true;
        for (int j : pool_)
            if (dims_[static_cast<std::size_t>(j)] != 1) unit_dims_ = false;
    }

    int pool_size() const { return static_cast<int>(pool_.size()); }

    std::uint64_t count(int K) const {
        K = std::min(K, pool_size());
        return binomial_saturating(static_cast<std::uint64_t>(pool_size()), static_cast<std::uint64_t>(K));
    }

    /// Exact max |lambda - 1| for the pencil on covariates T (positions into the permuted order).
    double exact(const std::vector<int>& cols) const {
        const auto n = static_cast<Eigen::Index>(cols.size());
        if (n == 0) return 0.0;
        Matrix Et(n, n), Pt(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) {
                Et(a, b) = E_(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
                Pt(a, b) = P_(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
            }
        Matrix M;
        if (p_identity_) {
            M = Et;
        } else {
            const Matrix W = sym_inv_sqrt(Pt, "population");
            M = W * Et * W;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
        const Vector& ev = es.eigenvalues();
        return std::max(ev(ev.size() - 1) - 1.0, 1.0 - ev(0));
    }

    PencilScan run(int K, double t, bool grow) {
        K = std::min(K, pool_size());
        PencilScan res;
        res.value = t;
        t_ = t;
        grow_ = grow;
        slack_ = grow ? 1e-12 : 0.0;
        result_ = &res;
        stop_ = false;
        res.sets = count(K);
        if (K == 0) {
            consider(prefix_cols({}), {});
            return res;
        }
        node({}, 0, K);
        return res;
    }

private:
    std::vector<int> block_cols(int pos) const {
        std::vector<int> out;
        for (int c = pool_start_[static_cast<std::size_t>(pos)]; c < pool_start_[static_cast<std::size_t>(pos) + 1]; ++c)
            out.push_back(c);
        return out;
    }

    std::vector<int> prefix_cols(const Subset& pre) const {
        std::vector<int> cols(static_cast<std::size_t>(j0_cols_));
        std::iota(cols.begin(), cols.end(), 0);
        for (int p : pre)
            for (int c : block_cols(p)) cols.push_back(c);
        return cols;
    }

    Subset covariates(const Subset& positions) const {
        Subset T = J0_;
        for (int p : positions) T.push_back(pool_[static_cast<std::size_t>(p)]);
        std::sort(T.begin(), T.end());
        return T;
    }

    /// Exact evaluation of a flagged set; returns false when the scan must stop.
    bool consider(const std::vector<int>& cols, const Subset& positions) {
        const double v = exact(cols);
        if (v > t_) {
            result_->exceeded = true;
            if (!grow_) {
                result_->value = v;
                result_->argmax = covariates(positions);
                stop_ = true;
                return false;
            }
            t_ = v;
            result_->value = v;
            result_->argmax = covariates(positions);
        }
        return true;
    }

    bool consider(const Subset& positions) {
        std::vector<int> cols(static_cast<std::size_t>(j0_cols_));
        std::iota(cols.begin(), cols.end(), 0);
        for (int p : positions)
            for (int c : block_cols(p)) cols.push_back(c);
        return consider(cols, positions);
    }

    /// Schur complements of M1 = (1+t)P - E and M2 = E - (1-t)P onto the columns from `cstart`,
    /// eliminating the prefix columns `pc`. False when the prefix itself is not positive definite.
    bool build(const std::vector<int>& pc, int cstart, Matrix& S1, Matrix& S2) const {
        const double hi = 1.0 + t_ + slack_;
        const double lo = 1.0 - t_ - slack_;
        const auto r = static_cast<Eigen::Index>(pc.size());
        const Eigen::Index m = E_.rows() - cstart;
        const auto Ecc = E_.bottomRightCorner(m, m);
        const auto Pcc = P_.bottomRightCorner(m, m);
        S1 = hi * Pcc - Ecc;
        S2 = Ecc - lo * Pcc;
        if (r == 0) return true;
        Matrix Epp(r, r), Ppp(r, r), Epc(r, m), Ppc(r, m);
        for (Eigen::Index a = 0; a < r; ++a) {
            for (Eigen::Index b = 0; b < r; ++b) {
                Epp(a, b) = E_(pc[static_cast<std::size_t>(a)], pc[static_cast<std::size_t>(b)]);
                Ppp(a, b) = P_(pc[static_cast<std::size_t>(a)], pc[static_cast<std::size_t>(b)]);
            }
            Epc.row(a) = E_.row(pc[static_cast<std::size_t>(a)]).tail(m);
            Ppc.row(a) = P_.row(pc[static_cast<std::size_t>(a)]).tail(m);
        }
        const Matrix M1 = hi * Ppp - Epp;
        const Matrix M2 = Epp - lo * Ppp;
        Eigen::LLT<Matrix> l1(M1), l2(M2);
        if (l1.info() != Eigen::Success || l2.info() != Eigen::Success ||
            l1.matrixLLT().diagonal().minCoeff() <= 0.0 || l2.matrixLLT().diagonal().minCoeff() <= 0.0)
            return false;
        const Matrix Y1 = l1.matrixL().solve(hi * Ppc - Epc);
        const Matrix Y2 = l2.matrixL().solve(Epc - lo * Ppc);
        S1.noalias() -= Y1.transpose() * Y1;
        S2.noalias() -= Y2.transpose() * Y2;
        return true;
    }

    int cstart(int pos) const { return pool_start_[static_cast<std::size_t>(pos)]; }
    int width(int pos) const { return cstart(pos + 1) - cstart(pos); }

    /// Exact evaluation of every completion of `pre` by `remaining` blocks from positions >= first.
    bool exhaust(const Subset& pre, int first, int remaining) {
        std::vector<int> rest;
        for (int p = first; p < pool_size(); ++p) rest.push_back(p);
        return for_each_combination(rest, remaining, [&](const Subset& tail) {
            Subset pos = pre;
            pos.insert(pos.end(), tail.begin(), tail.end());
            return consider(pos);
        });
    }

    /// Eliminates pivot block at local offset `o` (width w) from S, keeping columns after it.
    static bool eliminate(const Matrix& S, Eigen::Index o, Eigen::Index w, Matrix& out) {
        const Eigen::Index tail = S.rows() - o - w;
        if (w == 1) {
            const double piv = S(o, o);
            if (!(piv > 0.0)) return false;
            const auto v = S.row(o).tail(tail);
            out = S.bottomRightCorner(tail, tail);
            out.noalias() -= v.transpose() * (v / piv);
            return true;
        }
        Eigen::LLT<Matrix> llt(S.block(o, o, w, w));
        if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0) return false;
        const Matrix Z = llt.matrixL().solve(S.block(o, o + w, w, tail));
        out = S.bottomRightCorner(tail, tail);
        out.noalias() -= Z.transpose() * Z;
        return true;
    }

    bool block_pd(const Matrix& S, int base, int a, int b) const {
        const Eigen::Index la = cstart(a) - base;
        if (unit_dims_) {
            const double saa = S(la, la);
            if (b < 0) return saa > 0.0;
            const Eigen::Index lb = cstart(b) - base;
            const double sbb = S(lb, lb);
            const double sab = S(la, lb);
            return saa > 0.0 && sbb > 0.0 && saa * sbb - sab * sab > 0.0;
        }
        std::vector<Eigen::Index> idx;
        for (int c = 0; c < width(a); ++c) idx.push_back(la + c);
        if (b >= 0)
            for (int c = 0; c < width(b); ++c) idx.push_back(cstart(b) - base + c);
        const auto k = static_cast<Eigen::Index>(idx.size());
        Matrix sub(k, k);
        for (Eigen::Index x = 0; x < k; ++x)
            for (Eigen::Index y = 0; y < k; ++y) sub(x, y) = S(idx[static_cast<std::size_t>(x)], idx[static_cast<std::size_t>(y)]);
        return positive_definite(sub);
    }

    /// Completes `pre` with `remaining` blocks drawn from positions >= first.
    /// Returns false when the scan must stop.
    bool node(const Subset& pre, int first, int remaining) {
        Matrix S1, S2;
        if (!build(prefix_cols(pre), cstart(first), S1, S2)) {
            if (!consider(pre)) return false;
            if (!build(prefix_cols(pre), cstart(first), S1, S2)) return exhaust(pre, first, remaining);
        }
        return descend(pre, first, remaining, S1, S2);
    }

    bool descend(const Subset& pre, int first, int remaining, Matrix& S1, Matrix& S2) {
        const int P = pool_size();
        const int base = cstart(first);
        double built = t_;
        auto refresh = [&]() {
            if (t_ == built) return true;
            built = t_;
            return build(prefix_cols(pre), base, S1, S2);
        };
        if (remaining == 1) {
            for (int a = first; a < P; ++a) {
                if (block_pd(S1, base, a, -1) && block_pd(S2, base, a, -1)) continue;
                Subset pos = pre;
                pos.push_back(a);
                if (!consider(pos)) return false;
                if (!refresh()) return exhaust(pre, a + 1, 1);
            }
            return true;
        }
        if (remaining == 2) {
            // column-major traversal: S(a, b) is contiguous in a
            for (int b = first + 1; b < P; ++b) {
                if (unit_dims_) {
                    // vectorized screen of all pairs (a, b), a < b, through their 2x2 minors
                    const Eigen::Index lb = b - first;
                    auto pass = [&](const Matrix& S) {
                        const auto d = S.diagonal().head(lb).array();
                        const auto c = S.col(lb).head(lb).array();
                        const double sbb = S(lb, lb);
                        return sbb > 0.0 && d.minCoeff() > 0.0 && (d * sbb - c.square()).minCoeff() > 0.0;
                    };
                    if (pass(S1) && pass(S2)) continue;
                }
                for (int a = first; a < b; ++a) {
                    if (block_pd(S1, base, a, b) && block_pd(S2, base, a, b)) continue;
                    Subset pos = pre;
                    pos.push_back(a);
                    pos.push_back(b);
                    if (!consider(pos)) return false;
                    // the prefix can stop being positive definite only through rounding
                    if (!refresh()) return exhaust(pre, first, 2);
                }
            }
            return true;
        }
        for (int a = first; a <= P - remaining; ++a) {
            if (!refresh()) return exhaust(pre, a, remaining);
            Subset child = pre;
            child.push_back(a);
            const Eigen::Index o = cstart(a) - base;
            const Eigen::Index w = width(a);
            Matrix C1, C2;
            if (eliminate(S1, o, w, C1) && eliminate(S2, o, w, C2)) {
                if (!descend(child, a + 1, remaining - 1, C1, C2)) return false;
            } else {
                if (!node(child, a + 1, remaining - 1)) return false;
            }
        }
        return true;
    }

    std::vector<int> dims_;
    bool p_identity_;
    Subset J0_;
    std::vector<int> pool_;
    std::vector<int> pool_start_;
    int j0_cols_ = 0;
    bool unit_dims_ = true;
    Matrix E_, P_;
    double t_ = 0.0;
    double slack_ = 0.0;
    bool grow_ = true;
    bool stop_ = false;
    PencilScan* result_ = nullptr;
};

}  // namespace detail

struct RipResult {
    double delta = 0.0;
    Subset argmax;  ///< covariates of a maximizing J u J0
    std::uint64_t sets = 0;
};

/// delta_{q*} = max_{|J| <= q*} ||A_{J u J0}^T A_{J u J0} - I||_op.
inline RipResult rip_constant_detail(const DesignBlocks& blocks, int qstar, const Subset& J0,
                                     std::uint64_t budget = kDefaultBudget) {
    if (qstar < 0) throw ValidationError("rip_constant: qstar must be >= 0");
    const Matrix E = blocks.A.transpose() * blocks.A;
    detail::PencilScanner scan(E, Matrix(), true, blocks.dims, J0);
    check_budget(scan.count(qstar), budget, "rip_constant", "reduce qstar or the number of covariates");
    const auto r = scan.run(qstar, 0.0, true);
    RipResult out;
    out.delta = r.value;
    out.argmax = r.exceeded ? r.argmax : J0;
    out.sets = r.sets;
    return out;
}

inline double rip_constant(const DesignBlocks& blocks, int qstar, const Subset& J0,
                           std::uint64_t budget = kDefaultBudget) {
    return rip_constant_detail(blocks, qstar, J0, budget).delta;
}

/// Whether all generalized eigenvalues of (G_emp, G_pop) on V_{J u J0}, |J| <= q*, lie in [1-delta, 1+delta].
inline bool event_E_check(const BlockGram& emp, const BlockGram& pop, int qstar, const Subset& J0, double delta,
                          std::uint64_t budget = kDefaultBudget) {
    if (!(delta > 0.0)) throw ValidationError("event_E_check: delta must be > 0");
    if (emp.dims != pop.dims) throw ValidationError("event_E_check: empirical and population Grams differ in shape");
    detail::PencilScanner scan(emp.G, pop.G, false, emp.dims, J0);
    check_budget(scan.count(qstar), budget, "event_E_check", "reduce qstar or the number of covariates");
    return !scan.run(qstar, delta, false).exceeded;
}

inline bool event_E_check(const Dataset& data, const BasisSpec& spec, const DesignLaw& law, int qstar,
                          const Subset& J0, double delta, std::uint64_t budget = kDefaultBudget) {
    data.validate();
    Subset all(static_cast<std::size_t>(spec.q()));
    std::iota(all.begin(), all.end(), 0);
    const BlockGram emp = sample_gram(spec, data.X, all);
    const BlockGram pop = population_gram(spec, law);
    return event_E_check(emp, pop, qstar, J0, delta, budget);
}

/// Event check for a design-matrix whose population Gram is the identity (e.g. Gaussian measurements).
inline bool event_E_check(const DesignBlocks& blocks, int qstar, const Subset& J0, double delta,
                          std::uint64_t budget = kDefaultBudget) {
    if (!(delta > 0.0)) throw ValidationError("event_E_check: delta must be > 0");
    const Matrix E = blocks.A.transpose() * blocks.A;
    Matrix I = Matrix::Identity(E.rows(), E.cols());
    return event_E_check(BlockGram::from_matrix(E, blocks.dims), BlockGram::from_matrix(I, blocks.dims), qstar, J0,
                         delta, budget);
}

struct EventFrequency {
    double failure = 0.0;
    double stderr_ = 0.0;
    int trials = 0;
};

/// Monte Carlo estimate of P(E^c) for designs drawn from `law`.
inline EventFrequency estimate_event_E_failure(const BasisSpec& spec, const DesignLaw& law, int n, int qstar,
                                               const Subset& J0, double delta, int trials, std::uint64_t seed,
                                               std::uint64_t budget = kDefaultBudget) {
    if (trials < 1) throw ValidationError("estimate_event_E_failure: trials must be >= 1");
    const BlockGram pop = population_gram(spec, law);
    Subset all(static_cast<std::size_t>(spec.q()));
    std::iota(all.begin(), all.end(), 0);
    int fails = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_rng(derive_seed(seed, Stream::auxiliary, static_cast<std::uint64_t>(t)));
        const Matrix X = sample_design(law, n, spec.q(), rng);
        if (!event_E_check(sample_gram(spec, X, all), pop, qstar, J0, delta, budget)) ++fails;
    }
    EventFrequency f;
    f.trials = trials;
    f.failure = static_cast<double>(fails) / trials;
    f.stderr_ = std::sqrt(f.failure * (1.0 - f.failure) / trials);
    return f;
}

/// Truncation residual r = f - sum_j Pi_{V_j} f_j evaluated at the sample rows.
inline Vector truncation_residual(const Matrix& X, const AdditiveModel& model, const BasisSpec& spec,
                                  const DesignLaw& law) {
    Vector r = Vector::Zero(X.rows());
    for (int j : model.J0) {
        const auto& th = model.coefficients(j);
        const int m = spec.m[static_cast<std::size_t>(j)];
        if (law.uniform_marginals()) {
            std::vector<double> tail(th.size(), 0.0);
            for (std::size_t k = static_cast<std::size_t>(m); k < th.size(); ++k) tail[k] = th[k];
            // centered spaces omit phi_1 whose coefficient is 0 by construction
            for (Eigen::Index i = 0; i < X.rows(); ++i) r(i) += eval_series(tail, X(i, j));
        } else {
            // L^2(p_j) projection onto V_j by midpoint quadrature
            const auto* tbl = law.marginal(j);
            const int first = spec.first_index(j);
            const int d = m - first + 1;
            const bool centered = spec.centered[static_cast<std::size_t>(j)];
            Matrix B(kQuadratureNodes, d);
            Vector f(kQuadratureNodes), w(kQuadratureNodes);
            for (int g = 0; g < kQuadratureNodes; ++g) {
                const double u = (g + 0.5) / kQuadratureNodes;
                w(g) = tbl->pdf(u) / kQuadratureNodes;
                f(g) = eval_series(th, u);
                for (int k = 0; k < d; ++k) B(g, k) = eval_basis_unchecked(first + k, u);
            }
            Vector mean = Vector::Zero(d);
            if (centered) mean = B.transpose() * w;
            B.rowwise() -= mean.transpose();
            const Matrix G = B.transpose() * w.asDiagonal() * B;
            const Vector c = B.transpose() * w.asDiagonal() * f;
            const Vector coef = d > 0 ? Vector(G.ldlt().solve(c)) : Vector();
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const double x = X(i, j);
                double proj = 0.0;
                for (int k = 0; k < d; ++k) proj += coef(k) * (eval_basis_unchecked(first + k, x) - mean(k));
                r(i) += eval_series(th, x) - proj;
            }
        }
    }
    return r;
}

/// Event A: ||f - sum_j Pi_{V_j} f_j||_n^2 <= 2 c' (1 - rho^2) kappa.
inline bool event_A_check(const Dataset& data, const AdditiveModel& model, const BasisSpec& spec,
                          const GeometryReport& geometry, double cprime,
                          const DesignLaw& law = DesignLaw::independent_uniform()) {
    if (!geometry.kappa) throw ValidationError("event_A_check: geometry report carries no kappa");
    const Vector r = truncation_residual(data.X, model, spec, law);
    const double rho = geometry.rho_qstar;
    return empirical_norm_sq(r) <= 2.0 * cprime * (1.0 - rho * rho) * geometry.kappa->kappa;
}

/// Closed-form bound on P(A^c): exp(-3 n / (16 d_{q*})).
inline double event_A_bound(int n, int d_qstar) {
    if (d_qstar <= 0) return 0.0;
    return std::exp(-3.0 * n / (16.0 * d_qstar));
}

struct TailBounds {
    double upper;  ///< bound on P(chi2(d) - d >= x)
    double lower;  ///< bound on P(chi2(d) - d <= -x)
};

inline TailBounds chi2_tail_bounds(int d, double x) {
    if (d < 1) throw DomainError("chi2_tail_bounds: d must be >= 1");
    if (!(x >= 0.0)) throw DomainError("chi2_tail_bounds: x must be >= 0");
    return {std::exp(-x * x / (2.0 * (2.0 * d + 2.0 * x))), std::exp(-x * x / (4.0 * d))};
}

/// exp(-3 n x / (8 sup_norm_sq)).
inline double bennett_truncation_bound(int n, double x, double sup_norm_sq) {
    if (!(x > 0.0)) throw DomainError("bennett_truncation_bound: x must be > 0");
    if (!(sup_norm_sq > 0.0)) throw DomainError("bennett_truncation_bound: sup_norm_sq must be > 0");
    return std::exp(-3.0 * n * x / (8.0 * sup_norm_sq));
}

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::cpp_bin_float_50;

struct SubsetCountBound {
    BigInt exact;    ///< sum_{j <= q*} C(q, j)
    BigFloat bound;  ///< (e q / q*)^{q*}
    bool holds() const { return BigFloat(exact) <= bound; }
};

inline SubsetCountBound subset_count_bound(int q, int qstar) {
    if (qstar < 1 || qstar > q) throw DomainError("subset_count_bound: need 1 <= qstar <= q");
    SubsetCountBound out;
    BigInt c = 1;
    out.exact = 1;
    for (int j = 1; j <= qstar; ++j) {
        c = c * (q - j + 1) / j;
        out.exact += c;
    }
    const BigFloat e = boost::multiprecision::exp(BigFloat(1));
    out.bound = boost::multiprecision::pow(e * q / qstar, qstar);
    return out;
}

/// (2/3)(1 - sqrt c')^2 - 8 (1+delta)/(1-delta)^2 c' >= 1/2.
inline bool check_cprime(double delta, double cprime) {
    const double lhs = (2.0 / 3.0) * std::pow(1.0 - std::sqrt(cprime), 2) -
                       8.0 * (1.0 + delta) / ((1.0 - delta) * (1.0 - delta)) * cprime;
    return lhs >= 0.5;
}

inline double c_delta(double delta) { return (1.0 - delta) * (1.0 - delta) / (1.0 + delta); }

struct BoundParams {
    int n = 0;
    double sigma2 = 1.0;
    double rho = 0.0;
    std::vector<double> kappa_l;  ///< kappa_l[l-1], l = 1..s
    std::vector<int> d_l;         ///< d_l[l-1], l = 1..q* at least
    int s = 0;
    int qstar = 0;
    int q = 0;
    double delta = 0.5;
    double cprime = 0.001;
    std::optional<double> p_event_E_fail;  ///< supplied or Monte Carlo P(E^c); omitted when empty
    bool parametric = false;               ///< f_j in V_j: drops the truncation event term
};

struct BoundTerms {
    double event_E = 0.0;
    double event_A = 0.0;
    double chi_square = 0.0;      ///< weighted sum of the two chi-square tails
    double gauss_signal = 0.0;    ///< weighted sum of the c_delta / 2^10 Gaussian terms
    double gauss_residual = 0.0;  ///< weighted sum of the c_delta^2 / (2^14 c') Gaussian terms
    double total = 0.0;
};

/// Binomial coefficient in double precision (exact below 2^53).
inline double binomial_double(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Upper bound on P(J0 not subset of the selected set), term by term.
inline BoundTerms selection_error_terms(const BoundParams& p) {
    if (!(p.rho < 1.0) || p.rho < 0.0) throw AssumptionViolation("selection_error_bound: rho must lie in [0,1)");
    if (static_cast<int>(p.kappa_l.size()) < p.s) throw ValidationError("selection_error_bound: kappa_l needs s entries");
    if (static_cast<int>(p.d_l.size()) < p.qstar) throw ValidationError("selection_error_bound: d_l needs qstar entries");
    if (p.s > p.qstar || p.qstar > p.q) throw ValidationError("selection_error_bound: need s <= qstar <= q");
    for (int l = 0; l < p.s; ++l)
        if (!(p.kappa_l[static_cast<std::size_t>(l)] > 0.0))
            throw AssumptionViolation("selection_error_bound: kappa_l must be > 0");
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw ValidationError("selection_error_bound: delta must lie in (0,1)");
    BoundTerms t;
    t.event_E = p.p_event_E_fail.value_or(0.0);
    const int dq = p.qstar > 0 ? p.d_l[static_cast<std::size_t>(p.qstar - 1)] : 0;
    t.event_A = p.parametric ? 0.0 : event_A_bound(p.n, dq);
    const double cd = c_delta(p.delta);
    const double n = p.n;
    const double s2 = p.sigma2;
    for (int l = 1; l <= p.s; ++l) {
        double weight = 0.0;
        for (int m = 0; m <= p.qstar - (p.s - l); ++m) weight += binomial_double(p.q - p.s, m);
        weight *= binomial_double(p.s, l);
        if (s2 <= 0.0) continue;
        const double g = (1.0 - p.rho * p.rho) * p.kappa_l[static_cast<std::size_t>(l - 1)];
        const double d = p.d_l[static_cast<std::size_t>(p.qstar - p.s + l - 1)];
        const double t1 = 2.0 * std::exp(-(1.0 / 32.0) * cd * cd * n * n * g * g / (8.0 * s2 * s2 * d + cd * s2 * n * g));
        const double t2 = std::exp(-cd / 1024.0 * n * g / s2);
        const double t3 = std::exp(-cd * cd / (16384.0 * p.cprime) * n * g / s2);
        t.chi_square += weight * t1;
        t.gauss_signal += weight * t2;
        t.gauss_residual += weight * t3;
    }
    t.total = t.event_E + t.event_A + t.chi_square + t.gauss_signal + t.gauss_residual;
    return t;
}

inline double selection_error_bound(const BoundParams& p) { return selection_error_terms(p).total; }

struct ConditionParams {
    int n = 0;
    int q = 0;
    int s = 0;
    int qstar = 0;
    double sigma2 = 1.0;
    double rho_qstar = 0.0;
    double rho_s = 0.0;
    double eps_s = 0.0;  ///< epsilon_s, used by the q* = s condition
    double kappa = 0.0;
    double kappa1 = 0.0;
    std::vector<double> kappa_l;  ///< l = 1..s
    std::vector<int> d_l;         ///< l = 1..max(q*, s)
    double alpha = 1.0;
    double c3 = 1.0;
    bool parametric = false;  ///< drops the d log q terms
};

/// Largest left-hand side term of each sample-size condition; the condition reads lhs <= c3 n.
inline std::map<std::string, double> corollary_terms(const ConditionParams& p) {
    if (p.q < 1 || p.s < 1 || p.qstar < 1) throw ValidationError("corollary_conditions: q, s, qstar must be >= 1");
    if (static_cast<int>(p.d_l.size()) < std::max(p.qstar, p.s))
        throw ValidationError("corollary_conditions: d_l needs max(qstar, s) entries");
    if (static_cast<int>(p.kappa_l.size()) < p.s) throw ValidationError("corollary_conditions: kappa_l needs s entries");
    const double e = std::numbers::e;
    const double logq = std::log(static_cast<double>(p.q));
    auto dl = [&](int l) { return static_cast<double>(p.d_l[static_cast<std::size_t>(l - 1)]); };
    std::map<std::string, double> out;
    {
        const double g = (1.0 - p.rho_qstar * p.rho_qstar) * p.kappa;
        const double L = std::log(e * p.q / p.qstar);
        double v = std::max(p.sigma2 * std::sqrt(p.qstar * dl(p.qstar) * L) / g, p.sigma2 * p.qstar * L / g);
        if (!p.parametric) v = std::max(v, dl(p.qstar) * logq);
        out["general"] = v;
    }
    {
        const double g = (1.0 - p.rho_s * p.rho_s) * (1.0 - p.eps_s) * p.kappa1;
        double v = std::max(p.sigma2 * std::sqrt(dl(1) * logq) / g, p.sigma2 * logq / g);
        if (!p.parametric) v = std::max(v, dl(p.s) * logq);
        out["qstar_equals_s"] = v;
    }
    {
        double v = p.parametric ? 0.0 : dl(p.s) * logq;
        for (int l = 1; l <= p.s; ++l) {
            const double g = (1.0 - p.rho_s * p.rho_s) * p.kappa_l[static_cast<std::size_t>(l - 1)];
            const double L = std::log(e * p.q / l);
            v = std::max({v, p.sigma2 * std::sqrt(l * dl(l) * L) / g, p.sigma2 * l * L / g});
        }
        out["per_level"] = v;
    }
    {
        const double a = p.alpha;
        const double s = p.s;
        const double k1 = p.kappa1;
        const double v1 = p.sigma2 * std::pow(s, 1.0 / (4.0 * a)) * std::sqrt(logq) / std::pow(k1, (4.0 * a + 1.0) / (4.0 * a));
        const double v2 = p.sigma2 * logq / k1;
        const double v3 = std::pow(s, (2.0 * a + 1.0) / (2.0 * a)) * std::pow(logq, 4) / std::pow(k1, 1.0 / (2.0 * a));
        out["nonparametric"] = std::max({v1, v2, v3});
    }
    return out;
}

inline std::map<std::string, bool> corollary_conditions(const ConditionParams& p) {
    std::map<std::string, bool> out;
    for (const auto& [name, lhs] : corollary_terms(p)) out[name] = lhs <= p.c3 * p.n;
    return out;
}

struct DiagnosticsReport {
    std::optional<double> delta_qstar;
    std::vector<std::pair<double, bool>> event_E_holds;  ///< (delta, holds)
    std::optional<bool> event_A_holds;
    std::map<std::string, double> bound_terms;
    std::map<std::string, bool> conditions;
    bool cprime_ok = false;
};

inline std::map<std::string, double> to_map(const BoundTerms& t) {
    return {{"event_E", t.event_E},           {"event_A", t.event_A},
            {"chi_square", t.chi_square},     {"gauss_signal", t.gauss_signal},
            {"gauss_residual", t.gauss_residual}, {"total", t.total}};
}

}  // namespace addsel
