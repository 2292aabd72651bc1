#pragma once

// Population geometry of the additive subspaces: minimal angles (rho),
// restricted-isometry-type constants (epsilon), signal strengths (kappa) and
// the sup-norm ratio phi_J.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "addsel/basis.hpp"
#include "addsel/error.hpp"
#include "addsel/model.hpp"
#include "addsel/population.hpp"
#include "addsel/rng.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

inline constexpr double kEigenFloor = 1e-12;
inline constexpr std::uint64_t kDefaultBudget = 1'000'000;

/// Symmetric inverse square root of a positive definite matrix.
/// Throws SingularGram when the smallest eigenvalue is below 1e-12.
inline Matrix sym_inv_sqrt(const Matrix& G, const std::string& name = "G") {
    if (G.rows() == 0) return Matrix(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    const Vector& ev = es.eigenvalues();
    if (ev(0) < kEigenFloor) throw SingularGram(name, ev(0));
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

/// Cosine of the minimal angle between span-blocks with Grams G11, G22 and cross-Gram G12:
/// the largest singular value of G11^{-1/2} G12 G22^{-1/2}, clipped to [0,1].
inline double min_angle_cos(const Matrix& G11, const Matrix& G22, const Matrix& G12) {
    if (G12.rows() != G11.rows() || G12.cols() != G22.rows())
        throw ValidationError("min_angle_cos: cross-Gram shape does not match the blocks");
    if (G11.rows() == 0 || G22.rows() == 0) return 0.0;
    const Matrix M = sym_inv_sqrt(G11, "G11") * G12 * sym_inv_sqrt(G22, "G22");
    Eigen::JacobiSVD<Matrix> svd(M);
    return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

/// Coefficient vectors (u, v) of h1 = sum u_i b1_i and h2 = sum v_i b2_i attaining
/// ||h1 + h2||^2 = (1 - rho^2) ||h1||^2 with ||h1|| = 1.
struct ExtremalPair {
    Vector u;
    Vector v;
    double rho;
};

inline ExtremalPair extremal_pair(const Matrix& G11, const Matrix& G22, const Matrix& G12) {
    const Matrix W1 = sym_inv_sqrt(G11, "G11");
    const Matrix W2 = sym_inv_sqrt(G22, "G22");
    Eigen::JacobiSVD<Matrix> svd(W1 * G12 * W2, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double rho = std::clamp(svd.singularValues()(0), 0.0, 1.0);
    return {W1 * svd.matrixU().col(0), -rho * (W2 * svd.matrixV().col(0)), rho};
}

/// Checks ||h1 + h2||^2 >= (1 - rho^2) ||h1||^2 on random pairs, rho = min_angle_cos.
inline bool verify_angle_equivalence(const Matrix& G11, const Matrix& G22, const Matrix& G12, int trials,
                                     std::uint64_t seed = 12345) {
    const double rho = min_angle_cos(G11, G22, G12);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector u(G11.rows()), v(G22.rows());
    for (int t = 0; t < trials; ++t) {
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
        // mix scales so that both small and large h2 relative to h1 are probed
        const double scale = std::exp(2.0 * normal(rng));
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * normal(rng);
        const double n11 = u.dot(G11 * u);
        const double n22 = v.dot(G22 * v);
        const double n12 = u.dot(G12 * v);
        const double lhs = n11 + 2.0 * n12 + n22;
        if (lhs < (1.0 - rho * rho) * n11 - 1e-10 * std::max({1.0, n11, n22})) return false;
    }
    return true;
}

/// Largest cosine over all admissible disjoint block pairs and the pair attaining it.
struct RhoResult {
    double value = 0.0;
    Subset J1;  ///< block positions
    Subset J2;
    std::uint64_t pairs = 0;
};

namespace detail {

inline std::uint64_t mask_of(const Subset& s) {
    std::uint64_t m = 0;
    for (int j : s) m |= (std::uint64_t{1} << j);
    return m;
}

/// Unordered disjoint pairs (J1, J2), 1 <= |Ji| <= qstar, that cannot be enlarged.
/// rho_0 only grows when either side grows, so these attain the maximum.
inline bool maximal_pair_sizes(int a, int b, int qstar, int B) {
    const bool full = a + b == B;
    return (a == qstar || full) && (b == qstar || full) && a + b <= B;
}

inline std::uint64_t count_maximal_pairs(int B, int qstar) {
    long double total = 0.0L;
    for (int a = 1; a <= qstar; ++a)
        for (int b = 1; b <= qstar; ++b)
            if (maximal_pair_sizes(a, b, qstar, B))
                total += static_cast<long double>(binomial_saturating(B, a)) *
                         static_cast<long double>(binomial_saturating(B - a, b));
    total /= 2.0L;
    if (total > static_cast<long double>(std::numeric_limits<std::uint64_t>::max() / 2))
        return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(std::llround(total));
}

}  // namespace detail

inline RhoResult rho_qstar(const BlockGram& bg, int qstar, std::uint64_t budget = kDefaultBudget) {
    const int B = bg.blocks();
    if (qstar < 1) throw ValidationError("rho_qstar: qstar must be >= 1");
    if (B > 64) throw ValidationError("rho_qstar: at most 64 blocks supported");
    RhoResult res;
    if (B < 2) return res;
    const int cap = std::min(qstar, B - 1);
    check_budget(detail::count_maximal_pairs(B, cap), budget, "rho_qstar",
                 "reduce qstar or restrict the covariate set");

    std::unordered_map<std::uint64_t, Matrix> whiten;
    auto W = [&](const Subset& s) -> const Matrix& {
        const auto key = detail::mask_of(s);
        auto it = whiten.find(key);
        if (it == whiten.end()) it = whiten.emplace(key, sym_inv_sqrt(bg.sub(s), "J=" + to_string(s))).first;
        return it->second;
    };

    std::vector<int> all(static_cast<std::size_t>(B));
    std::iota(all.begin(), all.end(), 0);
    bool first = true;
    for (int a = 1; a <= cap; ++a) {
        for_each_combination(all, a, [&](const Subset& J1) {
            const Subset rest = set_difference(all, J1);
            for (int b = 1; b <= cap; ++b) {
                if (!detail::maximal_pair_sizes(a, b, cap, B)) continue;
                for_each_combination(rest, b, [&](const Subset& J2) {
                    if (!(J1 < J2)) return true;
                    ++res.pairs;
                    const Matrix& W1 = W(J1);
                    const Matrix& W2 = W(J2);
                    double v = 0.0;
                    if (W1.rows() > 0 && W2.rows() > 0) {
                        Eigen::JacobiSVD<Matrix> svd(W1 * bg.sub(J1, J2) * W2);
                        v = std::clamp(svd.singularValues()(0), 0.0, 1.0);
                    }
                    if (first || v > res.value) {
                        res.value = v;
                        res.J1 = J1;
                        res.J2 = J2;
                        first = false;
                    }
                    return true;
                });
            }
            return true;
        });
    }
    return res;
}

inline double rho_qstar(const BasisSpec& spec, const DesignLaw& law, int qstar, std::uint64_t budget = kDefaultBudget) {
    return rho_qstar(population_gram(spec, law), qstar, budget).value;
}

/// Lower (eps_2qstar) and upper (eps'_qstar) restricted-isometry-type constants.
struct EpsilonConstants {
    double eps_2qstar = 0.0;
    double eps_prime_qstar = 0.0;
};

/// Block-normalized Gram D^{-1/2} G D^{-1/2}; its principal submatrices are the per-subset
/// normalized Grams, so extremes over |J| <= k are attained at |J| = min(k, q).
inline Matrix block_normalized(const BlockGram& bg) {
    Matrix Dinv = Matrix::Zero(bg.G.rows(), bg.G.cols());
    for (int p = 0; p < bg.blocks(); ++p) {
        const int w = bg.dims[static_cast<std::size_t>(p)];
        if (w == 0) continue;
        const int o = bg.offset[static_cast<std::size_t>(p)];
        Dinv.block(o, o, w, w) = sym_inv_sqrt(bg.G.block(o, o, w, w), "covariate " + std::to_string(bg.covariates[static_cast<std::size_t>(p)]));
    }
    return Dinv * bg.G * Dinv;
}

inline EpsilonConstants epsilon_constants(const BlockGram& bg, int qstar, std::uint64_t budget = kDefaultBudget) {
    if (qstar < 1) throw ValidationError("epsilon_constants: qstar must be >= 1");
    const int B = bg.blocks();
    EpsilonConstants out;
    if (B < 2) return out;
    const Matrix N = block_normalized(bg);
    const BlockGram nb = BlockGram::from_matrix(N, bg.dims, bg.covariates);
    std::vector<int> all(static_cast<std::size_t>(B));
    std::iota(all.begin(), all.end(), 0);

    const int k_low = std::min(2 * qstar, B);
    const int k_up = std::min(qstar, B);
    check_budget(binomial_saturating(B, k_low) + binomial_saturating(B, k_up), budget, "epsilon_constants",
                 "reduce qstar or restrict the covariate set");
    for_each_combination(all, k_low, [&](const Subset& J) {
        const Matrix NJ = nb.sub(J);
        if (NJ.rows() == 0) return true;
        Eigen::SelfAdjointEigenSolver<Matrix> es(NJ, Eigen::EigenvaluesOnly);
        out.eps_2qstar = std::max(out.eps_2qstar, 1.0 - es.eigenvalues()(0));
        return true;
    });
    if (k_up >= 2) {
        for_each_combination(all, k_up, [&](const Subset& J) {
            const Matrix NJ = nb.sub(J);
            if (NJ.rows() == 0) return true;
            Eigen::SelfAdjointEigenSolver<Matrix> es(NJ, Eigen::EigenvaluesOnly);
            out.eps_prime_qstar = std::max(out.eps_prime_qstar, es.eigenvalues()(NJ.rows() - 1) - 1.0);
            return true;
        });
    }
    // single blocks contribute exactly 0; clear rounding noise
    out.eps_2qstar = std::max(out.eps_2qstar, 0.0);
    out.eps_prime_qstar = std::max(out.eps_prime_qstar, 0.0);
    return out;
}

inline EpsilonConstants epsilon_constants(const BasisSpec& spec, const DesignLaw& law, int qstar,
                                          std::uint64_t budget = kDefaultBudget) {
    return epsilon_constants(population_gram(spec, law), qstar, budget);
}

/// kappa_l = min over l-subsets J' of J0 of ||sum_{j in J'} f_j||^2; kappa = min_l kappa_l.
struct KappaValues {
    double kappa = 0.0;
    std::vector<double> kappa_l;  ///< kappa_l[l-1], l = 1..s
};

/// From the s x s Gram of the active components.
inline KappaValues kappa_values(const Matrix& component_gram) {
    const int s = static_cast<int>(component_gram.rows());
    if (s > 20) throw BudgetExceeded("kappa_values: s=" + std::to_string(s) + " exceeds the 2^20 enumeration limit",
                                     std::uint64_t{1} << std::min(s, 63), std::uint64_t{1} << 20);
    KappaValues kv;
    kv.kappa_l.assign(static_cast<std::size_t>(s), std::numeric_limits<double>::infinity());
    for (std::uint32_t mask = 1; mask < (1u << s); ++mask) {
        double v = 0.0;
        for (int a = 0; a < s; ++a)
            if (mask & (1u << a))
                for (int b = 0; b < s; ++b)
                    if (mask & (1u << b)) v += component_gram(a, b);
        auto& slot = kv.kappa_l[static_cast<std::size_t>(std::popcount(mask) - 1)];
        slot = std::min(slot, v);
    }
    kv.kappa = s == 0 ? 0.0 : *std::min_element(kv.kappa_l.begin(), kv.kappa_l.end());
    return kv;
}

inline KappaValues kappa_values(const AdditiveModel& model, const DesignLaw& law) {
    if (model.s() > 20)
        throw BudgetExceeded("kappa_values: s=" + std::to_string(model.s()) + " exceeds the 2^20 enumeration limit",
                             std::uint64_t{1} << std::min(model.s(), 63), std::uint64_t{1} << 20);
    return kappa_values(component_gram(model, law));
}

/// 1 - eps_2qstar >= (1 - rho^2)^{log2(qstar) + 1}.
inline bool check_ric_chain(double rho, double eps_2qstar, int qstar) {
    const double exponent = std::log2(static_cast<double>(qstar)) + 1.0;
    return 1.0 - eps_2qstar >= std::pow(1.0 - rho * rho, exponent) - 1e-12;
}

/// Lower bound on 1 - eps_2qstar obtained by halving |J| <= 2 qstar recursively and using
/// ||h1 + h2||^2 >= (1 - rho)(||h1||^2 + ||h2||^2) at each level.
inline double halving_chain_bound(double rho, int qstar) {
    const int levels = static_cast<int>(std::ceil(std::log2(2.0 * qstar) - 1e-12));
    return std::pow(1.0 - rho, levels);
}

/// phi_J = sup_x sqrt(b(x)^T G_J^{-1} b(x) / d_J) over a grid of `grid_size` points per covariate.
/// One covariate is scanned exhaustively; several covariates use coordinate ascent from
/// deterministic restarts, so the value is a lower bound of the true supremum.
inline double sup_norm_ratio(const BasisSpec& spec, const DesignLaw& law, const Subset& J, int grid_size,
                             int restarts = 24) {
    if (grid_size < 256) throw ValidationError("sup_norm_ratio: grid_size must be >= 256");
    const BlockGram bg = population_gram(spec, law, J);
    const int dJ = static_cast<int>(bg.G.rows());
    if (dJ < 1) throw ValidationError("sup_norm_ratio: d_J must be >= 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(bg.G);
    if (es.eigenvalues()(0) < kEigenFloor) throw SingularGram("J=" + to_string(J), es.eigenvalues()(0));
    const Matrix M = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

    // Per-block basis values on the grid (population-centered like the Gram).
    const int B = static_cast<int>(J.size());
    std::vector<Matrix> vals(static_cast<std::size_t>(B));
    for (int p = 0; p < B; ++p) {
        const int j = J[static_cast<std::size_t>(p)];
        const auto feats = basis_features(spec, j);
        Matrix V(grid_size, static_cast<Eigen::Index>(feats.size()));
        for (std::size_t c = 0; c < feats.size(); ++c) {
            double mean = 0.0;
            if (feats[c].center) {
                for (int i = 0; i < kQuadratureNodes; ++i) {
                    const double x = (i + 0.5) / kQuadratureNodes;
                    mean += feats[c].fn(x) * law.density(j, x);
                }
                mean /= kQuadratureNodes;
            }
            for (int g = 0; g < grid_size; ++g)
                V(g, static_cast<Eigen::Index>(c)) = feats[c].fn(static_cast<double>(g) / (grid_size - 1)) - mean;
        }
        vals[static_cast<std::size_t>(p)] = std::move(V);
    }
    auto block = [&](int a, int b) {
        return M.block(bg.offset[static_cast<std::size_t>(a)], bg.offset[static_cast<std::size_t>(b)],
                       bg.dims[static_cast<std::size_t>(a)], bg.dims[static_cast<std::size_t>(b)]);
    };

    if (B == 1) {
        const Matrix& V = vals[0];
        const Vector q = (V * M).cwiseProduct(V).rowwise().sum();
        return std::sqrt(std::max(q.maxCoeff(), 0.0) / dJ);
    }

    // Diagonal quadratic terms per block on the grid.
    std::vector<Vector> diag(static_cast<std::size_t>(B));
    for (int p = 0; p < B; ++p) {
        const Matrix& V = vals[static_cast<std::size_t>(p)];
        diag[static_cast<std::size_t>(p)] = (V * block(p, p)).cwiseProduct(V).rowwise().sum();
    }
    Rng rng(0x5eedULL + static_cast<std::uint64_t>(grid_size));
    std::uniform_int_distribution<int> pick(0, grid_size - 1);
    double best = 0.0;
    std::vector<int> pos(static_cast<std::size_t>(B));
    for (int start = 0; start < restarts; ++start) {
        if (start == 0) std::fill(pos.begin(), pos.end(), 0);
        else if (start == 1) std::fill(pos.begin(), pos.end(), grid_size - 1);
        else
            for (int& p : pos) p = pick(rng);
        double current = -1.0;
        for (int sweep = 0; sweep < 50; ++sweep) {
            bool improved = false;
            for (int p = 0; p < B; ++p) {
                Vector w = Vector::Zero(bg.dims[static_cast<std::size_t>(p)]);
                for (int o = 0; o < B; ++o)
                    if (o != p) w += block(p, o) * vals[static_cast<std::size_t>(o)].row(pos[static_cast<std::size_t>(o)]).transpose();
                const Vector score = diag[static_cast<std::size_t>(p)] + 2.0 * vals[static_cast<std::size_t>(p)] * w;
                Eigen::Index arg;
                score.maxCoeff(&arg);
                pos[static_cast<std::size_t>(p)] = static_cast<int>(arg);
            }
            double total = 0.0;
            for (int a = 0; a < B; ++a)
                for (int b = 0; b < B; ++b)
                    total += vals[static_cast<std::size_t>(a)].row(pos[static_cast<std::size_t>(a)]) * block(a, b) *
                             vals[static_cast<std::size_t>(b)].row(pos[static_cast<std::size_t>(b)]).transpose();
            if (total > current + 1e-14) {
                current = total;
                improved = true;
            }
            if (!improved) break;
        }
        best = std::max(best, current);
    }
    return std::sqrt(std::max(best, 0.0) / dJ);
}

/// phi_k = max over nonempty |J| <= max_size with d_J >= 1 of sup_norm_ratio.
inline double sup_norm_ratio_max(const BasisSpec& spec, const DesignLaw& law, int max_size, int grid_size,
                                 std::uint64_t budget = kDefaultBudget) {
    check_budget(count_subsets_up_to(spec.q(), max_size), budget, "sup_norm_ratio_max",
                 "reduce qstar or restrict the covariate set");
    double best = 0.0;
    for_each_subset_up_to(spec.q(), max_size, [&](const Subset& J) {
        if (!J.empty() && spec.d(J) >= 1) best = std::max(best, sup_norm_ratio(spec, law, J, grid_size));
        return true;
    });
    return best;
}

/// Population geometry of a basis/law pair (and, optionally, of a model's active components).
struct GeometryReport {
    double rho_qstar = 0.0;
    double eps_2qstar = 0.0;
    double eps_prime_qstar = 0.0;
    std::optional<KappaValues> kappa;
    double phi_2qstar = 0.0;
    double density_bound = 1.0;
    int qstar = 1;
    bool ric_chain = true;
};

struct GeometryOptions {
    int grid_size = 4096;
    std::uint64_t budget = kDefaultBudget;
    bool with_phi = true;
};

inline GeometryReport compute_geometry(const BasisSpec& spec, const DesignLaw& law, int qstar,
                                       const AdditiveModel* model = nullptr, const GeometryOptions& opt = {}) {
    GeometryReport rep;
    rep.qstar = qstar;
    const BlockGram bg = population_gram(spec, law);
    rep.rho_qstar = rho_qstar(bg, qstar, opt.budget).value;
    const auto eps = epsilon_constants(bg, qstar, opt.budget);
    rep.eps_2qstar = eps.eps_2qstar;
    rep.eps_prime_qstar = eps.eps_prime_qstar;
    if (model) rep.kappa = kappa_values(*model, law);
    if (opt.with_phi) rep.phi_2qstar = sup_norm_ratio_max(spec, law, 2 * qstar, opt.grid_size, opt.budget);
    rep.density_bound = law.density_bound(spec.q());
    rep.ric_chain = rep.rho_qstar < 1.0 ? check_ric_chain(rep.rho_qstar, rep.eps_2qstar, qstar) : false;
    return rep;
}

}  // namespace addsel
