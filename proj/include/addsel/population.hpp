#pragma once

// Population-level (L^2(P^X)) inner products for the supported design laws.
//
// Independent covariates use a 2048-node midpoint rule per covariate. The
// Gaussian copula (uniform marginals, equicorrelated latent normals) uses the
// Mehler expansion E[g(Z1) h(Z2)] = sum_n r^n a_n(g) a_n(h), where a_n are the
// normalized Hermite coefficients of g(Phi(z)).

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addsel/basis.hpp"
#include "addsel/error.hpp"
#include "addsel/rng.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

inline constexpr int kQuadratureNodes = 2048;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Piecewise-linear density on [0,1] given by values on an equispaced grid (including both ends).
class DensityTable {
public:
    DensityTable() = default;

    explicit DensityTable(std::vector<double> values) : values_(std::move(values)) {
        if (values_.size() < 2) throw ValidationError("DensityTable: need at least two grid values");
        for (double v : values_)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("DensityTable: values must be finite and >= 0");
        double integral = 0.0;
        for (int i = 0; i < kQuadratureNodes; ++i) integral += pdf((i + 0.5) / kQuadratureNodes);
        integral /= kQuadratureNodes;
        if (std::abs(integral - 1.0) > 1e-6)
            throw ValidationError("DensityTable: density integrates to " + std::to_string(integral) + ", not 1");
        build_cdf();
    }

    double pdf(double x) const {
        const double t = std::clamp(x, 0.0, 1.0) * static_cast<double>(values_.size() - 1);
        const auto i = std::min(static_cast<std::size_t>(t), values_.size() - 2);
        const double w = t - static_cast<double>(i);
        return (1.0 - w) * values_[i] + w * values_[i + 1];
    }

    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

    /// Inverse CDF by bisection on the exact piecewise-quadratic CDF.
    double quantile(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - cdf_.begin()) - 1));
        i = std::min(i, values_.size() - 2);
        const double h = 1.0 / static_cast<double>(values_.size() - 1);
        double lo = 0.0, hi = h;
        for (int it2 = 0; it2 < 60; ++it2) {
            const double mid = 0.5 * (lo + hi);
            const double slope = (values_[i + 1] - values_[i]) / h;
            const double mass = cdf_[i] + values_[i] * mid + 0.5 * slope * mid * mid;
            (mass < u ? lo : hi) = mid;
        }
        return std::clamp(static_cast<double>(i) * h + 0.5 * (lo + hi), 0.0, 1.0);
    }

    const std::vector<double>& values() const { return values_; }

private:
    void build_cdf() {
        const double h = 1.0 / static_cast<double>(values_.size() - 1);
        cdf_.assign(values_.size(), 0.0);
        for (std::size_t i = 1; i < values_.size(); ++i) cdf_[i] = cdf_[i - 1] + 0.5 * h * (values_[i - 1] + values_[i]);
        const double total = cdf_.back();
        for (double& c : cdf_) c /= total;
        for (double& v : values_) v /= total;
    }

    std::vector<double> values_;
    std::vector<double> cdf_;
};

/// Joint law of the covariate vector X in [0,1]^q.
struct DesignLaw {
    enum class Kind { independent_uniform, gaussian_copula, custom_density };

    Kind kind = Kind::independent_uniform;
    double r = 0.0;                      ///< latent equicorrelation (gaussian_copula)
    std::vector<DensityTable> marginals; ///< one table, or one per covariate (custom_density)

    static DesignLaw independent_uniform() { return {}; }

    static DesignLaw gaussian_copula(double r) {
        if (!(std::abs(r) < 1.0)) throw ValidationError("gaussian copula: correlation must satisfy |r| < 1");
        DesignLaw law;
        law.kind = Kind::gaussian_copula;
        law.r = r;
        return law;
    }

    static DesignLaw custom(std::vector<DensityTable> tables) {
        if (tables.empty()) throw ValidationError("custom design law needs at least one density table");
        DesignLaw law;
        law.kind = Kind::custom_density;
        law.marginals = std::move(tables);
        return law;
    }

    bool independent() const { return kind != Kind::gaussian_copula || r == 0.0; }
    bool uniform_marginals() const { return kind != Kind::custom_density; }

    const DensityTable* marginal(int j) const {
        if (kind != Kind::custom_density) return nullptr;
        return marginals.size() == 1 ? &marginals[0] : &marginals.at(static_cast<std::size_t>(j));
    }

    double density(int j, double x) const {
        const auto* t = marginal(j);
        return t ? t->pdf(x) : 1.0;
    }

    /// Largest c with c <= p_j <= 1/c for the marginals of covariates 0..q-1.
    double density_bound(int q) const {
        if (kind != Kind::custom_density) return 1.0;
        double c = 1.0;
        for (int j = 0; j < q; ++j) {
            const auto* t = marginal(j);
            c = std::min({c, t->min_value(), 1.0 / t->max_value()});
        }
        return c;
    }

    void check_compatible(int q) const {
        if (kind == Kind::custom_density && marginals.size() != 1 && static_cast<int>(marginals.size()) != q)
            throw ValidationError("custom design law has " + std::to_string(marginals.size()) +
                                  " marginal tables for q=" + std::to_string(q));
        if (kind == Kind::gaussian_copula && q > 1 && r <= -1.0 / (q - 1))
            throw ValidationError("equicorrelation r is not positive definite for this q");
    }
};

/// A real function of one covariate, used as an element of L^2(P^X).
struct Feature {
    int covariate = 0;
    std::function<double(double)> fn;
    bool center = false;  ///< subtract the population mean
};

namespace detail {

struct HermiteGrid {
    std::vector<double> z;
    std::vector<double> w;  // standard normal density times step
};

inline const HermiteGrid& hermite_grid() {
    static const HermiteGrid grid = [] {
        HermiteGrid g;
        constexpr double zmax = 12.0;
        constexpr int npts = 6001;
        const double step = 2.0 * zmax / (npts - 1);
        for (int i = 0; i < npts; ++i) {
            const double z = -zmax + step * i;
            g.z.push_back(z);
            g.w.push_back(step * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi));
        }
        return g;
    }();
    return grid;
}

inline int mehler_order(double r) {
    if (r == 0.0) return 0;
    const double n = std::log(1e-17) / std::log(std::abs(r));
    return std::clamp(static_cast<int>(std::ceil(n)), 1, 600);
}

/// a_n = E[g(Phi(Z)) h_n(Z)], n = 0..order, h_n orthonormal Hermite polynomials.
inline std::vector<double> hermite_coefficients(const std::function<double(double)>& g, int order) {
    const auto& grid = hermite_grid();
    std::vector<double> a(static_cast<std::size_t>(order + 1), 0.0);
    std::vector<double> h(static_cast<std::size_t>(order + 1));
    for (std::size_t i = 0; i < grid.z.size(); ++i) {
        const double z = grid.z[i];
        const double gw = g(normal_cdf(z)) * grid.w[i];
        if (gw == 0.0) continue;
        h[0] = 1.0;
        if (order >= 1) h[1] = z;
        for (int n = 1; n < order; ++n)
            h[static_cast<std::size_t>(n + 1)] =
                (z * h[static_cast<std::size_t>(n)] - std::sqrt(static_cast<double>(n)) * h[static_cast<std::size_t>(n - 1)]) /
                std::sqrt(static_cast<double>(n + 1));
        for (int n = 0; n <= order; ++n) a[static_cast<std::size_t>(n)] += gw * h[static_cast<std::size_t>(n)];
    }
    return a;
}

struct PreparedFeature {
    int covariate;
    std::vector<double> grid_values;  // centered when requested; midpoint nodes
    double mean;                      // population mean after centering (0 when centered)
    std::vector<double> hermite;      // only for the copula
};

inline PreparedFeature prepare(const DesignLaw& law, const Feature& f, int order) {
    PreparedFeature p;
    p.covariate = f.covariate;
    p.grid_values.resize(kQuadratureNodes);
    double mean = 0.0;
    for (int i = 0; i < kQuadratureNodes; ++i) {
        const double x = (i + 0.5) / kQuadratureNodes;
        p.grid_values[static_cast<std::size_t>(i)] = f.fn(x);
        mean += p.grid_values[static_cast<std::size_t>(i)] * law.density(f.covariate, x);
    }
    mean /= kQuadratureNodes;
    if (f.center)
        for (double& v : p.grid_values) v -= mean;
    p.mean = f.center ? 0.0 : mean;
    if (law.kind == DesignLaw::Kind::gaussian_copula && order > 0) {
        const double shift = f.center ? mean : 0.0;
        p.hermite = hermite_coefficients([&](double u) { return f.fn(u) - shift; }, order);
        p.hermite[0] = p.mean;
    }
    return p;
}

}  // namespace detail

/// Gram matrix <f_a, f_b> = E[f_a(X) f_b(X)] of arbitrary single-covariate features.
inline Matrix function_gram(const DesignLaw& law, const std::vector<Feature>& features) {
    const int order = law.kind == DesignLaw::Kind::gaussian_copula ? detail::mehler_order(law.r) : 0;
    std::vector<detail::PreparedFeature> prep;
    prep.reserve(features.size());
    for (const auto& f : features) prep.push_back(detail::prepare(law, f, order));
    const auto nf = static_cast<Eigen::Index>(features.size());
    Matrix G(nf, nf);
    std::vector<double> dens(kQuadratureNodes);
    for (Eigen::Index a = 0; a < nf; ++a) {
        const auto& fa = prep[static_cast<std::size_t>(a)];
        for (int i = 0; i < kQuadratureNodes; ++i)
            dens[static_cast<std::size_t>(i)] = law.density(fa.covariate, (i + 0.5) / kQuadratureNodes);
        for (Eigen::Index b = a; b < nf; ++b) {
            const auto& fb = prep[static_cast<std::size_t>(b)];
            double v = 0.0;
            if (fa.covariate == fb.covariate) {
                for (int i = 0; i < kQuadratureNodes; ++i)
                    v += fa.grid_values[static_cast<std::size_t>(i)] * fb.grid_values[static_cast<std::size_t>(i)] *
                         dens[static_cast<std::size_t>(i)];
                v /= kQuadratureNodes;
            } else if (law.kind == DesignLaw::Kind::gaussian_copula && order > 0) {
                double rn = 1.0;
                for (int n = 0; n <= order; ++n) {
                    v += rn * fa.hermite[static_cast<std::size_t>(n)] * fb.hermite[static_cast<std::size_t>(n)];
                    rn *= law.r;
                }
            } else {
                v = fa.mean * fb.mean;
            }
            G(a, b) = v;
            G(b, a) = v;
        }
    }
    return G;
}

/// Gram matrix partitioned into per-covariate blocks.
struct BlockGram {
    Matrix G;
    std::vector<int> covariates;  ///< covariate index of each block
    std::vector<int> dims;
    std::vector<int> offset;

    int blocks() const { return static_cast<int>(dims.size()); }

    int d(const Subset& positions) const {
        int total = 0;
        for (int p : positions) total += dims[static_cast<std::size_t>(p)];
        return total;
    }

    /// Column indices in G of the given block positions, in the given order.
    std::vector<int> indices(const Subset& positions) const {
        std::vector<int> idx;
        for (int p : positions)
            for (int c = 0; c < dims[static_cast<std::size_t>(p)]; ++c)
                idx.push_back(offset[static_cast<std::size_t>(p)] + c);
        return idx;
    }

    Matrix sub(const Subset& rows, const Subset& cols) const {
        const auto ri = indices(rows);
        const auto ci = indices(cols);
        Matrix out(static_cast<Eigen::Index>(ri.size()), static_cast<Eigen::Index>(ci.size()));
        for (std::size_t a = 0; a < ri.size(); ++a)
            for (std::size_t b = 0; b < ci.size(); ++b)
                out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = G(ri[a], ci[b]);
        return out;
    }

    Matrix sub(const Subset& positions) const { return sub(positions, positions); }

    static BlockGram from_matrix(Matrix G, std::vector<int> dims, std::vector<int> covariates = {}) {
        BlockGram bg;
        int off = 0;
        for (int w : dims) {
            bg.offset.push_back(off);
            off += w;
        }
        if (off != G.rows() || G.rows() != G.cols()) throw ValidationError("BlockGram: dimensions do not match");
        if (covariates.empty())
            for (std::size_t i = 0; i < dims.size(); ++i) covariates.push_back(static_cast<int>(i));
        bg.G = std::move(G);
        bg.dims = std::move(dims);
        bg.covariates = std::move(covariates);
        return bg;
    }
};

/// Basis features of V_j (population-centered when the spec centers covariate j).
inline std::vector<Feature> basis_features(const BasisSpec& spec, int j) {
    std::vector<Feature> out;
    const bool centered = spec.centered[static_cast<std::size_t>(j)];
    for (int k = spec.first_index(j); k <= spec.m[static_cast<std::size_t>(j)]; ++k)
        out.push_back({j, [k](double x) { return eval_basis_unchecked(k, x); }, centered});
    return out;
}

/// Gram of the concatenated basis of V_J under P^X, blocks in the order of J.
inline BlockGram population_gram(const BasisSpec& spec, const DesignLaw& law, const Subset& J) {
    spec.validate();
    law.check_compatible(spec.q());
    std::vector<Feature> feats;
    std::vector<int> dims;
    for (int j : J) {
        if (j < 0 || j >= spec.q()) throw ValidationError("population_gram: covariate index out of range");
        auto fj = basis_features(spec, j);
        dims.push_back(static_cast<int>(fj.size()));
        for (auto& f : fj) feats.push_back(std::move(f));
    }
    Matrix G = function_gram(law, feats);
    return BlockGram::from_matrix(std::move(G), std::move(dims), J);
}

inline BlockGram population_gram(const BasisSpec& spec, const DesignLaw& law) {
    Subset all(static_cast<std::size_t>(spec.q()));
    for (int j = 0; j < spec.q(); ++j) all[static_cast<std::size_t>(j)] = j;
    return population_gram(spec, law, all);
}

/// Sample-based quadrature: (1/N) sum_i b(X^i) b(X^i)^T for the basis of V_J.
inline BlockGram sample_gram(const BasisSpec& spec, const Matrix& X, const Subset& J) {
    BasisSpec sub;
    Matrix XJ(X.rows(), static_cast<Eigen::Index>(J.size()));
    for (std::size_t a = 0; a < J.size(); ++a) {
        XJ.col(static_cast<Eigen::Index>(a)) = X.col(J[a]);
        sub.m.push_back(spec.m[static_cast<std::size_t>(J[a])]);
        sub.centered.push_back(spec.centered[static_cast<std::size_t>(J[a])]);
    }
    sub.empirical_centering = spec.empirical_centering;
    const DesignBlocks blocks = build_design(XJ, sub);
    return BlockGram::from_matrix(blocks.A.transpose() * blocks.A, blocks.dims, J);
}

/// Draws n i.i.d. rows of the law.
inline Matrix sample_design(const DesignLaw& law, int n, int q, Rng& rng) {
    if (n < 1 || q < 1) throw ValidationError("sample_design: n and q must be >= 1");
    law.check_compatible(q);
    Matrix X(n, q);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    switch (law.kind) {
        case DesignLaw::Kind::independent_uniform:
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < q; ++j) X(i, j) = unif(rng);
            break;
        case DesignLaw::Kind::custom_density:
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < q; ++j) X(i, j) = law.marginal(j)->quantile(unif(rng));
            break;
        case DesignLaw::Kind::gaussian_copula: {
            Matrix R = Matrix::Constant(q, q, law.r);
            R.diagonal().setOnes();
            Eigen::LLT<Matrix> llt(R);
            if (llt.info() != Eigen::Success) throw ValidationError("gaussian copula: correlation matrix not positive definite");
            const Matrix L = llt.matrixL();
            std::normal_distribution<double> normal(0.0, 1.0);
            Vector z(q);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < q; ++j) z(j) = normal(rng);
                const Vector y = L * z;
                for (int j = 0; j < q; ++j) X(i, j) = std::clamp(normal_cdf(y(j)), 0.0, 1.0);
            }
            break;
        }
    }
    return X;
}

}  // namespace addsel
