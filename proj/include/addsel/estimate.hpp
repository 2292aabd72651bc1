#pragma once

// Split-sample estimation of one additive component after selection.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addsel/basis.hpp"
#include "addsel/config.hpp"
#include "addsel/error.hpp"
#include "addsel/model.hpp"
#include "addsel/population.hpp"
#include "addsel/rng.hpp"
#include "addsel/selection.hpp"
#include "addsel/simulate.hpp"

namespace addsel {

struct ComponentEstimate {
    int target = 0;
    int m_target = 0;
    Vector coefficients;  ///< over the basis of V_target at level m_target (phi_2.. when centered)
    bool centered = true;
    Subset selected;      ///< selection from the first half
    int n_half = 0;
    std::optional<double> risk;

    /// theta-style vector indexed from phi_1.
    std::vector<double> theta() const {
        std::vector<double> th(static_cast<std::size_t>(m_target), 0.0);
        const int first = centered ? 2 : 1;
        for (Eigen::Index k = 0; k < coefficients.size(); ++k) th[static_cast<std::size_t>(first - 1 + k)] = coefficients(k);
        return th;
    }
};

struct EstimateOptions {
    std::uint64_t budget = 1'000'000;
    std::optional<Subset> known_J0;  ///< skip selection and use this set (oracle comparison)
};

/// ceil(n^{1/(2 alpha + 1)}), at least 2.
inline int default_m_target(int n, double alpha) {
    const double v = std::pow(static_cast<double>(n), 1.0 / (2.0 * alpha + 1.0));
    return std::max(2, static_cast<int>(std::ceil(v - 1e-9)));
}

/// Selects on rows [0, n) and fits least squares on V_{selected u {target}} over rows [n, 2n).
inline ComponentEstimate estimate_component(const Dataset& data, const BasisSpec& spec, int qstar, double sigma2,
                                            int target, int m_target, const EstimateOptions& opt = {}) {
    data.validate();
    if (data.n() % 2 != 0) throw ValidationError("estimate_component: sample size must be even");
    if (target < 0 || target >= data.q()) throw ValidationError("estimate_component: target out of range");
    if (m_target < 1) throw ValidationError("estimate_component: m_target must be >= 1");
    const int n = data.n() / 2;
    const Dataset first = data.rows(0, n);
    const Dataset second = data.rows(n, n);
    ComponentEstimate est;
    est.target = target;
    est.m_target = m_target;
    est.n_half = n;
    est.centered = spec.centered[static_cast<std::size_t>(target)];
    if (opt.known_J0) {
        est.selected = *opt.known_J0;
    } else {
        SelectionOptions sopt;
        sopt.budget = opt.budget;
        est.selected = select_exhaustive(first, spec, qstar, sigma2, sopt).chosen;
    }
    BasisSpec spec2 = spec;
    spec2.m[static_cast<std::size_t>(target)] = m_target;
    const DesignBlocks blocks = build_design(second.X, spec2);
    const Subset J = set_union(est.selected, Subset{target});
    const Matrix A = blocks.columns(J);
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < A.cols()) {
        const Vector diag = qr.matrixR().diagonal().cwiseAbs();
        throw ValidationError("estimate_component: second-half design is rank deficient (rank " +
                              std::to_string(qr.rank()) + " of " + std::to_string(A.cols()) + ", |R| diagonal ratio " +
                              std::to_string(diag.minCoeff() / diag.maxCoeff()) + ")");
    }
    const Vector beta = qr.solve(second.Y);
    // columns of A are scaled by 1/sqrt(n): rescale to coefficients of the basis functions
    int off = 0;
    for (int j : J) {
        if (j == target) break;
        off += blocks.dims[static_cast<std::size_t>(j)];
    }
    const int w = blocks.dims[static_cast<std::size_t>(target)];
    est.coefficients = beta.segment(off, w) / std::sqrt(static_cast<double>(n));
    return est;
}

/// ||f_target - f_hat||^2 under the design law.
inline double component_risk(const AdditiveModel& model, const ComponentEstimate& est,
                             const DesignLaw& law = DesignLaw::independent_uniform()) {
    const std::vector<double> fhat = est.theta();
    const std::vector<double>& th = model.coefficients(est.target);
    if (law.uniform_marginals()) {
        double acc = 0.0;
        const std::size_t len = std::max(th.size(), fhat.size());
        for (std::size_t k = 0; k < len; ++k) {
            const double a = k < th.size() ? th[k] : 0.0;
            const double b = k < fhat.size() ? fhat[k] : 0.0;
            acc += (a - b) * (a - b);
        }
        return acc;
    }
    double acc = 0.0;
    for (int g = 0; g < kQuadratureNodes; ++g) {
        const double x = (g + 0.5) / kQuadratureNodes;
        const double diff = eval_series(th, x) - eval_series(fhat, x);
        acc += diff * diff * law.density(est.target, x);
    }
    return acc / kQuadratureNodes;
}

struct RatePoint {
    int n = 0;
    int m_target = 0;
    double mean_risk = 0.0;
    double stderr_ = 0.0;
    std::vector<double> risks;
};

struct RateResult {
    std::vector<RatePoint> points;
    std::optional<double> slope;
    double band_low = 0.0;
    double band_high = 0.0;
    double target_slope = 0.0;
    bool degenerate = false;  ///< all risks vanish: exact representation
    int errors = 0;
};

/// Mean risk over `reps` replications at each per-half size in n_grid, log-log slope and a
/// 95% percentile bootstrap band (replications resampled within each n).
inline RateResult rate_experiment(const ExperimentConfig& c, const std::vector<int>& n_grid, int reps,
                                  int bootstrap = 1000) {
    if (n_grid.size() < 4) throw ValidationError("rate_experiment: insufficient grid (need at least 4 sample sizes)");
    if (reps < 10) throw ValidationError("rate_experiment: reps must be >= 10");
    if (c.s < 1) throw ValidationError("rate_experiment: needs s >= 1 active components");
    ExperimentSetup st = build_setup(c);
    if (!contains(st.model.J0, c.target)) {
        // move the first active component onto the target covariate
        const int from = st.model.J0.front();
        std::swap(st.model.theta[static_cast<std::size_t>(from)], st.model.theta[static_cast<std::size_t>(c.target)]);
        st.model.J0.front() = c.target;
        std::sort(st.model.J0.begin(), st.model.J0.end());
    }
    RateResult res;
    res.target_slope = -2.0 * c.alpha / (2.0 * c.alpha + 1.0);
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        const int n = n_grid[gi];
        RatePoint pt;
        pt.n = n;
        pt.m_target = c.m_target.value_or(default_m_target(n, c.alpha));
        for (int r = 0; r < reps; ++r) {
            const std::uint64_t idx = static_cast<std::uint64_t>(gi) * 1'000'003ULL + static_cast<std::uint64_t>(r);
            const Matrix X = gen_design(st.law, 2 * n, c.q, derive_seed(c.seed, Stream::design, idx));
            const Vector Y = gen_response(st.model, X, derive_seed(c.seed, Stream::noise, idx));
            try {
                EstimateOptions opt;
                opt.budget = c.budget;
                const auto est = estimate_component({X, Y}, st.spec, c.qstar, c.penalty_sigma2(), c.target, pt.m_target, opt);
                pt.risks.push_back(component_risk(st.model, est, st.law));
            } catch (const std::exception&) {
                ++res.errors;
            }
        }
        if (pt.risks.empty()) throw std::runtime_error("rate_experiment: every replication failed at n=" + std::to_string(n));
        double mean = 0.0;
        for (double v : pt.risks) mean += v;
        mean /= static_cast<double>(pt.risks.size());
        double var = 0.0;
        for (double v : pt.risks) var += (v - mean) * (v - mean);
        var /= std::max<double>(1.0, static_cast<double>(pt.risks.size()) - 1.0);
        pt.mean_risk = mean;
        pt.stderr_ = std::sqrt(var / static_cast<double>(pt.risks.size()));
        res.points.push_back(std::move(pt));
    }
    std::vector<double> x, y;
    for (const auto& p : res.points) {
        x.push_back(p.n);
        y.push_back(p.mean_risk);
    }
    if (std::all_of(y.begin(), y.end(), [](double v) { return v < 1e-20; })) {
        res.degenerate = true;
        return res;
    }
    res.slope = loglog_slope(x, y);
    Rng rng = make_rng(derive_seed(c.seed, Stream::bootstrap, 0));
    std::vector<double> slopes;
    slopes.reserve(static_cast<std::size_t>(bootstrap));
    for (int b = 0; b < bootstrap; ++b) {
        std::vector<double> yb;
        for (const auto& p : res.points) {
            std::uniform_int_distribution<std::size_t> pick(0, p.risks.size() - 1);
            double m = 0.0;
            for (std::size_t i = 0; i < p.risks.size(); ++i) m += p.risks[pick(rng)];
            yb.push_back(std::max(m / static_cast<double>(p.risks.size()), 1e-300));
        }
        slopes.push_back(loglog_slope(x, yb));
    }
    std::sort(slopes.begin(), slopes.end());
    res.band_low = slopes[static_cast<std::size_t>(0.025 * (slopes.size() - 1))];
    res.band_high = slopes[static_cast<std::size_t>(0.975 * (slopes.size() - 1))];
    return res;
}

}  // namespace addsel
