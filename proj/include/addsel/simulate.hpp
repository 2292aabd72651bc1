#pragma once

// Synthetic sparse additive models, seeded selection trials and truncation-rate experiments.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "addsel/basis.hpp"
#include "addsel/config.hpp"
#include "addsel/diagnostics.hpp"
#include "addsel/error.hpp"
#include "addsel/geometry.hpp"
#include "addsel/model.hpp"
#include "addsel/population.hpp"
#include "addsel/rng.hpp"
#include "addsel/selection.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

inline Matrix gen_design(const DesignLaw& law, int n, int q, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return sample_design(law, n, q, rng);
}

/// n x q matrix of i.i.d. N(0, 1/n) entries as unit-width blocks (population Gram I).
inline DesignBlocks gen_gaussian_blocks(int n, int q, std::uint64_t seed) {
    if (n < 1 || q < 1) throw ValidationError("gen_gaussian_blocks: n, q must be >= 1");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> z(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
    Matrix A(n, q);
    for (int j = 0; j < q; ++j)
        for (int i = 0; i < n; ++i) A(i, j) = z(rng);
    return DesignBlocks::from_matrix(std::move(A), std::vector<int>(static_cast<std::size_t>(q), 1));
}

/// Options for the component generator.
struct ModelShape {
    std::string kind = "body";  ///< body: frequencies 1..2 mixed toward a pure frequency-1 profile; powerlaw
    int body_frequencies = 2;
    int tail_start = 33;      ///< first basis index carrying tail energy
    int tail_length = 32;     ///< number of tail basis functions
    int powerlaw_frequencies = 256;
};

namespace detail {

inline double sobolev_of(const std::vector<double>& th, double alpha) {
    double acc = 0.0;
    for (std::size_t idx = 1; idx < th.size(); ++idx) {
        const double freq = static_cast<double>((idx + 1) / 2);
        acc += std::pow(2.0 * std::numbers::pi * freq, 2.0 * alpha) * th[idx] * th[idx];
    }
    return acc;
}

inline double energy(const std::vector<double>& th) {
    double acc = 0.0;
    for (double v : th) acc += v * v;
    return acc;
}

inline void normalize(std::vector<double>& th) {
    const double e = std::sqrt(energy(th));
    if (e > 0.0)
        for (double& v : th) v /= e;
}

/// Unit-energy combination sqrt(1-tau) * body + sqrt(tau) * tail (disjoint supports).
inline std::vector<double> combine(const std::vector<double>& body, const std::vector<double>& tail, double tau) {
    std::vector<double> out(std::max(body.size(), tail.size()), 0.0);
    for (std::size_t i = 0; i < body.size(); ++i) out[i] += std::sqrt(1.0 - tau) * body[i];
    for (std::size_t i = 0; i < tail.size(); ++i) out[i] += std::sqrt(tau) * tail[i];
    return out;
}

}  // namespace detail

/// Draws s active components with ||f_j||^2 = kappa1 (uniform density) inside the Sobolev ball W(alpha, K).
inline AdditiveModel gen_model(int q, int s, double alpha, double K, double kappa1, double tail_fraction,
                               std::uint64_t seed, const ModelShape& shape = {}) {
    if (s < 0 || s > q) throw ValidationError("gen_model: need 0 <= s <= q");
    if (!(alpha > 0.5)) throw ValidationError("gen_model: alpha must be > 1/2");
    if (!(K > 0.0)) throw ValidationError("gen_model: K must be > 0");
    if (!(kappa1 > 0.0)) throw ValidationError("gen_model: kappa1 must be > 0");
    if (!(tail_fraction >= 0.0 && tail_fraction < 1.0)) throw ValidationError("gen_model: tail_fraction must lie in [0,1)");
    if (shape.kind != "body" && shape.kind != "powerlaw") throw ValidationError("gen_model: unknown shape " + shape.kind);
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    AdditiveModel model;
    model.q = q;
    model.theta.assign(static_cast<std::size_t>(q), {});
    model.alpha.assign(static_cast<std::size_t>(q), alpha);
    model.K.assign(static_cast<std::size_t>(q), K);
    std::vector<int> idx(static_cast<std::size_t>(q));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    model.J0.assign(idx.begin(), idx.begin() + s);
    std::sort(model.J0.begin(), model.J0.end());
    const double K2 = K * K;
    for (int j : model.J0) {
        std::vector<double> tail;
        if (tail_fraction > 0.0) {
            tail.assign(static_cast<std::size_t>(shape.tail_start - 1 + shape.tail_length), 0.0);
            for (int k = shape.tail_start; k < shape.tail_start + shape.tail_length; ++k) {
                const double freq = static_cast<double>(k / 2);
                const double sign = normal(rng) < 0.0 ? -1.0 : 1.0;
                tail[static_cast<std::size_t>(k - 1)] = sign * std::pow(freq, -(alpha + 0.55));
            }
            detail::normalize(tail);
        }
        std::vector<double> unit;
        if (shape.kind == "powerlaw") {
            std::vector<double> body(static_cast<std::size_t>(2 * shape.powerlaw_frequencies + 1), 0.0);
            for (int k = 2; k <= 2 * shape.powerlaw_frequencies + 1; ++k) {
                const double sign = normal(rng) < 0.0 ? -1.0 : 1.0;
                body[static_cast<std::size_t>(k - 1)] = sign * std::pow(static_cast<double>(k / 2), -(alpha + 0.55));
            }
            detail::normalize(body);
            unit = detail::combine(body, tail, tail_fraction);
            if (kappa1 * detail::sobolev_of(unit, alpha) > K2)
                throw ValidationError("gen_model: kappa1 infeasible for the Sobolev radius; feasible maximum is " +
                                      std::to_string(K2 / detail::sobolev_of(unit, alpha)));
        } else {
            const int len = 2 * shape.body_frequencies + 1;
            std::vector<double> body(static_cast<std::size_t>(len), 0.0), pure(3, 0.0);
            for (int k = 2; k <= len; ++k) body[static_cast<std::size_t>(k - 1)] = normal(rng);
            detail::normalize(body);
            const double ang = 2.0 * std::numbers::pi * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            pure[1] = std::cos(ang);
            pure[2] = std::sin(ang);
            auto mix = [&](double w) {
                std::vector<double> b(body.size(), 0.0);
                for (std::size_t i = 0; i < b.size(); ++i) b[i] = w * body[i] + (1.0 - w) * (i < 3 ? pure[i] : 0.0);
                detail::normalize(b);
                return detail::combine(b, tail, tail_fraction);
            };
            auto feasible = [&](double w) { return kappa1 * detail::sobolev_of(mix(w), alpha) <= K2; };
            if (!feasible(0.0))
                throw ValidationError("gen_model: kappa1 infeasible for the Sobolev radius; feasible maximum is " +
                                      std::to_string(K2 / detail::sobolev_of(mix(0.0), alpha)));
            double w = 1.0;
            if (!feasible(1.0)) {
                double lo = 0.0, hi = 1.0;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (feasible(mid) ? lo : hi) = mid;
                }
                w = lo;
            }
            unit = mix(w);
        }
        for (double& v : unit) v *= std::sqrt(kappa1);
        model.theta[static_cast<std::size_t>(j)] = std::move(unit);
    }
    model.validate();
    return model;
}

/// Y^i = sum_{j in J0} f_j(X^i_j) + sigma z^i.
inline Vector gen_response(const AdditiveModel& model, const Matrix& X, std::uint64_t seed) {
    if (X.cols() != model.q) throw ValidationError("gen_response: X has " + std::to_string(X.cols()) +
                                                   " columns, model has q=" + std::to_string(model.q));
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector Y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double v = 0.0;
        for (int j : model.J0) v += model.component(j, X(i, j));
        Y(i) = v;
    }
    if (model.sigma > 0.0)
        for (Eigen::Index i = 0; i < X.rows(); ++i) Y(i) += model.sigma * normal(rng);
    return Y;
}

/// Smallest integer m with m >= (C K^2 q* (1 + eps') / (c' (1 - rho^2) kappa))^{1/(2 alpha)}.
inline int m_lower_bound(double Cj, double Kj, int qstar, double eps_prime, double cprime, double rho, double kappa,
                         double alpha_j) {
    if (!(rho < 1.0)) throw AssumptionViolation("m_lower_bound: rho must be < 1");
    if (!(Cj > 0.0 && Kj > 0.0 && qstar > 0 && cprime > 0.0 && kappa > 0.0 && alpha_j > 0.0) || eps_prime < 0.0 || rho < 0.0)
        throw ValidationError("m_lower_bound: inputs must be positive");
    const double base = Cj * Kj * Kj * qstar * (1.0 + eps_prime) / (cprime * (1.0 - rho * rho) * kappa);
    const double v = std::pow(base, 1.0 / (2.0 * alpha_j));
    // guard against pow landing a hair above an exact integer
    return std::max(1, static_cast<int>(std::ceil(v - 1e-12 * std::max(1.0, v))));
}

/// pi^{-2 alpha} / c: tail energy beyond basis index m is at most K^2 (pi m)^{-2 alpha} for the
/// uniform density, and at most 1/c times that under a density bounded below by c.
inline double default_truncation_constant(double alpha, double c) { return std::pow(std::numbers::pi, -2.0 * alpha) / c; }

inline DesignLaw design_law(const ExperimentConfig& c) {
    if (c.design_kind == "gaussian-copula") return DesignLaw::gaussian_copula(c.design_r);
    if (c.design_kind == "custom") return DesignLaw::custom({DensityTable(c.design_density)});
    if (c.design_kind == "gaussian-matrix")
        throw ConfigError("design.kind", "config key 'design.kind': gaussian-matrix is only available to diagnose");
    return DesignLaw::independent_uniform();
}

/// Everything fixed across the trials of one experiment.
struct ExperimentSetup {
    DesignLaw law;
    AdditiveModel model;
    BasisSpec spec;
    std::vector<int> m;  ///< truncation levels
    double rho = 0.0;
    double eps_prime = 0.0;
    KappaValues kappa;
    double truncation_constant = 0.0;
};

inline ExperimentSetup build_setup(const ExperimentConfig& c) {
    validate(c);
    ExperimentSetup st;
    st.law = design_law(c);
    st.law.check_compatible(c.q);
    ModelShape shape;
    shape.kind = c.shape;
    st.model = gen_model(c.q, c.s, c.alpha, c.K, c.kappa1, 0.0, derive_seed(c.seed, Stream::model, 0), shape);
    st.model.sigma = c.sigma;
    const double dens = st.law.density_bound(c.q);
    st.truncation_constant = c.C > 0.0 ? c.C : default_truncation_constant(c.alpha, dens);
    if (c.s > 0) st.kappa = kappa_values(st.model, st.law);
    if (c.fixed_m()) {
        st.m.assign(static_cast<std::size_t>(c.q), c.fixed_level());
    } else {
        if (c.s == 0) throw ConfigError("m_rule", "config key 'm_rule': eq7 needs s >= 1 (kappa is undefined)");
        const int qs = std::max(c.qstar, 1);
        if (!st.law.independent()) {
            const BasisSpec ref = BasisSpec::uniform(c.q, c.geometry_m);
            st.rho = rho_qstar(ref, st.law, qs, c.budget);
            st.eps_prime = epsilon_constants(ref, st.law, qs, c.budget).eps_prime_qstar;
        }
        const int level = m_lower_bound(st.truncation_constant, c.K, qs, st.eps_prime, c.cprime, st.rho,
                                        st.kappa.kappa, c.alpha);
        st.m.assign(static_cast<std::size_t>(c.q), std::max(level, 2));
    }
    st.spec = BasisSpec::uniform(c.q, 2);
    st.spec.m = st.m;
    if (c.tail_fraction > 0.0 && c.s > 0) {
        // regenerate with tail energy just beyond the truncation levels
        shape.tail_start = c.tail_start > 0 ? c.tail_start : *std::max_element(st.m.begin(), st.m.end()) + 1;
        st.model = gen_model(c.q, c.s, c.alpha, c.K, c.kappa1, c.tail_fraction, derive_seed(c.seed, Stream::model, 0), shape);
        st.model.sigma = c.sigma;
        st.kappa = kappa_values(st.model, st.law);
    }
    return st;
}

struct TrialDiagnostics {
    std::optional<double> delta_qstar;
    std::optional<bool> event_E;
    std::optional<bool> event_A;
};

struct TrialRecord {
    int index = 0;
    std::uint64_t seed = 0;
    Subset chosen;
    bool success = false;  ///< J0 subset of the selected set
    bool exact = false;    ///< J0 equals the selected set
    std::vector<CriterionValue> criterion;
    TrialDiagnostics diagnostics;
    std::optional<std::string> error;
};

struct TrialSummary {
    int trials = 0;
    int errors = 0;
    int successes = 0;
    int exact = 0;
    double success_freq = 0.0;
    double success_stderr = 0.0;
    double exact_freq = 0.0;
    double exact_stderr = 0.0;

    void add(const TrialRecord& r) {
        ++trials;
        if (r.error) ++errors;
        if (r.success) ++successes;
        if (r.exact) ++exact;
    }

    void finish() {
        if (trials == 0) return;
        const double T = trials;
        success_freq = successes / T;
        exact_freq = exact / T;
        success_stderr = std::sqrt(success_freq * (1.0 - success_freq) / T);
        exact_stderr = std::sqrt(exact_freq * (1.0 - exact_freq) / T);
    }
};

inline TrialRecord run_trial(const ExperimentConfig& c, const ExperimentSetup& st, int index) {
    TrialRecord rec;
    rec.index = index;
    rec.seed = derive_seed(c.seed, Stream::design, static_cast<std::uint64_t>(index));
    try {
        const Matrix X = gen_design(st.law, c.n, c.q, rec.seed);
        const Vector Y = gen_response(st.model, X, derive_seed(c.seed, Stream::noise, static_cast<std::uint64_t>(index)));
        const DesignBlocks blocks = build_design(X, st.spec);
        SelectionResult sel;
        if (c.search == "greedy") {
            sel = select_greedy(blocks, Y, c.qstar, c.penalty_sigma2());
        } else {
            SelectionOptions opt;
            opt.budget = c.budget;
            sel = select_exhaustive(blocks, Y, c.qstar, c.penalty_sigma2(), opt);
        }
        rec.chosen = sel.chosen;
        rec.criterion = std::move(sel.criterion);
        rec.success = is_subset_of(st.model.J0, rec.chosen);
        rec.exact = st.model.J0 == rec.chosen;
        if (c.diagnostics) {
            if (st.law.kind == DesignLaw::Kind::independent_uniform)
                rec.diagnostics.delta_qstar = rip_constant(blocks, c.qstar, st.model.J0, c.budget);
            rec.diagnostics.event_E = event_E_check(Dataset{X, Y}, st.spec, st.law, c.qstar, st.model.J0, c.delta, c.budget);
            if (c.s > 0) {
                GeometryReport g;
                g.rho_qstar = st.rho;
                g.kappa = st.kappa;
                rec.diagnostics.event_A = event_A_check(Dataset{X, Y}, st.model, st.spec, g, c.cprime, st.law);
            }
        }
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.success = false;
        rec.exact = false;
    }
    return rec;
}

/// Runs c.trials seeded trials on up to c.threads workers. `sink` receives records in trial order.
inline TrialSummary run_trials(const ExperimentConfig& c, const ExperimentSetup& st,
                               const std::function<void(const TrialRecord&)>& sink = {}) {
    TrialSummary sum;
    const int T = c.trials;
    const int workers = std::max(1, std::min(c.threads, T));
    if (workers <= 1) {
        for (int t = 0; t < T; ++t) {
            const TrialRecord r = run_trial(c, st, t);
            sum.add(r);
            if (sink) sink(r);
        }
        sum.finish();
        return sum;
    }
    std::vector<std::optional<TrialRecord>> slots(static_cast<std::size_t>(T));
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int t = next++; t < T; t = next++) {
                TrialRecord r = run_trial(c, st, t);
                {
                    std::lock_guard<std::mutex> lk(mu);
                    slots[static_cast<std::size_t>(t)] = std::move(r);
                }
                cv.notify_all();
            }
        });
    }
    for (int t = 0; t < T; ++t) {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return slots[static_cast<std::size_t>(t)].has_value(); });
        TrialRecord r = std::move(*slots[static_cast<std::size_t>(t)]);
        slots[static_cast<std::size_t>(t)].reset();
        lk.unlock();
        sum.add(r);
        if (sink) sink(r);
    }
    for (auto& th : pool) th.join();
    sum.finish();
    return sum;
}

inline TrialSummary run_trials(const ExperimentConfig& c, const std::function<void(const TrialRecord&)>& sink = {}) {
    return run_trials(c, build_setup(c), sink);
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct DecayResult {
    std::vector<int> m_grid;
    std::vector<double> l2_error;   ///< ||h - Pi_V h||^2 (exact tail energy)
    std::vector<double> sup_error;  ///< (sum of |theta_k| beyond m)^2, the sup-norm bound
    std::optional<double> l2_slope;
    std::optional<double> sup_slope;
    bool exact_representation = false;
};

/// Coefficients theta_{2k}, theta_{2k+1} ~ k^{-(alpha + 0.55)}, k <= kmax, scaled onto the Sobolev sphere of radius K.
inline std::vector<double> powerlaw_coefficients(double alpha, double K, int kmax, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> th(static_cast<std::size_t>(2 * kmax + 1), 0.0);
    for (int idx = 2; idx <= 2 * kmax + 1; ++idx)
        th[static_cast<std::size_t>(idx - 1)] = (coin(rng) ? 1.0 : -1.0) * std::pow(static_cast<double>(idx / 2), -(alpha + 0.55));
    const double scale = K / std::sqrt(detail::sobolev_of(th, alpha));
    for (double& v : th) v *= scale;
    return th;
}

/// Truncation errors of a Sobolev-ball function against the levels in m_grid, and their log-log slopes.
/// kmax = 0 picks 64 * max(m_grid) frequencies.
inline DecayResult approximation_decay_experiment(double alpha, double K, const std::vector<int>& m_grid,
                                                  std::uint64_t seed, int kmax = 0) {
    if (m_grid.size() < 4) throw ValidationError("approximation_decay_experiment: need at least 4 grid points");
    for (std::size_t i = 0; i < m_grid.size(); ++i)
        if (m_grid[i] < 1 || (i > 0 && m_grid[i] <= m_grid[i - 1]))
            throw ValidationError("approximation_decay_experiment: m_grid must be increasing and >= 1");
    if (kmax <= 0) kmax = 64 * m_grid.back();
    const std::vector<double> th = powerlaw_coefficients(alpha, K, kmax, seed);
    AdditiveModel h;
    h.q = 1;
    h.J0 = {0};
    h.theta = {th};
    h.alpha = {alpha};
    h.K = {K};
    DecayResult res;
    res.m_grid = m_grid;
    for (int m : m_grid) {
        res.l2_error.push_back(h.tail_energy(0, m));
        res.sup_error.push_back(h.tail_l1_sq(0, m));
    }
    if (std::all_of(res.l2_error.begin(), res.l2_error.end(), [](double e) { return e == 0.0; })) {
        res.exact_representation = true;
        return res;
    }
    std::vector<double> x(m_grid.begin(), m_grid.end());
    res.l2_slope = loglog_slope(x, res.l2_error);
    res.sup_slope = loglog_slope(x, res.sup_error);
    return res;
}

/// Smallest C with tail_energy(m) <= C K^2 m^{-2 alpha} at every grid level.
inline double calibrate_truncation_constant(const std::vector<double>& theta, double alpha, double K,
                                            const std::vector<int>& m_grid) {
    AdditiveModel h;
    h.q = 1;
    h.J0 = {0};
    h.theta = {theta};
    h.alpha = {alpha};
    h.K = {K};
    double C = 0.0;
    for (int m : m_grid) C = std::max(C, h.tail_energy(0, m) * std::pow(static_cast<double>(m), 2.0 * alpha) / (K * K));
    return C;
}

}  // namespace addsel
