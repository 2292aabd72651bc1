#pragma once

// Command-line driver: geometry | simulate | estimate | diagnose.
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "addsel/config.hpp"
#include "addsel/diagnostics.hpp"
#include "addsel/estimate.hpp"
#include "addsel/geometry.hpp"
#include "addsel/io.hpp"
#include "addsel/simulate.hpp"

#ifndef ADDSEL_VERSION
#define ADDSEL_VERSION "0.0.0"
#endif

namespace addsel {

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level_from_env() {
    const char* v = std::getenv("ADDSEL_LOG");
    if (!v) return LogLevel::error;
    const std::string s(v);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::error;
}

struct CliOptions {
    std::string command;
    std::string config_path;
    std::string out_path;  ///< empty: standard output
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

namespace detail {

class Logger {
public:
    explicit Logger(std::ostream& err) : err_(err), level_(log_level_from_env()) {}
    void log(LogLevel at, const std::string& msg) const {
        if (static_cast<int>(at) <= static_cast<int>(level_)) {
            static const char* names[] = {"error", "info", "debug"};
            err_ << "[addsel " << names[static_cast<int>(at)] << "] " << msg << "\n";
        }
    }

private:
    std::ostream& err_;
    LogLevel level_;
};

inline Json manifest(const CliOptions& o, const ExperimentConfig& c) {
    Json m;
    m["command"] = o.command;
    m["config"] = o.config_path;
    m["seed"] = c.seed;
    m["version"] = ADDSEL_VERSION;
    m["outputs"] = Json::array({o.out_path.empty() ? std::string("-") : o.out_path});
    return Json{{"manifest", m}};
}

inline Json error_object(const std::string& kind, const std::string& message, const std::string& key = "") {
    Json e{{"kind", kind}, {"message", message}};
    if (!key.empty()) e["key"] = key;
    return Json{{"error", e}};
}

inline Json config_echo(const ExperimentConfig& c, const ExperimentSetup& st) {
    Json o;
    o["n"] = c.n;
    o["q"] = c.q;
    o["s"] = c.s;
    o["qstar"] = c.qstar;
    o["sigma"] = c.sigma;
    o["penalty_sigma2"] = c.penalty_sigma2();
    o["design"] = c.design_kind;
    o["J0"] = to_json(st.model.J0);
    o["m"] = st.m;
    return o;
}

inline Json cmd_geometry(const ExperimentConfig& c) {
    const ExperimentSetup st = build_setup(c);
    GeometryOptions opt;
    opt.grid_size = c.phi_grid;
    opt.budget = c.budget;
    const GeometryReport g = compute_geometry(st.spec, st.law, c.qstar, c.s > 0 ? &st.model : nullptr, opt);
    if (!(g.rho_qstar < 1.0))
        throw AssumptionViolation("rho_qstar = " + std::to_string(g.rho_qstar) + " violates rho < 1");
    Json o = to_json(g);
    o["type"] = "geometry";
    o["halving_chain_bound"] = halving_chain_bound(g.rho_qstar, c.qstar);
    o["setup"] = config_echo(c, st);
    return o;
}

inline Json cmd_estimate(const ExperimentConfig& c) {
    std::vector<int> grid = c.n_grid;
    if (grid.empty()) grid = {c.n, 2 * c.n, 4 * c.n, 8 * c.n};
    if (grid.size() < 4)
        throw ConfigError("n_grid", "config key 'n_grid': insufficient grid (need at least 4 sample sizes)");
    if (c.reps < 10) throw ConfigError("reps", "config key 'reps': must be >= 10");
    const RateResult r = rate_experiment(c, grid, c.reps);
    return to_json(r);
}

inline Json diagnose_gaussian_matrix(const ExperimentConfig& c) {
    const DesignBlocks blocks = gen_gaussian_blocks(c.n, c.q, derive_seed(c.seed, Stream::design, 0));
    const RipResult rip = rip_constant_detail(blocks, c.qstar, Subset{}, c.budget);
    DiagnosticsReport rep;
    rep.delta_qstar = rip.delta;
    rep.event_E_holds.emplace_back(c.delta, event_E_check(blocks, c.qstar, Subset{}, c.delta, c.budget));
    rep.cprime_ok = check_cprime(c.delta, c.cprime);
    Json o = to_json(rep);
    o["type"] = "diagnostics";
    o["argmax"] = to_json(rip.argmax);
    o["design"] = "gaussian-matrix";
    return o;
}

inline Json cmd_diagnose(const ExperimentConfig& c) {
    if (c.design_kind == "gaussian-matrix") return diagnose_gaussian_matrix(c);
    const ExperimentSetup st = build_setup(c);
    DiagnosticsReport rep;
    rep.cprime_ok = check_cprime(c.delta, c.cprime);
    std::optional<double> p_fail;
    if (c.diagnose_data) {
        const Matrix X = gen_design(st.law, c.n, c.q, derive_seed(c.seed, Stream::design, 0));
        const Vector Y = gen_response(st.model, X, derive_seed(c.seed, Stream::noise, 0));
        const DesignBlocks blocks = build_design(X, st.spec);
        if (st.law.kind == DesignLaw::Kind::independent_uniform)
            rep.delta_qstar = rip_constant(blocks, c.qstar, st.model.J0, c.budget);
        for (double d : {c.delta, 0.25, 0.75}) {
            if (d == c.delta && !rep.event_E_holds.empty()) continue;
            rep.event_E_holds.emplace_back(d, event_E_check(Dataset{X, Y}, st.spec, st.law, c.qstar, st.model.J0, d, c.budget));
        }
        if (c.s > 0) {
            GeometryReport g;
            g.rho_qstar = st.rho;
            g.kappa = st.kappa;
            rep.event_A_holds = event_A_check(Dataset{X, Y}, st.model, st.spec, g, c.cprime, st.law);
        }
        if (c.bound_trials > 0)
            p_fail = estimate_event_E_failure(st.spec, st.law, c.n, c.qstar, st.model.J0, c.delta, c.bound_trials,
                                              c.seed, c.budget)
                         .failure;
    }
    std::vector<int> d_l;
    for (int l = 1; l <= std::max(c.qstar, c.s); ++l) d_l.push_back(st.spec.d_l(l));
    if (c.s > 0 && c.qstar >= c.s) {
        BoundParams bp;
        bp.n = c.n;
        bp.sigma2 = c.sigma * c.sigma;
        bp.rho = st.rho;
        bp.kappa_l = st.kappa.kappa_l;
        bp.d_l = d_l;
        bp.s = c.s;
        bp.qstar = c.qstar;
        bp.q = c.q;
        bp.delta = c.delta;
        bp.cprime = c.cprime;
        bp.p_event_E_fail = p_fail;
        bp.parametric = c.tail_fraction == 0.0 && c.shape == "body";
        rep.bound_terms = to_map(selection_error_terms(bp));
        ConditionParams cp;
        cp.n = c.n;
        cp.q = c.q;
        cp.s = c.s;
        cp.qstar = c.qstar;
        cp.sigma2 = c.sigma * c.sigma;
        cp.rho_qstar = st.rho;
        cp.rho_s = st.rho;
        cp.kappa = st.kappa.kappa;
        cp.kappa1 = st.kappa.kappa_l.front();
        cp.kappa_l = st.kappa.kappa_l;
        cp.d_l = d_l;
        cp.alpha = c.alpha;
        cp.c3 = c.c3;
        cp.parametric = bp.parametric;
        if (!st.law.independent())
            cp.eps_s = epsilon_constants(BasisSpec::uniform(c.q, c.geometry_m), st.law, c.s, c.budget).eps_2qstar;
        rep.conditions = corollary_conditions(cp);
    }
    Json o = to_json(rep);
    o["type"] = "diagnostics";
    o["event_E_failure_estimate"] = p_fail ? Json(*p_fail) : Json(nullptr);
    if (c.qstar >= 1) {
        const auto sc = subset_count_bound(c.q, c.qstar);
        o["subset_count"] = Json{{"exact", sc.exact.str()}, {"bound", sc.bound.str(12)}, {"holds", sc.holds()}};
    }
    o["setup"] = config_echo(c, st);
    return o;
}

}  // namespace detail

/// Runs the CLI on argv-style arguments (args[0] is the program name).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Projection-norm variable selection for sparse additive models"};
    app.set_version_flag("--version", std::string(ADDSEL_VERSION));
    CliOptions o;
    std::uint64_t seed = 0;
    int threads = 0;
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"geometry", "population geometry report (single JSON object)"},
        {"simulate", "seeded selection trials (JSON Lines, one record per trial plus a summary)"},
        {"estimate", "split-sample component estimation rate experiment"},
        {"diagnose", "events, RIP constant, probability bounds and sample-size conditions"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config_path, "key=value experiment config")->required();
        sub->add_option("--out", o.out_path, "output file (default: standard output)");
        sub->add_option("--seed", seed, "master seed, overrides the config");
        sub->add_option("--threads", threads, "worker threads, overrides the config")->check(CLI::PositiveNumber);
        sub->callback([&o, name = name] { o.command = name; });
    }
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << ADDSEL_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << detail::error_object("usage", e.what()).dump() << "\n";
        return 2;
    }
    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) o.seed = seed;
        if (sub->count("--threads")) o.threads = threads;
    }
    const detail::Logger log(err);

    std::unique_ptr<std::ofstream> file;
    std::ostream* sink = &out;
    auto open_sink = [&] {
        if (!o.out_path.empty() && !file) {
            file = std::make_unique<std::ofstream>(o.out_path, std::ios::binary | std::ios::trunc);
            if (!*file) throw std::runtime_error("cannot open output file '" + o.out_path + "'");
            sink = file.get();
        }
    };
    auto fail = [&](int code, const Json& e) {
        try {
            open_sink();
            *sink << e.dump() << "\n";
            sink->flush();
        } catch (const std::exception&) {
        }
        err << e.dump() << "\n";
        return code;
    };

    ExperimentConfig cfg;
    try {
        cfg = load_config(o.config_path);
        if (o.seed) cfg.seed = *o.seed;
        if (o.threads) cfg.threads = *o.threads;
        validate(cfg);
    } catch (const ConfigError& e) {
        return fail(2, detail::error_object("config", e.what(), e.key()));
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        open_sink();
        *sink << detail::manifest(o, cfg).dump() << "\n";
        if (o.command == "geometry") {
            *sink << detail::cmd_geometry(cfg).dump() << "\n";
        } else if (o.command == "simulate") {
            const ExperimentSetup st = build_setup(cfg);
            Json setup = detail::config_echo(cfg, st);
            setup["type"] = "setup";
            *sink << setup.dump() << "\n";
            sink->flush();
            TrialSummary sum = run_trials(cfg, st, [&](const TrialRecord& r) {
                *sink << to_json(r).dump() << "\n";
                sink->flush();
                log.log(LogLevel::debug, "trial " + std::to_string(r.index) + " done");
            });
            *sink << to_json(sum).dump() << "\n";
        } else if (o.command == "estimate") {
            *sink << detail::cmd_estimate(cfg).dump() << "\n";
        } else if (o.command == "diagnose") {
            *sink << detail::cmd_diagnose(cfg).dump() << "\n";
        }
        sink->flush();
    } catch (const ConfigError& e) {
        return fail(2, detail::error_object("config", e.what(), e.key()));
    } catch (const AssumptionViolation& e) {
        return fail(1, detail::error_object("assumption", e.what()));
    } catch (const BudgetExceeded& e) {
        return fail(1, detail::error_object("budget", e.what()));
    } catch (const SingularGram& e) {
        return fail(1, detail::error_object("singular_gram", e.what()));
    } catch (const std::exception& e) {
        return fail(1, detail::error_object("runtime", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.log(LogLevel::info, o.command + " finished in " + std::to_string(secs) + " s");
    return 0;
}

}  // namespace addsel
