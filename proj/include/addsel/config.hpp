#pragma once

// Flat key=value experiment configuration.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "addsel/error.hpp"

namespace addsel {

struct ExperimentConfig {
    // model and design
    int n = 200;
    int q = 8;
    int s = 2;
    int qstar = 2;
    double sigma = 0.5;
    double alpha = 2.0;
    double K = 50.0;
    double kappa1 = 1.0;
    std::string design_kind = "independent-uniform";  ///< independent-uniform | gaussian-copula | custom | gaussian-matrix
    double design_r = 0.0;
    std::vector<double> design_density;  ///< custom piecewise-linear density values on a uniform grid
    std::string shape = "body";          ///< body | powerlaw
    double tail_fraction = 0.0;
    int tail_start = 0;  ///< first basis index of the tail; 0 = just beyond the largest m_j

    // truncation
    std::string m_rule = "eq7";  ///< eq7 | fixed:<int>
    double C = 0.0;              ///< truncation constant; 0 = pi^{-2 alpha} / c
    int geometry_m = 5;          ///< reference level for the population geometry used by eq7

    // selection
    double cprime = 0.001;
    double delta = 0.5;
    std::optional<double> sigma2;  ///< penalty variance; defaults to sigma^2
    std::string search = "exhaustive";
    std::uint64_t budget = 1'000'000;

    // harness
    int trials = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    bool diagnostics = false;
    int bound_trials = 200;  ///< Monte Carlo draws for P(E^c)
    double c3 = 1.0;
    int phi_grid = 4096;
    bool diagnose_data = true;

    // estimation
    int target = 0;
    std::optional<int> m_target;
    std::vector<int> n_grid;
    int reps = 20;

    double penalty_sigma2() const { return sigma2.value_or(sigma * sigma); }

    bool fixed_m() const { return m_rule.rfind("fixed:", 0) == 0; }

    int fixed_level() const { return std::stoi(m_rule.substr(6)); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    T out{};
    is >> out;
    if (is.fail() || !is.eof()) throw ConfigError(key, "config key '" + key + "': cannot parse value '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
    std::vector<T> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_number<T>(key, item));
    }
    return out;
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown or duplicate keys raise ConfigError.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line, "config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("", "config line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw ConfigError(key, "config key '" + key + "' given twice");
        kv[key] = value;
    }
    return kv;
}

inline ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
    using detail::parse_bool;
    using detail::parse_number;
    ExperimentConfig c;
    for (const auto& [k, v] : kv) {
        if (k == "n") c.n = parse_number<int>(k, v);
        else if (k == "q") c.q = parse_number<int>(k, v);
        else if (k == "s") c.s = parse_number<int>(k, v);
        else if (k == "qstar") c.qstar = parse_number<int>(k, v);
        else if (k == "sigma") c.sigma = parse_number<double>(k, v);
        else if (k == "alpha") c.alpha = parse_number<double>(k, v);
        else if (k == "K") c.K = parse_number<double>(k, v);
        else if (k == "kappa1") c.kappa1 = parse_number<double>(k, v);
        else if (k == "design.kind") c.design_kind = v;
        else if (k == "design.r") c.design_r = parse_number<double>(k, v);
        else if (k == "design.density") c.design_density = detail::parse_list<double>(k, v);
        else if (k == "shape") c.shape = v;
        else if (k == "tail_fraction") c.tail_fraction = parse_number<double>(k, v);
        else if (k == "tail_start") c.tail_start = parse_number<int>(k, v);
        else if (k == "m_rule") c.m_rule = v;
        else if (k == "C") c.C = parse_number<double>(k, v);
        else if (k == "geometry.m") c.geometry_m = parse_number<int>(k, v);
        else if (k == "cprime") c.cprime = parse_number<double>(k, v);
        else if (k == "delta") c.delta = parse_number<double>(k, v);
        else if (k == "sigma2") c.sigma2 = parse_number<double>(k, v);
        else if (k == "search") c.search = v;
        else if (k == "budget") c.budget = parse_number<std::uint64_t>(k, v);
        else if (k == "trials") c.trials = parse_number<int>(k, v);
        else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
        else if (k == "threads") c.threads = parse_number<int>(k, v);
        else if (k == "diagnostics") c.diagnostics = parse_bool(k, v);
        else if (k == "bound_trials") c.bound_trials = parse_number<int>(k, v);
        else if (k == "c3") c.c3 = parse_number<double>(k, v);
        else if (k == "phi_grid") c.phi_grid = parse_number<int>(k, v);
        else if (k == "diagnose.data") c.diagnose_data = parse_bool(k, v);
        else if (k == "target") c.target = parse_number<int>(k, v);
        else if (k == "m_target") c.m_target = parse_number<int>(k, v);
        else if (k == "n_grid") c.n_grid = detail::parse_list<int>(k, v);
        else if (k == "reps") c.reps = parse_number<int>(k, v);
        else throw ConfigError(k, "unknown config key '" + k + "'");
    }
    return c;
}

/// Semantic checks shared by every command.
inline void validate(const ExperimentConfig& c) {
    auto need = [](bool ok, const std::string& key, const std::string& what) {
        if (!ok) throw ConfigError(key, "config key '" + key + "': " + what);
    };
    need(c.n >= 1, "n", "must be >= 1");
    need(c.q >= 1, "q", "must be >= 1");
    need(c.s >= 0 && c.s <= c.q, "s", "must satisfy 0 <= s <= q");
    need(c.qstar >= 0 && c.qstar <= c.q, "qstar", "must satisfy 0 <= qstar <= q");
    need(c.sigma >= 0.0, "sigma", "must be >= 0");
    need(c.alpha > 0.5, "alpha", "must be > 1/2");
    need(c.K > 0.0, "K", "must be > 0");
    need(c.kappa1 > 0.0, "kappa1", "must be > 0");
    need(c.design_kind == "independent-uniform" || c.design_kind == "gaussian-copula" || c.design_kind == "custom" ||
             c.design_kind == "gaussian-matrix",
         "design.kind", "must be independent-uniform, gaussian-copula, custom or gaussian-matrix");
    need(std::abs(c.design_r) < 1.0, "design.r", "must satisfy |r| < 1");
    need(c.design_kind != "custom" || c.design_density.size() >= 2, "design.density",
         "custom designs need at least two density values");
    need(c.shape == "body" || c.shape == "powerlaw", "shape", "must be body or powerlaw");
    need(c.tail_fraction >= 0.0 && c.tail_fraction < 1.0, "tail_fraction", "must lie in [0,1)");
    need(c.tail_start >= 0, "tail_start", "must be >= 0");
    if (c.fixed_m()) {
        int level = 0;
        try {
            level = c.fixed_level();
        } catch (const std::exception&) {
            throw ConfigError("m_rule", "config key 'm_rule': expected fixed:<int> or eq7");
        }
        need(level >= 1, "m_rule", "fixed level must be >= 1");
    } else {
        need(c.m_rule == "eq7", "m_rule", "expected fixed:<int> or eq7");
    }
    need(c.C >= 0.0, "C", "must be >= 0");
    need(c.geometry_m >= 2, "geometry.m", "must be >= 2");
    need(c.cprime > 0.0 && c.cprime < 1.0, "cprime", "must lie in (0,1)");
    need(c.delta > 0.0 && c.delta < 1.0, "delta", "must lie in (0,1)");
    need(!c.sigma2 || *c.sigma2 >= 0.0, "sigma2", "must be >= 0");
    need(c.search == "exhaustive" || c.search == "greedy", "search", "must be exhaustive or greedy");
    need(c.trials >= 0, "trials", "must be >= 0");
    need(c.threads >= 1, "threads", "must be >= 1");
    need(c.bound_trials >= 0, "bound_trials", "must be >= 0");
    need(c.c3 > 0.0, "c3", "must be > 0");
    need(c.phi_grid >= 256, "phi_grid", "must be >= 256");
    need(c.target >= 0 && c.target < c.q, "target", "must be a covariate index in [0, q)");
    need(!c.m_target || *c.m_target >= 2, "m_target", "must be >= 2");
    need(c.reps >= 1, "reps", "must be >= 1");
    for (int v : c.n_grid) need(v >= 1, "n_grid", "entries must be >= 1");
}

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c = config_from_map(parse_key_values(text));
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace addsel
