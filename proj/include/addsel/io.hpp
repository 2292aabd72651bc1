#pragma once

// JSON encodings of reports and trial records.

#include <cmath>
#include <string>

#include <json.hpp>

#include "addsel/diagnostics.hpp"
#include "addsel/estimate.hpp"
#include "addsel/geometry.hpp"
#include "addsel/simulate.hpp"

namespace addsel {

using Json = nlohmann::ordered_json;

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const Subset& s) {
    Json a = Json::array();
    for (int j : s) a.push_back(j);
    return a;
}

inline Json to_json(const GeometryReport& g) {
    Json o;
    o["qstar"] = g.qstar;
    o["rho_qstar"] = g.rho_qstar;
    o["eps_2qstar"] = g.eps_2qstar;
    o["eps_prime_qstar"] = g.eps_prime_qstar;
    if (g.kappa) {
        o["kappa"] = g.kappa->kappa;
        o["kappa_l"] = g.kappa->kappa_l;
    } else {
        o["kappa"] = nullptr;
        o["kappa_l"] = nullptr;
    }
    o["phi_2qstar"] = g.phi_2qstar;
    o["density_bound"] = g.density_bound;
    o["ric_chain"] = g.ric_chain;
    return o;
}

inline Json to_json(const TrialRecord& r) {
    Json o;
    o["type"] = "trial";
    o["index"] = r.index;
    o["seed"] = r.seed;
    o["chosen"] = to_json(r.chosen);
    o["success"] = r.success;
    o["exact"] = r.exact;
    Json crit = Json::array();
    for (const auto& c : r.criterion) crit.push_back(Json{{"J", to_json(c.J)}, {"value", number_or_null(c.value)}});
    o["criterion"] = std::move(crit);
    Json d = Json::object();
    if (r.diagnostics.delta_qstar) d["delta_qstar"] = *r.diagnostics.delta_qstar;
    if (r.diagnostics.event_E) d["event_E"] = *r.diagnostics.event_E;
    if (r.diagnostics.event_A) d["event_A"] = *r.diagnostics.event_A;
    o["diagnostics"] = std::move(d);
    o["error"] = r.error ? Json(*r.error) : Json(nullptr);
    return o;
}

inline Json to_json(const TrialSummary& s) {
    Json o;
    o["type"] = "summary";
    o["trials"] = s.trials;
    o["errors"] = s.errors;
    o["successes"] = s.successes;
    o["exact"] = s.exact;
    o["success_freq"] = s.success_freq;
    o["success_stderr"] = s.success_stderr;
    o["exact_freq"] = s.exact_freq;
    o["exact_stderr"] = s.exact_stderr;
    return o;
}

inline Json to_json(const RateResult& r) {
    Json o;
    o["type"] = "rate";
    Json pts = Json::array();
    for (const auto& p : r.points)
        pts.push_back(Json{{"n", p.n}, {"m_target", p.m_target}, {"mean_risk", p.mean_risk}, {"stderr", p.stderr_},
                           {"reps", p.risks.size()}});
    o["points"] = std::move(pts);
    o["slope"] = r.slope ? Json(*r.slope) : Json(nullptr);
    o["band"] = r.slope ? Json::array({r.band_low, r.band_high}) : Json(nullptr);
    o["target_slope"] = r.target_slope;
    o["degenerate"] = r.degenerate;
    o["errors"] = r.errors;
    return o;
}

inline Json to_json(const DiagnosticsReport& d) {
    Json o;
    o["delta_qstar"] = d.delta_qstar ? Json(*d.delta_qstar) : Json(nullptr);
    Json ev = Json::array();
    for (const auto& [delta, holds] : d.event_E_holds) ev.push_back(Json{{"delta", delta}, {"holds", holds}});
    o["event_E"] = std::move(ev);
    o["event_A"] = d.event_A_holds ? Json(*d.event_A_holds) : Json(nullptr);
    Json bt = Json::object();
    for (const auto& [k, v] : d.bound_terms) bt[k] = number_or_null(v);
    o["bound_terms"] = std::move(bt);
    Json cs = Json::object();
    for (const auto& [k, v] : d.conditions) cs[k] = v;
    o["conditions"] = std::move(cs);
    o["cprime_ok"] = d.cprime_ok;
    return o;
}

}  // namespace addsel
