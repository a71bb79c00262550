// Copyright 2026 The tdlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TDLEARN_PIPELINE_H
#define TDLEARN_PIPELINE_H

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdlearn/derivative.h"
#include "tdlearn/overlaps.h"
#include "tdlearn/probes.h"
#include "tdlearn/rev.h"
#include "tdlearn/solver.h"

namespace tdl {

using json = nlohmann::json;

enum class LearnMode { oracle, sampled };
enum class RegionPolicy { error, clip };
/// Which single-site dissipative rates the learner solves for.
enum class DissipatorSet { all, skeleton, none };

struct LearnConstants {
    double c_shadow = DEFAULT_C_SHADOW;
    double c_node = DEFAULT_C_NODE;
    double c_pert = DEFAULT_C_PERT;
    double c_poly = 1.0;
    /// C_int of the final degree-m fit; 0 means calibrate.
    double c_int = 0;
    LRParams lr;
};

struct LearnConfig {
    /// Ground truth driving the simulated device (absent when learning from stored snapshots).
    std::optional<LindbladAnsatz> truth;
    /// Learner-side term set (schedules ignored).
    LindbladAnsatz skeleton;
    int m = 1;
    double T = 1;
    double eps = 0.1;
    double delta = 0.1;
    LearnMode mode = LearnMode::oracle;
    uint64_t seed = 1;
    size_t region_cap = 3;
    RegionPolicy region_policy = RegionPolicy::clip;
    DissipatorSet dissipators = DissipatorSet::all;
    /// Prior bounds on |h| and on the rates, used only by the planner (Dyson degree).
    double coeff_bound = 1.0;
    double rate_bound = 0.5;
    FitMode derivative_fit = FitMode::least_squares;
    FitMode schedule_fit = FitMode::least_squares;
    int degree_cap = 200;
    /// 0 means 1 / (60 s^2).
    double eps_sdp = 0;
    /// 0 means the planner's budget.
    double shots_per_time = 0;
    int rev_iterations = 5000;
    double holdout_eps = 0.1;
    double holdout_delta = 0.05;
    LearnConstants constants;
};

// ---------------------------------------------------------------------------------------------
// Configuration parsing.
// ---------------------------------------------------------------------------------------------

namespace internal {

inline void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
    if (!j.is_object()) {
        throw ParseError(where + ": expected an object");
    }
    for (const auto &[key, value] : j.items()) {
        bool ok = false;
        for (const char *a : allowed) {
            ok |= key == a;
        }
        if (!ok) {
            throw ParseError(cat_str(where, ": unknown key '", key, "'"));
        }
    }
}

template <typename T>
T get_or(const json &j, const char *key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) {
        return fallback;
    }
    try {
        return j[key].get<T>();
    } catch (const json::exception &e) {
        throw ParseError(cat_str("key '", key, "': ", e.what()));
    }
}

}  // namespace internal

inline InteractionGraph graph_from_json(const json &j) {
    internal::check_keys(j, {"kind", "n", "width", "height", "edges"}, "graph");
    std::string kind = internal::get_or<std::string>(j, "kind", "path");
    if (kind == "path" || kind == "ring") {
        auto n = internal::get_or<size_t>(j, "n", 0);
        if (n == 0) {
            throw ParseError("graph: 'n' must be positive");
        }
        return kind == "path" ? InteractionGraph::path(n) : InteractionGraph::ring(n);
    }
    if (kind == "grid") {
        return InteractionGraph::grid(internal::get_or<size_t>(j, "width", 0), internal::get_or<size_t>(j, "height", 0));
    }
    if (kind == "edges") {
        auto n = internal::get_or<size_t>(j, "n", 0);
        std::vector<std::pair<size_t, size_t>> edges;
        for (const auto &e : j.at("edges")) {
            edges.push_back({e.at(0).get<size_t>(), e.at(1).get<size_t>()});
        }
        return InteractionGraph::from_edges(n, edges);
    }
    throw ParseError(cat_str("graph: unknown kind '", kind, "'"));
}

inline json graph_to_json(const InteractionGraph &g) {
    json edges = json::array();
    for (size_t v = 0; v < g.n; v++) {
        for (size_t u : g.adj[v]) {
            if (u > v) {
                edges.push_back({v, u});
            }
        }
    }
    return json{{"kind", "edges"}, {"n", g.n}, {"edges", edges}};
}

/// A schedule is a number (constant), {"monomial": [...]}, {"chebyshev": [...]} or
/// {"builtin": kind, "params": [...]} (converted to a polynomial accurate to 1e-13).
inline PolySchedule schedule_from_json(const json &j, double T) {
    if (j.is_number()) {
        return PolySchedule::constant(T, j.get<double>());
    }
    internal::check_keys(j, {"monomial", "chebyshev", "builtin", "params", "T"}, "schedule");
    if (j.contains("monomial")) {
        return PolySchedule::from_monomial(T, j["monomial"].get<std::vector<double>>());
    }
    if (j.contains("chebyshev")) {
        return PolySchedule(T, j["chebyshev"].get<std::vector<double>>());
    }
    if (j.contains("builtin")) {
        BuiltinSchedule b{j["builtin"].get<std::string>(), internal::get_or<std::vector<double>>(j, "params", {})};
        return b.to_poly(T);
    }
    throw ParseError("schedule: expected a number, 'monomial', 'chebyshev' or 'builtin'");
}

inline json schedule_to_json(const PolySchedule &p) {
    return json{{"T", p.T}, {"chebyshev", p.cheb}};
}

inline CoeffIndex term_index_from_json(const json &j, size_t n) {
    if (j.contains("hamiltonian")) {
        PauliString p = PauliString::from_str(j["hamiltonian"].get<std::string>());
        if (p.n != n) {
            throw ParseError(cat_str("term '", p.str(), "' has ", p.n, " qubits, graph has ", n));
        }
        return CoeffIndex::hamiltonian(p);
    }
    if (j.contains("dissipator")) {
        const json &d = j["dissipator"];
        auto site = d.at("site").get<size_t>();
        std::string axis = d.at("axis").get<std::string>();
        if (site >= n || axis.size() != 1) {
            throw ParseError("dissipator: bad site or axis");
        }
        return CoeffIndex::dissipative(site, axis_from_char(axis[0]));
    }
    throw ParseError("term: expected 'hamiltonian' or 'dissipator'");
}

/// {"graph": ..., "T": 1, "k": 2, "terms": [{"hamiltonian": "ZZI", "schedule": ...},
///  {"dissipator": {"site": 0, "axis": "Z"}, "schedule": ...}]}
inline LindbladAnsatz ansatz_from_json(const json &j, std::optional<InteractionGraph> graph = {},
                                       std::optional<double> horizon = {}) {
    internal::check_keys(j, {"graph", "T", "k", "terms", "m"}, "ansatz");
    LindbladAnsatz a;
    if (j.contains("graph")) {
        a.graph = graph_from_json(j["graph"]);
    } else if (graph) {
        a.graph = *graph;
    } else {
        throw ParseError("ansatz: missing 'graph'");
    }
    a.T = internal::get_or<double>(j, "T", horizon.value_or(1.0));
    a.k = internal::get_or<int>(j, "k", 2);
    if (!(a.T > 0)) {
        throw ParseError("ansatz: T must be positive");
    }
    for (const auto &t : j.at("terms")) {
        internal::check_keys(t, {"hamiltonian", "dissipator", "schedule"}, "term");
        CoeffIndex idx = term_index_from_json(t, a.n());
        if (a.find(idx)) {
            throw ParseError(cat_str("duplicate term ", idx.str()));
        }
        PolySchedule f = t.contains("schedule") ? schedule_from_json(t["schedule"], a.T) : PolySchedule::constant(a.T, 0);
        a.terms.push_back({idx, f});
    }
    return a;
}

inline json ansatz_to_json(const LindbladAnsatz &a) {
    json terms = json::array();
    for (const auto &t : a.terms) {
        json e;
        if (t.index.is_hamiltonian()) {
            e["hamiltonian"] = t.index.alpha.str();
        } else {
            e["dissipator"] = {{"site", t.index.site}, {"axis", std::string(1, axis_char(t.index.axis))}};
        }
        e["schedule"] = json{{"chebyshev", t.f.cheb}};
        terms.push_back(e);
    }
    return json{{"graph", graph_to_json(a.graph)}, {"T", a.T}, {"k", a.k}, {"terms", terms}};
}

inline LearnConfig config_from_json(const json &j) {
    internal::check_keys(j,
                         {"truth", "skeleton", "eps", "delta", "mode", "seed", "region_cap", "region_policy",
                          "dissipators", "coeff_bound", "rate_bound", "derivative_fit", "schedule_fit", "degree_cap",
                          "eps_sdp", "shots_per_time", "rev_iterations", "constants", "holdout"},
                         "config");
    LearnConfig c;
    if (j.contains("truth")) {
        c.truth = ansatz_from_json(j["truth"]);
    }
    if (j.contains("skeleton")) {
        std::optional<InteractionGraph> g;
        std::optional<double> T;
        if (c.truth) {
            g = c.truth->graph;
            T = c.truth->T;
        }
        c.skeleton = ansatz_from_json(j["skeleton"], g, T);
        int m_default = 0;
        for (const auto &t : c.skeleton.terms) {
            m_default = std::max(m_default, t.f.degree());
        }
        c.m = internal::get_or<int>(j["skeleton"], "m", c.truth ? -1 : m_default);
        if (c.m < 0) {
            // Default to the truth's degree when the skeleton omits it.
            c.m = 0;
            for (const auto &t : c.truth->terms) {
                c.m = std::max(c.m, t.f.degree());
            }
        }
    } else if (c.truth) {
        c.skeleton = *c.truth;
        c.m = 0;
        for (const auto &t : c.truth->terms) {
            c.m = std::max(c.m, t.f.degree());
        }
    } else {
        throw ParseError("config: need 'truth' or 'skeleton'");
    }
    c.T = c.skeleton.T;
    if (c.truth && (c.truth->n() != c.skeleton.n() || std::abs(c.truth->T - c.T) > 1e-15)) {
        throw ParseError("config: truth and skeleton disagree on the system size or horizon");
    }
    c.eps = internal::get_or<double>(j, "eps", c.eps);
    c.delta = internal::get_or<double>(j, "delta", c.delta);
    if (!(c.eps > 0 && c.eps < 1) || !(c.delta > 0 && c.delta < 1)) {
        throw ParseError("config: eps and delta must lie in (0,1)");
    }
    std::string mode = internal::get_or<std::string>(j, "mode", "oracle");
    if (mode == "oracle") {
        c.mode = LearnMode::oracle;
    } else if (mode == "sampled") {
        c.mode = LearnMode::sampled;
    } else {
        throw ParseError(cat_str("config: unknown mode '", mode, "'"));
    }
    c.seed = internal::get_or<uint64_t>(j, "seed", c.seed);
    c.region_cap = internal::get_or<size_t>(j, "region_cap", c.region_cap);
    std::string policy = internal::get_or<std::string>(j, "region_policy", "clip");
    if (policy != "clip" && policy != "error") {
        throw ParseError(cat_str("config: unknown region_policy '", policy, "'"));
    }
    c.region_policy = policy == "clip" ? RegionPolicy::clip : RegionPolicy::error;
    std::string dis = internal::get_or<std::string>(j, "dissipators", "all");
    if (dis == "all") {
        c.dissipators = DissipatorSet::all;
    } else if (dis == "skeleton") {
        c.dissipators = DissipatorSet::skeleton;
    } else if (dis == "none") {
        c.dissipators = DissipatorSet::none;
    } else {
        throw ParseError(cat_str("config: unknown dissipators '", dis, "'"));
    }
    c.coeff_bound = internal::get_or<double>(j, "coeff_bound", c.coeff_bound);
    c.rate_bound = internal::get_or<double>(j, "rate_bound", c.rate_bound);
    c.derivative_fit = fit_mode_from_name(internal::get_or<std::string>(j, "derivative_fit", "least_squares"));
    c.schedule_fit = fit_mode_from_name(internal::get_or<std::string>(j, "schedule_fit", "least_squares"));
    c.degree_cap = internal::get_or<int>(j, "degree_cap", c.degree_cap);
    c.eps_sdp = internal::get_or<double>(j, "eps_sdp", c.eps_sdp);
    c.shots_per_time = internal::get_or<double>(j, "shots_per_time", c.shots_per_time);
    c.rev_iterations = internal::get_or<int>(j, "rev_iterations", c.rev_iterations);
    if (j.contains("holdout")) {
        internal::check_keys(j["holdout"], {"eps", "delta"}, "holdout");
        c.holdout_eps = internal::get_or<double>(j["holdout"], "eps", c.holdout_eps);
        c.holdout_delta = internal::get_or<double>(j["holdout"], "delta", c.holdout_delta);
    }
    if (j.contains("constants")) {
        const json &k = j["constants"];
        internal::check_keys(k, {"c_shadow", "c_node", "c_pert", "c_poly", "c_int", "lr"}, "constants");
        c.constants.c_shadow = internal::get_or<double>(k, "c_shadow", c.constants.c_shadow);
        c.constants.c_node = internal::get_or<double>(k, "c_node", c.constants.c_node);
        c.constants.c_pert = internal::get_or<double>(k, "c_pert", c.constants.c_pert);
        c.constants.c_poly = internal::get_or<double>(k, "c_poly", c.constants.c_poly);
        c.constants.c_int = internal::get_or<double>(k, "c_int", c.constants.c_int);
        if (k.contains("lr")) {
            const json &l = k["lr"];
            internal::check_keys(l, {"source", "v", "mu", "C3", "C", "C1", "k", "D"}, "lr");
            LRParams &p = c.constants.lr;
            std::string src = internal::get_or<std::string>(l, "source", "calibrated");
            p.source = src == "formula" ? LRSource::formula : LRSource::calibrated;
            p.v = internal::get_or<double>(l, "v", p.v);
            p.mu = internal::get_or<double>(l, "mu", p.mu);
            p.C3 = internal::get_or<double>(l, "C3", p.C3);
            p.C = internal::get_or<double>(l, "C", p.C);
            p.C1 = internal::get_or<double>(l, "C1", p.C1);
            p.k = internal::get_or<int>(l, "k", p.k);
            p.D = internal::get_or<int>(l, "D", p.D);
        }
    }
    return c;
}

inline LearnConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(cat_str("cannot open config '", path, "'"));
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception &e) {
        throw ParseError(cat_str(path, ": ", e.what()));
    }
    return config_from_json(j);
}

/// Constants and knobs recorded in results (provenance).
inline json config_summary(const LearnConfig &c) {
    const auto &k = c.constants;
    return json{{"eps", c.eps},
                {"delta", c.delta},
                {"mode", c.mode == LearnMode::oracle ? "oracle" : "sampled"},
                {"seed", c.seed},
                {"m", c.m},
                {"T", c.T},
                {"region_cap", c.region_cap},
                {"region_policy", c.region_policy == RegionPolicy::clip ? "clip" : "error"},
                {"coeff_bound", c.coeff_bound},
                {"rate_bound", c.rate_bound},
                {"derivative_fit", fit_mode_name(c.derivative_fit)},
                {"schedule_fit", fit_mode_name(c.schedule_fit)},
                {"eps_sdp", c.eps_sdp},
                {"shots_per_time", c.shots_per_time},
                {"constants",
                 {{"c_shadow", k.c_shadow},
                  {"c_node", k.c_node},
                  {"c_pert", k.c_pert},
                  {"c_poly", k.c_poly},
                  {"lr", {{"v", k.lr.v}, {"mu", k.lr.mu}, {"C3", k.lr.C3}}}}}};
}

// ---------------------------------------------------------------------------------------------
// Preprocessing.
// ---------------------------------------------------------------------------------------------

/// Learner-side unknowns: the skeleton's Hamiltonian terms plus the selected dissipative rates
/// (all three axes on every included site, so each site's Gamma block is complete).
inline LindbladAnsatz learn_ansatz(const LearnConfig &cfg) {
    LindbladAnsatz a;
    a.graph = cfg.skeleton.graph;
    a.k = cfg.skeleton.k;
    a.T = cfg.T;
    std::vector<char> site(a.n(), cfg.dissipators == DissipatorSet::all ? 1 : 0);
    for (const auto &t : cfg.skeleton.terms) {
        if (t.index.is_hamiltonian()) {
            a.add_hamiltonian(t.index.alpha, PolySchedule::constant(a.T, 0));
        } else if (cfg.dissipators == DissipatorSet::skeleton) {
            site[t.index.site] = 1;
        }
    }
    for (size_t j = 0; j < a.n(); j++) {
        if (site[j]) {
            for (Axis ax : {Axis::X, Axis::Y, Axis::Z}) {
                a.add_dissipator(j, ax, PolySchedule::constant(a.T, 0));
            }
        }
    }
    return a;
}

struct LearnPlan {
    size_t n = 0;
    LindbladAnsatz ansatz;  // learner-side unknowns
    ProbeSet probes;
    DerivativePlan deriv;
    double eps_sdp = 0;
    double generator_norm = 0;
    /// All query times (sorted); primary and auxiliary nodes index into it.
    std::vector<double> times;
    std::vector<size_t> primary_index;
    std::vector<size_t> aux_index;
    /// regions[i][b]: region of probe b at primary node i.
    std::vector<std::vector<std::vector<size_t>>> regions;
    size_t clipped_regions = 0;
    int max_region = 0;
    double pair_precision = 0;
    double k1k2 = 0;
    double delta_per_time = 0;
    size_t groups = 1;
    double planned_shots_per_time = 0;
    double shots_per_time = 0;
    double t_min = 0;
    double t_tot = 0;
    double runtime_seconds = 0;
    std::vector<std::string> warnings;
};

namespace internal {

/// enlarge(supp q, r) with r from the LR radius for tolerance `tol` at time t, under the policy.
inline std::vector<size_t> probe_region(const InteractionGraph &g, const PauliString &q, double tol, double t,
                                        const LRParams &lr, size_t cap, RegionPolicy policy, bool *clipped) {
    std::vector<size_t> supp = q.support();
    if (supp.size() > cap) {
        throw LimitError(cat_str("probe ", q.str(), " is wider than the region cap ", cap));
    }
    int diam = std::max(g.diameter(), 0);
    LRRadius lr_r = lr_radius(lr, tol, t, geometric_diameter(q, g), diam);
    std::vector<size_t> region = g.enlarge(supp, lr_r.radius);
    *clipped = false;
    if (region.size() > cap) {
        if (policy == RegionPolicy::error) {
            throw LimitError(cat_str("region of ", region.size(), " qubits around ", q.str(), " at t=", fmt_double(t),
                                     " exceeds the cap ", cap));
        }
        *clipped = true;
        int r = lr_r.radius;
        while (r > 0 && region.size() > cap) {
            region = g.enlarge(supp, --r);
        }
        if (region.size() > cap) {
            region = supp;
        }
    }
    return region;
}

/// Sum of generator-term norms touching the region: |h| <= coeff_bound contributes one (the
/// commutator term (i/2)[P, .] has norm <= 1), a rate contributes twice its bound.
inline double local_generator_norm(const LindbladAnsatz &a, const std::vector<size_t> &region, double coeff_bound,
                                   double rate_bound) {
    std::vector<char> in(a.n(), 0);
    for (size_t v : region) {
        in[v] = 1;
    }
    double M = 0;
    for (const auto &t : a.terms) {
        if (t.index.is_hamiltonian()) {
            bool touches = false;
            for (size_t v : t.index.alpha.support()) {
                touches |= in[v] != 0;
            }
            if (touches) {
                M += coeff_bound;
            }
        } else if (in[t.index.site]) {
            M += 2 * rate_bound;
        }
    }
    return M;
}

}  // namespace internal

/// Classical preprocessing: probes, nodes, regions, precision chain and per-time budget.
inline LearnPlan preprocess(const LearnConfig &cfg) {
    auto start = std::chrono::steady_clock::now();
    LearnPlan plan;
    plan.ansatz = learn_ansatz(cfg);
    plan.n = plan.ansatz.n();
    if (plan.ansatz.terms.empty()) {
        throw ValueError("preprocess: the learner has no unknowns");
    }
    plan.probes = build_probes(plan.ansatz);
    StabilityReport stab = verify_stability(plan.probes.specs);
    if (!stab.ok) {
        plan.warnings.push_back(cat_str("probe stability check failed: ", stab.violations.size(), " violations"));
    }
    const int s = std::max<int>(1, (int)plan.probes.s);
    plan.eps_sdp = cfg.eps_sdp > 0 ? cfg.eps_sdp : 1.0 / (60.0 * s * s);

    // Primary nodes first (regions depend on t_i), then the derivative plan with the local norm.
    DerivativeInputs din;
    din.m = cfg.m;
    din.T = cfg.T;
    din.eps = cfg.eps;
    din.delta = cfg.delta;
    din.s = s;
    din.c_node = cfg.constants.c_node;
    din.degree_cap = cfg.degree_cap;
    din.mode = cfg.derivative_fit;
    din.seed = cfg.seed;
    din.c_int_m = cfg.constants.c_int;
    size_t xi1 = node_count(cfg.m, cfg.delta / 2, cfg.constants.c_node);
    Rng rng = Rng::stream(cfg.seed, 0x9121);
    std::vector<double> primary = chebyshev_nodes(cfg.T, xi1, rng);

    plan.regions.resize(primary.size());
    for (size_t i = 0; i < primary.size(); i++) {
        for (const auto &p : plan.probes.specs) {
            bool clipped = false;
            auto region = internal::probe_region(plan.ansatz.graph, p.Q, plan.eps_sdp / 2, primary[i],
                                                 cfg.constants.lr, cfg.region_cap, cfg.region_policy, &clipped);
            plan.clipped_regions += clipped;
            plan.max_region = std::max(plan.max_region, (int)region.size());
            plan.generator_norm = std::max(
                plan.generator_norm, internal::local_generator_norm(plan.ansatz, region, cfg.coeff_bound, cfg.rate_bound));
            plan.regions[i].push_back(std::move(region));
        }
    }
    if (plan.clipped_regions > 0) {
        plan.warnings.push_back(cat_str(plan.clipped_regions, " probe regions clipped to the cap of ", cfg.region_cap,
                                        " qubits"));
    }
    din.generator_norm = plan.generator_norm;
    plan.deriv = plan_derivatives(din);
    if (plan.deriv.primary != primary) {
        throw NumericalError("preprocess: node draw mismatch");
    }

    // Merge primary and auxiliary nodes into one sorted time list.
    std::vector<std::pair<double, int>> all;
    for (size_t i = 0; i < primary.size(); i++) {
        all.push_back({primary[i], (int)i});
    }
    for (size_t j = 0; j < plan.deriv.aux.size(); j++) {
        all.push_back({plan.deriv.aux[j], -1 - (int)j});
    }
    std::sort(all.begin(), all.end());
    plan.primary_index.resize(primary.size());
    plan.aux_index.resize(plan.deriv.aux.size());
    for (const auto &[t, tag] : all) {
        size_t k = plan.times.size();
        plan.times.push_back(t);
        if (tag >= 0) {
            plan.primary_index[(size_t)tag] = k;
        } else {
            plan.aux_index[(size_t)(-1 - tag)] = k;
        }
    }
    plan.t_min = plan.times.front();

    // Budget: every Pauli pair on a region of w qubits to precision eps_1 / 2^w (the region
    // observables have Pauli l1 norm <= 2^w ||O||), union bound over pairs and times.
    const int w = plan.max_region;
    plan.pair_precision = std::min(plan.deriv.eps1, plan.deriv.target) / std::pow(2.0, w);
    plan.k1k2 = (double)plan.probes.specs.size() * std::pow(16.0, w);
    plan.delta_per_time = cfg.delta / (2.0 * (double)plan.times.size());
    plan.groups = mom_groups(std::min(0.5, plan.delta_per_time / plan.k1k2));
    plan.planned_shots_per_time =
        sample_budget(2 * w, plan.k1k2, plan.pair_precision, plan.delta_per_time, cfg.constants.c_shadow);
    plan.shots_per_time = cfg.shots_per_time > 0 ? cfg.shots_per_time : plan.planned_shots_per_time;
    if (cfg.shots_per_time > 0 && cfg.shots_per_time < plan.planned_shots_per_time) {
        plan.warnings.push_back(cat_str("shots_per_time ", fmt_double(cfg.shots_per_time),
                                        " is below the planned budget ", fmt_double(plan.planned_shots_per_time)));
    }
    if (cfg.mode == LearnMode::sampled) {
        for (double t : plan.times) {
            plan.t_tot += t * plan.shots_per_time;
        }
    }
    plan.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return plan;
}

inline json plan_to_json(const LearnPlan &p) {
    json probes = json::array();
    for (const auto &s : p.probes.specs) {
        probes.push_back({{"index", s.index.str()}, {"Q", s.Q.str()}, {"Q_bar", s.Q_bar.str()}, {"phi", phase_str(s.phase)}});
    }
    const auto &d = p.deriv;
    return json{{"n", p.n},
                {"probes", probes},
                {"s", p.probes.s},
                {"eps_sdp", p.eps_sdp},
                {"generator_norm", p.generator_norm},
                {"xi1", d.xi1()},
                {"xi2", d.xi2()},
                {"primary_nodes", d.primary},
                {"dyson_K", d.dyson_K},
                {"fit_degree", d.fit_degree},
                {"zeta", d.zeta},
                {"eps1", d.eps1},
                {"target", d.target},
                {"c_int_m", d.c_int_m},
                {"c_int_fit", d.c_int_fit},
                {"c_der", d.c_der},
                {"max_region", p.max_region},
                {"clipped_regions", p.clipped_regions},
                {"pair_precision", p.pair_precision},
                {"k1k2", p.k1k2},
                {"groups", p.groups},
                {"planned_shots_per_time", p.planned_shots_per_time},
                {"shots_per_time", p.shots_per_time},
                {"times", p.times.size()},
                {"t_min", p.t_min},
                {"t_tot", p.t_tot},
                {"runtime_seconds", p.runtime_seconds},
                {"warnings", p.warnings}};
}

// ---------------------------------------------------------------------------------------------
// Learning.
// ---------------------------------------------------------------------------------------------

struct NodeDiagnostics {
    double t = 0;
    double dominance_margin = 0;
    size_t sparsity = 0;
    double max_rev_objective = 0;
    size_t rev_nonconverged = 0;
    double max_observable_l1 = 0;
    std::vector<double> theta;       // physical unknowns at t
    std::vector<double> derivative;  // estimated f'_O(t) per probe
};

struct LearnResult {
    std::vector<CoeffIndex> indices;
    std::vector<PolySchedule> schedules;
    std::vector<NodeDiagnostics> nodes;
    double t_min = 0;
    double t_tot = 0;
    double shots_per_time = 0;
    double total_shots = 0;
    std::vector<std::string> warnings;
    /// Sup-norm errors against the truth (empty when the truth is unknown).
    std::vector<double> sup_errors;
    double max_sup_error = std::numeric_limits<double>::quiet_NaN();
    json provenance;
    /// Wall-clock seconds per stage (logged, never serialized: results stay byte-identical).
    std::map<std::string, double> stage_seconds;

    const PolySchedule &schedule(const CoeffIndex &idx) const {
        for (size_t k = 0; k < indices.size(); k++) {
            if (indices[k] == idx) {
                return schedules[k];
            }
        }
        throw ValueError(cat_str("no learned schedule for ", idx.str()));
    }
};

/// Algorithms 2-5 against an opaque overlap source: per node, local channels and localized
/// inversions, derivative estimates, the linear system; then one fit per coefficient.
inline LearnResult learn_from_source(const LearnConfig &cfg, const LearnPlan &plan, OverlapSource &src) {
    if (src.times() != plan.times) {
        throw ValueError("learn: the overlap source does not cover the planned times");
    }
    const size_t n = plan.n;
    const auto &specs = plan.probes.specs;
    const size_t nodes = plan.primary_index.size();
    LearnResult res;
    auto clock = std::chrono::steady_clock::now();
    auto lap = [&](const char *stage) {
        auto now = std::chrono::steady_clock::now();
        res.stage_seconds[stage] += std::chrono::duration<double>(now - clock).count();
        clock = now;
    };
    SystemStructure st = build_structure(specs);
    res.indices = st.indices;

    // 1. Local channels at every primary node (one batched preparation).
    std::vector<OverlapRequest> reqs;
    for (size_t i = 0; i < nodes; i++) {
        std::set<std::vector<size_t>> seen;
        for (const auto &region : plan.regions[i]) {
            if (seen.insert(region).second) {
                auto r = local_channel_requests(n, plan.primary_index[i], region);
                reqs.insert(reqs.end(), r.begin(), r.end());
            }
        }
    }
    src.prepare(reqs);
    reqs.clear();
    reqs.shrink_to_fit();
    lap("channels");

    // 2. Localized inversion per (node, probe).
    std::vector<std::vector<ProbeObservable>> obs(nodes);
    res.nodes.resize(nodes);
    RevOptions ropts;
    ropts.max_iterations = cfg.rev_iterations;
    size_t nonconverged = 0;
    for (size_t i = 0; i < nodes; i++) {
        NodeDiagnostics &nd = res.nodes[i];
        nd.t = plan.times[plan.primary_index[i]];
        std::map<std::vector<size_t>, LocalChannelEstimate> channels;
        for (size_t b = 0; b < specs.size(); b++) {
            const auto &region = plan.regions[i][b];
            auto it = channels.find(region);
            if (it == channels.end()) {
                it = channels
                         .emplace(region, estimate_local_channel(src, n, plan.primary_index[i], region,
                                                                 plan.pair_precision, cfg.region_cap))
                         .first;
            }
            RevResult r;
            try {
                r = rev(it->second, restrict_to_region(specs[b].Q, region), plan.eps_sdp, ropts);
            } catch (const RevNonConvergence &e) {
                r = e.best;
                nd.rev_nonconverged++;
                nonconverged++;
            }
            nd.max_rev_objective = std::max(nd.max_rev_objective, r.objective);
            ProbeObservable o;
            double l1 = 0;
            for (size_t idx = 0; idx < (size_t)r.coeffs.size(); idx++) {
                const PauliString lp = PauliString::from_index(region.size(), idx);
                double c = r.coeffs[(Eigen::Index)idx];
                if (c != 0) {
                    o.terms.push_back({embed_from_region(lp, region, n), c});
                    l1 += std::abs(c);
                }
            }
            nd.max_observable_l1 = std::max(nd.max_observable_l1, l1);
            obs[i].push_back(std::move(o));
        }
    }
    lap("rev");
    if (nonconverged > 0) {
        res.warnings.push_back(cat_str(nonconverged, " localized inversions stopped above eps_sdp = ",
                                       fmt_double(plan.eps_sdp), "; their best iterates were used"));
    }

    // 3. Derivative estimates f'_O(t_i) from the shared auxiliary nodes.
    std::vector<SeriesRequest> sreq;
    for (size_t i = 0; i < nodes; i++) {
        for (size_t b = 0; b < specs.size(); b++) {
            sreq.push_back({specs[b].Q_bar, obs[i][b].terms});
        }
    }
    std::vector<std::vector<double>> series = src.series(sreq, plan.aux_index);
    DerivativeEstimator dest(plan.deriv);
    std::vector<std::vector<double>> derivs(nodes, std::vector<double>(specs.size()));
    for (size_t i = 0; i < nodes; i++) {
        for (size_t b = 0; b < specs.size(); b++) {
            derivs[i][b] = dest.estimate_at(series[i * specs.size() + b], res.nodes[i].t).value;
        }
        res.nodes[i].derivative = derivs[i];
    }
    series.clear();
    lap("derivatives");

    // 4. Linear systems.
    for (size_t i = 0; i < nodes; i++) {
        for (const auto &[P, pin] : system_pairs(st, obs[i])) {
            reqs.push_back({plan.primary_index[i], P, pin});
        }
    }
    src.prepare(reqs);
    std::vector<std::vector<double>> theta(st.size(), std::vector<double>(nodes));
    for (size_t i = 0; i < nodes; i++) {
        NodeDiagnostics &nd = res.nodes[i];
        const size_t ti = plan.primary_index[i];
        TimeSystem sys = assemble(
            st, obs[i], [&](const PauliString &P, const PauliString &pin) { return src.overlap(ti, P, pin); },
            derivs[i], nd.t);
        nd.dominance_margin = sys.dominance_margin;
        nd.sparsity = sys.sparsity_s;
        Eigen::VectorXd x;
        try {
            x = to_physical(sys.indices, solve(sys));
        } catch (const TdlError &e) {
            throw NumericalError(cat_str("node ", i, " (t=", fmt_double(nd.t), "): ", e.what()));
        }
        nd.theta.assign(x.data(), x.data() + x.size());
        for (size_t k = 0; k < st.size(); k++) {
            theta[k][i] = x[(Eigen::Index)k];
        }
    }
    size_t weak = 0;
    for (const auto &nd : res.nodes) {
        weak += nd.dominance_margin <= 0;
    }
    if (weak > 0) {
        res.warnings.push_back(cat_str(weak, " of ", nodes, " node systems are not diagonally dominant"));
    }

    lap("systems");

    // 5. Stable interpolation per coefficient.
    for (size_t k = 0; k < st.size(); k++) {
        res.schedules.push_back(robust_fit(cfg.T, plan.deriv.primary, theta[k], cfg.m, cfg.schedule_fit));
    }
    res.t_min = plan.t_min;
    res.shots_per_time = cfg.mode == LearnMode::sampled ? plan.shots_per_time : 0;
    res.total_shots = src.shots_used();
    res.t_tot = plan.t_tot;
    for (const auto &w : plan.warnings) {
        res.warnings.push_back(w);
    }
    res.provenance = config_summary(cfg);
    res.provenance["version"] = VERSION;
    res.provenance["fit_degree"] = plan.deriv.fit_degree;
    res.provenance["xi1"] = plan.deriv.xi1();
    res.provenance["xi2"] = plan.deriv.xi2();
    res.provenance["eps_sdp"] = plan.eps_sdp;
    return res;
}

/// Sup-norm errors of the learned schedules against a reference ansatz (absent terms are zero).
inline void score_against(LearnResult &res, const LindbladAnsatz &truth) {
    res.sup_errors.clear();
    res.max_sup_error = 0;
    for (size_t k = 0; k < res.indices.size(); k++) {
        const LindbladTerm *t = truth.find(res.indices[k]);
        PolySchedule ref = t ? t->f : PolySchedule::constant(res.schedules[k].T, 0);
        double e = (res.schedules[k] - ref).sup_norm();
        res.sup_errors.push_back(e);
        res.max_sup_error = std::max(res.max_sup_error, e);
    }
    for (const auto &t : truth.terms) {
        bool covered = false;
        for (const auto &idx : res.indices) {
            covered |= idx == t.index;
        }
        if (!covered) {
            res.warnings.push_back(cat_str("truth term ", t.index.str(), " is not among the learned unknowns"));
        }
    }
}

/// Device side: builds the overlap source for the configured mode from the truth.
inline std::unique_ptr<OverlapSource> make_device(const LearnConfig &cfg, const LearnPlan &plan) {
    if (!cfg.truth) {
        throw ValueError("learn: no truth ansatz to simulate (pass stored snapshots instead)");
    }
    if (cfg.mode == LearnMode::oracle) {
        return std::make_unique<OracleOverlaps>(*cfg.truth, plan.times, OdeOptions{1e-13});
    }
    if (cfg.truth->n() <= HistogramOverlaps::MAX_QUBITS) {
        return std::make_unique<HistogramOverlaps>(*cfg.truth, plan.times,
                                                   std::vector<double>(plan.times.size(), plan.shots_per_time),
                                                   plan.groups, Rng::stream(cfg.seed, 0xd3e1).engine());
    }
    double total = plan.shots_per_time * (double)plan.times.size();
    if (total > 5e7) {
        throw LimitError(cat_str("snapshot simulation of ", fmt_double(total),
                                 " experiments is too large; set shots_per_time"));
    }
    ShadowBatch batch = acquire(*cfg.truth, plan.times, (size_t)plan.shots_per_time, cfg.seed);
    return std::make_unique<SnapshotOverlaps>(std::move(batch), plan.groups);
}

/// End-to-end self-test: the truth only reaches the learner through the overlap source.
inline LearnResult learn(const LearnConfig &cfg, const LearnPlan &plan) {
    auto device = make_device(cfg, plan);
    LearnResult res = learn_from_source(cfg, plan, *device);
    if (cfg.truth) {
        score_against(res, *cfg.truth);
    }
    return res;
}

inline LearnResult learn(const LearnConfig &cfg) {
    return learn(cfg, preprocess(cfg));
}

inline json result_to_json(const LearnResult &r) {
    json sched = json::array();
    for (size_t k = 0; k < r.indices.size(); k++) {
        json e{{"index", r.indices[k].str()}, {"schedule", schedule_to_json(r.schedules[k])}};
        if (!r.sup_errors.empty()) {
            e["sup_error"] = r.sup_errors[k];
        }
        sched.push_back(e);
    }
    json nodes = json::array();
    for (const auto &nd : r.nodes) {
        nodes.push_back({{"t", nd.t},
                         {"dominance_margin", nd.dominance_margin},
                         {"sparsity", nd.sparsity},
                         {"max_rev_objective", nd.max_rev_objective},
                         {"rev_nonconverged", nd.rev_nonconverged},
                         {"max_observable_l1", nd.max_observable_l1},
                         {"theta", nd.theta}});
    }
    json out{{"schedules", sched},
             {"nodes", nodes},
             {"t_min", r.t_min},
             {"t_tot", r.t_tot},
             {"shots_per_time", r.shots_per_time},
             {"total_shots", r.total_shots},
             {"warnings", r.warnings},
             {"provenance", r.provenance}};
    if (!r.sup_errors.empty()) {
        out["max_sup_error"] = r.max_sup_error;
    }
    return out;
}

inline std::string serialize(const LearnResult &r) {
    return result_to_json(r).dump(2) + "\n";
}

inline LearnResult result_from_json(const json &j) {
    LearnResult r;
    try {
        for (const auto &e : j.at("schedules")) {
            r.indices.push_back(CoeffIndex::from_str(e.at("index").get<std::string>()));
            const json &s = e.at("schedule");
            r.schedules.push_back(PolySchedule(s.at("T").get<double>(), s.at("chebyshev").get<std::vector<double>>()));
            if (e.contains("sup_error")) {
                r.sup_errors.push_back(e["sup_error"].get<double>());
            }
        }
        for (const auto &e : j.at("nodes")) {
            NodeDiagnostics nd;
            nd.t = e.at("t").get<double>();
            nd.dominance_margin = e.at("dominance_margin").get<double>();
            nd.sparsity = e.at("sparsity").get<size_t>();
            nd.max_rev_objective = e.at("max_rev_objective").get<double>();
            nd.rev_nonconverged = e.at("rev_nonconverged").get<size_t>();
            nd.max_observable_l1 = e.at("max_observable_l1").get<double>();
            nd.theta = e.at("theta").get<std::vector<double>>();
            r.nodes.push_back(std::move(nd));
        }
        r.t_min = j.at("t_min").get<double>();
        r.t_tot = j.at("t_tot").get<double>();
        r.shots_per_time = j.at("shots_per_time").get<double>();
        r.total_shots = j.at("total_shots").get<double>();
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        r.provenance = j.at("provenance");
        if (j.contains("max_sup_error")) {
            r.max_sup_error = j["max_sup_error"].get<double>();
        }
    } catch (const json::exception &e) {
        throw ParseError(cat_str("result: ", e.what()));
    }
    return r;
}

inline LearnResult parse_result(const std::string &text) {
    try {
        return result_from_json(json::parse(text));
    } catch (const json::parse_error &e) {
        throw ParseError(cat_str("result: ", e.what()));
    }
}

// ---------------------------------------------------------------------------------------------
// Holdout validation and extrapolation.
// ---------------------------------------------------------------------------------------------

/// ceil(T^2 ln(2/delta) / (2 eps^2)).
inline size_t holdout_count(double T, double eps, double delta) {
    if (!(eps > 0) || !(delta > 0 && delta < 1) || !(T > 0)) {
        throw ValueError("holdout_count requires eps > 0, delta in (0,1), T > 0");
    }
    return (size_t)std::ceil(T * T * std::log(2 / delta) / (2 * eps * eps));
}

/// Nikolskii constant between L1 and L-infinity for degree-m polynomials on [0, T]:
/// ||p||_inf <= c_poly (m + 1)^2 / T * ||p||_1.
inline double nikolskii_constant(int m, double T, double c_poly = 1.0) {
    return c_poly * (m + 1.0) * (m + 1.0) / T;
}

struct CoefficientValidation {
    CoeffIndex index;
    double l1_hat = 0;     // T * mean |residual|
    double certified = 0;  // beta (l1_hat + T sqrt(ln(2/delta) / 2M))
    bool pass = false;     // mean |residual| <= eps_inf
};

struct ValidationReport {
    size_t M = 0;
    double eps_inf = 0;
    double delta = 0;
    double beta = 0;
    std::vector<CoefficientValidation> coefficients;
    bool pass = true;
};

/// Residual access: reference(index, t) is a fresh evaluation of the true coefficient.
using ReferenceFn = std::function<double(const CoeffIndex &, double)>;

/// Uniform holdout times; the certificate holds for residuals bounded by 1 of degree <= m.
inline ValidationReport validate_holdout(const std::vector<CoeffIndex> &indices,
                                         const std::vector<PolySchedule> &learned, const ReferenceFn &reference,
                                         int m, double T, double eps_inf, double delta, uint64_t seed,
                                         double c_poly = 1.0) {
    ValidationReport rep;
    rep.M = holdout_count(T, eps_inf, delta);
    rep.eps_inf = eps_inf;
    rep.delta = delta;
    rep.beta = nikolskii_constant(m, T, c_poly);
    Rng rng = Rng::stream(seed, 0x401d);
    std::vector<double> ts(rep.M);
    for (double &t : ts) {
        t = T * rng.uniform01();
    }
    const double slack = T * std::sqrt(std::log(2 / delta) / (2.0 * (double)rep.M));
    for (size_t k = 0; k < indices.size(); k++) {
        double acc = 0;
        for (double t : ts) {
            acc += std::abs(learned[k].eval(t) - reference(indices[k], t));
        }
        CoefficientValidation cv;
        cv.index = indices[k];
        cv.l1_hat = T * acc / (double)rep.M;
        cv.certified = rep.beta * (cv.l1_hat + slack);
        cv.pass = cv.l1_hat <= eps_inf * T;
        rep.pass &= cv.pass;
        rep.coefficients.push_back(cv);
    }
    return rep;
}

inline ValidationReport validate_holdout(const LearnResult &r, const ReferenceFn &reference, int m, double T,
                                         double eps_inf, double delta, uint64_t seed, double c_poly = 1.0) {
    return validate_holdout(r.indices, r.schedules, reference, m, T, eps_inf, delta, seed, c_poly);
}

inline json report_to_json(const ValidationReport &rep) {
    json coeffs = json::array();
    for (const auto &c : rep.coefficients) {
        coeffs.push_back({{"index", c.index.str()}, {"l1_hat", c.l1_hat}, {"certified_sup", c.certified}, {"pass", c.pass}});
    }
    return json{{"M", rep.M},   {"eps_inf", rep.eps_inf}, {"delta", rep.delta},
                {"beta", rep.beta}, {"pass", rep.pass},     {"coefficients", coeffs}};
}

/// Per-coefficient bound on [0, T_f]: eps_k |T_m(2 T_f / T - 1)|.
inline std::vector<double> extrapolate_guarantee(const std::vector<double> &eps, int m, double T, double T_f) {
    double factor = extrapolation_factor(m, T, T_f);
    std::vector<double> out;
    for (double e : eps) {
        out.push_back(e * factor);
    }
    return out;
}

inline std::vector<double> extrapolate_guarantee(const ValidationReport &rep, int m, double T, double T_f) {
    std::vector<double> eps;
    for (const auto &c : rep.coefficients) {
        eps.push_back(c.certified);
    }
    return extrapolate_guarantee(eps, m, T, T_f);
}

}  // namespace tdl

#endif
