#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnls/attractor.hpp"
#include "dnls/dynamics.hpp"
#include "dnls/errors.hpp"
#include "dnls/lattice.hpp"
#include "dnls/rng.hpp"
#include "dnls/stationary.hpp"

namespace dnls::cli {

using nlohmann::json;

enum class Kind {
    simulate,
    standing_wave,
    contraction_probe,
    geometry_check,
    tail_audit,
    truncation_sweep,
    weight_audit,
};

inline const std::vector<std::pair<Kind, std::string>>& kind_names() {
    static const std::vector<std::pair<Kind, std::string>> names = {
        {Kind::simulate, "simulate"},
        {Kind::standing_wave, "standing_wave"},
        {Kind::contraction_probe, "contraction_probe"},
        {Kind::geometry_check, "geometry_check"},
        {Kind::tail_audit, "tail_audit"},
        {Kind::truncation_sweep, "truncation_sweep"},
        {Kind::weight_audit, "weight_audit"},
    };
    return names;
}

inline std::string to_string(Kind k) {
    for (const auto& [kind, name] : kind_names())
        if (kind == k) return name;
    return "?";
}

inline Kind kind_from_string(const std::string& s) {
    for (const auto& [kind, name] : kind_names())
        if (name == s) return kind;
    throw ValidationError("kind: unknown value '" + s + "'");
}

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Reject keys outside `allowed`, suggesting the nearest known key.
inline void check_keys(const json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
        std::string best;
        std::size_t best_d = static_cast<std::size_t>(-1);
        for (const auto& candidate : allowed) {
            const std::size_t d = edit_distance(key, candidate);
            if (d < best_d) {
                best_d = d;
                best = candidate;
            }
        }
        std::string msg = "unknown key '" + key + "' in " + where;
        if (!best.empty() && best_d <= std::max<std::size_t>(2, key.size() / 2))
            msg += "; did you mean '" + best + "'?";
        throw ValidationError(msg);
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("key '" + key + "': wrong type");
    }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + ": missing required key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + "." + key + ": wrong type");
    }
}

}  // namespace detail

struct ExperimentConfig {
    Kind kind = Kind::simulate;
    json canonical;  // accepted config with all defaults materialized
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    ModelParams params() const;
    IntegratorConfig integrator() const;
    LatticeState initial_state(const ModelParams& p) const;
    std::optional<WeightSpec> record_weight() const;
    std::optional<int> record_tail_M() const;
    bool want_snapshots() const { return canonical.at("snapshots").get<bool>(); }
    bool has_sweep() const { return canonical.contains("sweep"); }
};

namespace detail {

inline json normalize_forcing(const json& f) {
    check_keys(f, {"type", "site", "re", "im", "half_width", "norm", "center", "width"},
               "params.forcing");
    const std::string type = require<std::string>(f, "type", "params.forcing");
    json out;
    out["type"] = type;
    if (type == "zero") {
    } else if (type == "single_site") {
        out["site"] = get_or<int>(f, "site", 0);
        out["re"] = get_or<double>(f, "re", 0.0);
        out["im"] = get_or<double>(f, "im", 0.0);
    } else if (type == "box") {
        out["half_width"] = require<int>(f, "half_width", "params.forcing");
        out["norm"] = require<double>(f, "norm", "params.forcing");
    } else if (type == "gaussian") {
        out["center"] = get_or<double>(f, "center", 0.0);
        out["width"] = require<double>(f, "width", "params.forcing");
        out["norm"] = require<double>(f, "norm", "params.forcing");
    } else {
        throw ValidationError("params.forcing.type: unknown value '" + type + "'");
    }
    return out;
}

inline json normalize_initial(const json& ic) {
    check_keys(ic, {"type", "site", "re", "im", "center", "width", "charge", "support", "path",
                    "norm"},
               "initial_condition");
    const std::string type = require<std::string>(ic, "type", "initial_condition");
    json out;
    out["type"] = type;
    if (type == "zero") {
    } else if (type == "single_site") {
        out["site"] = get_or<int>(ic, "site", 0);
        out["re"] = get_or<double>(ic, "re", 1.0);
        out["im"] = get_or<double>(ic, "im", 0.0);
    } else if (type == "gaussian") {
        out["center"] = get_or<double>(ic, "center", 0.0);
        out["width"] = require<double>(ic, "width", "initial_condition");
        out["charge"] = require<double>(ic, "charge", "initial_condition");
    } else if (type == "anticontinuum") {
        out["support"] = get_or<std::vector<int>>(ic, "support", {0});
    } else if (type == "random_sphere") {
        out["norm"] = require<double>(ic, "norm", "initial_condition");
    } else if (type == "file") {
        out["path"] = require<std::string>(ic, "path", "initial_condition");
    } else {
        throw ValidationError("initial_condition.type: unknown value '" + type + "'");
    }
    return out;
}

inline ModelParams params_from_canonical(const json& c) {
    const json& p = c.at("params");
    ModelParams mp;
    mp.epsilon = p.at("epsilon").get<double>();
    mp.delta = p.at("delta").get<double>();
    mp.sigma = p.at("sigma").get<double>();
    mp.half_width = p.at("m").get<int>();
    const json& f = p.at("forcing");
    const std::string type = f.at("type").get<std::string>();
    const int m = mp.half_width;
    if (type != "zero") {
        mp.forcing.assign(static_cast<std::size_t>(2 * m + 1), cplx{0.0, 0.0});
        if (type == "single_site") {
            const int site = f.at("site").get<int>();
            if (site < -m || site > m)
                throw ValidationError("params.forcing.site: outside [-m, m]");
            mp.forcing[static_cast<std::size_t>(site + m)] =
                cplx{f.at("re").get<double>(), f.at("im").get<double>()};
        } else if (type == "box") {
            const int k = f.at("half_width").get<int>();
            const double nrm = f.at("norm").get<double>();
            if (k < 0 || k > m) throw ValidationError("params.forcing.half_width: outside [0, m]");
            const double a = nrm / std::sqrt(2.0 * k + 1.0);
            for (int n = -k; n <= k; ++n) mp.forcing[static_cast<std::size_t>(n + m)] = a;
        } else if (type == "gaussian") {
            const LatticeState g = gaussian_state(m, f.at("center").get<double>(),
                                                  f.at("width").get<double>(), 1.0);
            const double nrm = f.at("norm").get<double>();
            for (std::size_t i = 0; i < g.amplitudes.size(); ++i)
                mp.forcing[i] = nrm * g.amplitudes[i];
        }
    }
    mp.validate();
    return mp;
}

}  // namespace detail

inline ModelParams ExperimentConfig::params() const {
    return detail::params_from_canonical(canonical);
}

inline IntegratorConfig ExperimentConfig::integrator() const {
    const json& ig = canonical.at("integrator");
    IntegratorConfig c;
    const std::string scheme = ig.at("scheme").get<std::string>();
    if (scheme == "implicit_midpoint")
        c.scheme = Scheme::implicit_midpoint;
    else if (scheme == "rk4")
        c.scheme = Scheme::rk4;
    else
        throw ValidationError("integrator.scheme: unknown value '" + scheme + "'");
    c.dt = ig.at("dt").get<double>();
    c.solver_tol = ig.at("solver_tol").get<double>();
    c.max_inner_iters = ig.at("max_inner_iters").get<int>();
    c.record_stride = ig.at("record_stride").get<int>();
    c.validate();
    return c;
}

inline LatticeState ExperimentConfig::initial_state(const ModelParams& p) const {
    const json& ic = canonical.at("initial_condition");
    const std::string type = ic.at("type").get<std::string>();
    const int m = p.half_width;
    if (type == "zero") return zero_state(m);
    if (type == "single_site")
        return single_site_state(m, ic.at("site").get<int>(),
                                 cplx{ic.at("re").get<double>(), ic.at("im").get<double>()});
    if (type == "gaussian")
        return gaussian_state(m, ic.at("center").get<double>(), ic.at("width").get<double>(),
                              ic.at("charge").get<double>());
    if (type == "anticontinuum") {
        if (!canonical.contains("omega"))
            throw ValidationError("initial_condition: anticontinuum seed needs 'omega'");
        return anticontinuum_seed(ic.at("support").get<std::vector<int>>(),
                                  canonical.at("omega").get<double>(), p.sigma, m);
    }
    if (type == "random_sphere") {
        Rng rng(seed, 0x5EEDBA11ULL);
        LatticeState u(m);
        for (auto& a : u.amplitudes) a = rng.complex_normal();
        const double target = ic.at("norm").get<double>();
        const double nrm = norm_l2(u);
        if (nrm > 0.0)
            for (auto& a : u.amplitudes) a *= target / nrm;
        return u;
    }
    if (type == "file") {
        std::ifstream in(ic.at("path").get<std::string>());
        if (!in) throw ValidationError("initial_condition.path: cannot open file");
        json data = json::parse(in, nullptr, true, true);
        const auto re = data.at("re").get<std::vector<double>>();
        const auto im = data.at("im").get<std::vector<double>>();
        if (re.size() != static_cast<std::size_t>(2 * m + 1) || im.size() != re.size())
            throw ValidationError("initial_condition file: arrays must have length 2m+1");
        LatticeState u(m);
        for (std::size_t i = 0; i < re.size(); ++i) u.amplitudes[i] = cplx{re[i], im[i]};
        return u;
    }
    throw ValidationError("initial_condition.type: unknown value '" + type + "'");
}

inline std::optional<WeightSpec> ExperimentConfig::record_weight() const {
    const json* w = nullptr;
    if (canonical.contains("weight"))
        w = &canonical.at("weight");
    else if (canonical.at("record").contains("weight"))
        w = &canonical.at("record").at("weight");
    if (!w) return std::nullopt;
    const std::string family = w->at("family").get<std::string>();
    WeightFamily fam;
    if (family == "one_sided")
        fam = WeightFamily::exponential_one_sided;
    else if (family == "two_sided")
        fam = WeightFamily::exponential_two_sided;
    else
        throw ValidationError("weight.family: must be 'one_sided' or 'two_sided'");
    const int m = canonical.at("params").at("m").get<int>();
    return make_weight_spec(fam, w->at("lambda").get<double>(), std::max(1, m));
}

inline std::optional<int> ExperimentConfig::record_tail_M() const {
    if (canonical.at("record").contains("tail_M"))
        return canonical.at("record").at("tail_M").get<int>();
    if (canonical.contains("test_M")) {
        const auto v = canonical.at("test_M").get<std::vector<int>>();
        if (!v.empty()) return *std::min_element(v.begin(), v.end());
    }
    if (canonical.contains("M")) return canonical.at("M").get<int>();
    return std::nullopt;
}

/// Parse, apply defaults, validate (types, ranges, cross-module constraints)
/// and produce the canonical form that config_echo.json reserializes.
inline ExperimentConfig config_from_json(const json& raw, std::optional<Kind> expected_kind = {}) {
    if (!raw.is_object()) throw ValidationError("config: top level must be a JSON object");

    ExperimentConfig cfg;
    std::string kind_str;
    if (raw.contains("kind"))
        kind_str = detail::require<std::string>(raw, "kind", "config");
    else if (expected_kind)
        kind_str = to_string(*expected_kind);
    else
        throw ValidationError("config: missing required key 'kind'");
    cfg.kind = kind_from_string(kind_str);
    if (expected_kind && cfg.kind != *expected_kind)
        throw ValidationError("config kind '" + kind_str + "' does not match subcommand '" +
                              to_string(*expected_kind) + "'");

    // Keys shared by all kinds, then per-kind extras.
    std::vector<std::string> allowed = {"kind",   "params",     "integrator", "initial_condition",
                                        "seed",   "output_dir", "snapshots",  "record",
                                        "sweep"};
    auto allow = [&allowed](std::initializer_list<const char*> keys) {
        for (const char* k : keys) allowed.push_back(k);
    };
    switch (cfg.kind) {
        case Kind::simulate: allow({"T"}); break;
        case Kind::standing_wave: allow({"omega", "tol", "max_iter", "coupling_schedule"}); break;
        case Kind::contraction_probe: allow({"omega", "R", "n_pairs", "tol", "max_iter"}); break;
        case Kind::geometry_check: allow({"omega", "r", "n_samples"}); break;
        case Kind::tail_audit: allow({"T", "eta", "rho1", "test_M"}); break;
        case Kind::truncation_sweep: allow({"T", "m_values", "m_ref"}); break;
        case Kind::weight_audit: allow({"T", "eta", "M", "weight"}); break;
    }
    detail::check_keys(raw, allowed, "config");

    json c;
    c["kind"] = kind_str;

    // params
    if (!raw.contains("params")) throw ValidationError("config: missing required key 'params'");
    const json& p = raw.at("params");
    detail::check_keys(p, {"epsilon", "delta", "sigma", "m", "forcing"}, "params");
    json cp;
    cp["epsilon"] = detail::get_or<double>(p, "epsilon", 1.0);
    cp["delta"] = detail::get_or<double>(p, "delta", 0.0);
    cp["sigma"] = detail::get_or<double>(p, "sigma", 1.0);
    cp["m"] = detail::require<int>(p, "m", "params");
    cp["forcing"] = p.contains("forcing") ? detail::normalize_forcing(p.at("forcing"))
                                          : json{{"type", "zero"}};
    c["params"] = cp;

    // integrator (defaults: implicit midpoint, dt 0.01, solver_tol 1e-12, stride 10)
    json ci;
    const json ig = raw.contains("integrator") ? raw.at("integrator") : json::object();
    detail::check_keys(ig, {"scheme", "dt", "solver_tol", "max_inner_iters", "record_stride"},
                       "integrator");
    ci["scheme"] = detail::get_or<std::string>(ig, "scheme", "implicit_midpoint");
    ci["dt"] = detail::get_or<double>(ig, "dt", 0.01);
    ci["solver_tol"] = detail::get_or<double>(ig, "solver_tol", 1e-12);
    ci["max_inner_iters"] = detail::get_or<int>(ig, "max_inner_iters", 50);
    ci["record_stride"] = detail::get_or<int>(ig, "record_stride", 10);
    c["integrator"] = ci;

    // initial condition: standing_wave defaults to the single-site seed,
    // everything else to the zero state.
    if (raw.contains("initial_condition")) {
        c["initial_condition"] = detail::normalize_initial(raw.at("initial_condition"));
    } else if (cfg.kind == Kind::standing_wave) {
        c["initial_condition"] = json{{"type", "anticontinuum"}, {"support", json::array({0})}};
    } else {
        c["initial_condition"] = json{{"type", "zero"}};
    }

    cfg.seed = detail::get_or<std::uint64_t>(raw, "seed", 0);
    c["seed"] = cfg.seed;
    cfg.output_dir = detail::get_or<std::string>(raw, "output_dir", "out");
    c["output_dir"] = cfg.output_dir;
    c["snapshots"] = detail::get_or<bool>(raw, "snapshots", false);

    const json rec = raw.contains("record") ? raw.at("record") : json::object();
    detail::check_keys(rec, {"tail_M", "weight"}, "record");
    json crec = json::object();
    if (rec.contains("tail_M")) crec["tail_M"] = rec.at("tail_M").get<int>();
    if (rec.contains("weight")) {
        detail::check_keys(rec.at("weight"), {"family", "lambda"}, "record.weight");
        crec["weight"] = rec.at("weight");
    }
    c["record"] = crec;

    // Kind-specific fields with defaults.
    switch (cfg.kind) {
        case Kind::simulate:
            c["T"] = detail::require<double>(raw, "T", "simulate");
            break;
        case Kind::standing_wave:
            c["omega"] = detail::require<double>(raw, "omega", "standing_wave");
            c["tol"] = detail::get_or<double>(raw, "tol", 1e-10);
            c["max_iter"] = detail::get_or<int>(raw, "max_iter", 50);
            if (raw.contains("coupling_schedule"))
                c["coupling_schedule"] = raw.at("coupling_schedule").get<std::vector<double>>();
            break;
        case Kind::contraction_probe:
            c["omega"] = detail::require<double>(raw, "omega", "contraction_probe");
            c["R"] = detail::require<double>(raw, "R", "contraction_probe");
            c["n_pairs"] = detail::get_or<int>(raw, "n_pairs", 1000);
            c["tol"] = detail::get_or<double>(raw, "tol", 1e-12);
            c["max_iter"] = detail::get_or<int>(raw, "max_iter", 200);
            break;
        case Kind::geometry_check:
            c["omega"] = detail::require<double>(raw, "omega", "geometry_check");
            c["r"] = detail::require<double>(raw, "r", "geometry_check");
            c["n_samples"] = detail::get_or<int>(raw, "n_samples", 10000);
            break;
        case Kind::tail_audit:
            c["T"] = detail::require<double>(raw, "T", "tail_audit");
            c["eta"] = detail::require<double>(raw, "eta", "tail_audit");
            c["rho1"] = detail::require<double>(raw, "rho1", "tail_audit");
            if (raw.contains("test_M")) c["test_M"] = raw.at("test_M").get<std::vector<int>>();
            break;
        case Kind::truncation_sweep:
            c["T"] = detail::require<double>(raw, "T", "truncation_sweep");
            c["m_values"] = detail::require<std::vector<int>>(raw, "m_values", "truncation_sweep");
            c["m_ref"] = detail::require<int>(raw, "m_ref", "truncation_sweep");
            break;
        case Kind::weight_audit:
            c["T"] = detail::require<double>(raw, "T", "weight_audit");
            c["eta"] = detail::require<double>(raw, "eta", "weight_audit");
            c["M"] = detail::require<int>(raw, "M", "weight_audit");
            if (!raw.contains("weight"))
                throw ValidationError("weight_audit: missing required key 'weight'");
            detail::check_keys(raw.at("weight"), {"family", "lambda"}, "weight");
            c["weight"] = raw.at("weight");
            break;
    }

    if (raw.contains("sweep")) {
        const json& sw = raw.at("sweep");
        detail::check_keys(sw, {"grid"}, "sweep");
        const json& grid = sw.contains("grid") ? sw.at("grid") : json::array();
        if (!grid.is_array()) throw ValidationError("sweep.grid: must be an array");
        json cgrid = json::array();
        for (const auto& axis : grid) {
            detail::check_keys(axis, {"path", "values"}, "sweep.grid entry");
            json ca;
            ca["path"] = detail::require<std::string>(axis, "path", "sweep.grid");
            ca["values"] = detail::require<std::vector<double>>(axis, "values", "sweep.grid");
            cgrid.push_back(ca);
        }
        c["sweep"] = json{{"grid", cgrid}};
    }

    cfg.canonical = c;

    // Cross-module constraints checked up front.
    const ModelParams params = cfg.params();
    cfg.integrator();
    if (cfg.kind == Kind::tail_audit) {
        const double rho = params.forcing_norm() / params.delta;
        if (!(params.delta > 0.0))
            throw ValidationError("tail_audit: params.delta must be > 0");
        if (!(c.at("rho1").get<double>() > rho))
            throw ValidationError(
                "tail_audit.rho1: must exceed ||g||/delta (absorbing-ball radius constraint)");
        if (!(c.at("eta").get<double>() > 0.0))
            throw ValidationError("tail_audit.eta: must be > 0");
    }
    if (cfg.kind == Kind::weight_audit) {
        const auto spec = cfg.record_weight();
        const auto [ok, slack] = damping_condition(params.delta, *spec);
        if (!ok)
            throw ValidationError(
                "weight_audit: damping condition delta/2 - 2 d1 d2^{-1/2} >= 0 fails (slack " +
                std::to_string(slack) + "); for the one-sided family this is 8 sinh(lambda/2) <= delta");
    }
    if (cfg.kind == Kind::truncation_sweep) {
        const auto ms = c.at("m_values").get<std::vector<int>>();
        if (ms.empty()) throw ValidationError("truncation_sweep.m_values: must be nonempty");
        if (c.at("m_ref").get<int>() <= *std::max_element(ms.begin(), ms.end()))
            throw ValidationError("truncation_sweep.m_ref: must exceed every entry of m_values");
        if (params.half_width > *std::min_element(ms.begin(), ms.end()))
            throw ValidationError(
                "truncation_sweep.params.m: the template width carries the initial condition and "
                "must not exceed the smallest entry of m_values");
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<Kind> expected_kind = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    json raw;
    try {
        raw = json::parse(in, nullptr, true, true);  // allow comments
    } catch (const json::parse_error& err) {
        throw ValidationError(std::string("config: parse error: ") + err.what());
    }
    return config_from_json(raw, expected_kind);
}

/// Canonical serialization used for config_echo.json; loading the echo and
/// re-serializing reproduces it byte for byte.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    return cfg.canonical.dump(2) + "\n";
}

}  // namespace dnls::cli
