#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dnls/config.hpp"
#include "dnls/parallel.hpp"
#include "dnls/stationary.hpp"

namespace dnls::cli {

namespace fs = std::filesystem;

/// 17 significant digits: enough for exact double round trips in the CSVs.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct RunArtifacts {
    fs::path config_echo;
    fs::path diagnostics_csv;
    fs::path report_json;
    std::optional<fs::path> snapshots;
    json report;
    bool passed = false;
    int exit_code = 0;  // 0 pass, 2 numerical/audit failure
};

// ---------------------------------------------------------------------------
// Serialization of module reports
// ---------------------------------------------------------------------------

inline json to_json(const DecayReport& r) {
    json j;
    j["passed"] = r.passed;
    j["gronwall_checked"] = r.gronwall_checked;
    if (r.gronwall_checked) {
        j["gronwall_min_margin"] = r.gronwall_min_margin;
        j["gronwall_worst_time"] = r.gronwall_worst_time;
    }
    j["growth_checked"] = r.growth_checked;
    if (r.growth_checked) {
        j["growth_min_margin"] = r.growth_min_margin;
        j["growth_worst_time"] = r.growth_worst_time;
    }
    j["jbalance_max_residual"] = r.jbalance_max_residual;
    j["jbalance_worst_time"] = r.jbalance_worst_time;
    if (!r.failure.empty()) j["failure"] = r.failure;
    return j;
}

inline json to_json(const TailReport& r) {
    json j;
    j["eta"] = r.eta;
    j["K_eta"] = r.K_eta;
    j["T_eta"] = r.T_eta;
    j["bound"] = r.bound;
    j["passed"] = r.passed;
    j["C1"] = r.C1;
    j["tested_M"] = r.tested_M;
    if (r.t_entry) j["t_entry"] = *r.t_entry;
    if (!r.message.empty()) j["message"] = r.message;
    json tail = json::array();
    for (const auto& [t, v] : r.observed_tail) tail.push_back(json::array({t, v}));
    j["observed_tail"] = tail;
    return j;
}

inline json to_json(const ContractionReport& r) {
    return json{{"R", r.R},
                {"Ec", r.Ec},
                {"lipschitz_bound", r.lipschitz_bound},
                {"empirical_ratio_max", r.empirical_ratio_max},
                {"converged_to_zero", r.converged_to_zero},
                {"iterations", r.iterations},
                {"n_pairs", r.n_pairs},
                {"half_width", r.half_width},
                {"seed", r.seed}};
}

inline json to_json(const GeometryReport& r) {
    return json{{"r", r.r},
                {"kappa1", r.kappa1},
                {"alpha", r.alpha},
                {"rim_min_sampled", r.rim_min_sampled},
                {"ray_negative_t", r.ray_negative_t},
                {"rim_ok", r.rim_ok},
                {"n_samples", r.n_samples},
                {"half_width", r.half_width},
                {"seed", r.seed}};
}

inline json to_json(const TruncationReport& r) {
    return json{{"m_values", r.m_values},
                {"m_ref", r.m_ref},
                {"T", r.T},
                {"deltas", r.deltas},
                {"monotone", r.monotone}};
}

inline json to_json(const StandingWave& w) {
    return json{{"omega", w.omega},
                {"coupling", w.coupling},
                {"residual", w.residual},
                {"energy", w.energy},
                {"l2_norm", norm_l2(w.phi)},
                {"trivial", w.trivial}};
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

inline void write_diagnostics_csv(const fs::path& path, const Trajectory* traj,
                                  std::optional<int> tail_M,
                                  const std::optional<WeightSpec>& weight) {
    std::ofstream out(path);
    out << "t,charge,energy,l21_sq,tail_M,weighted_norm,J,Lambda\n";
    if (!traj) return;
    for (std::size_t i = 0; i < traj->rows.size(); ++i) {
        const auto& row = traj->rows[i];
        out << fmt17(row.t) << ',' << fmt17(row.charge) << ',' << fmt17(row.energy) << ','
            << fmt17(row.l21_sq) << ',';
        if (tail_M)
            out << fmt17(tail_mass(traj->snapshots[i], *tail_M));
        else if (row.tail_mass)
            out << fmt17(*row.tail_mass);
        out << ',';
        if (weight)
            out << fmt17(weighted_norm(traj->snapshots[i], *weight));
        else if (row.weighted_norm)
            out << fmt17(*row.weighted_norm);
        out << ',' << fmt17(row.J) << ',' << fmt17(row.Lambda) << '\n';
    }
}

inline void write_snapshots_jsonl(const fs::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    for (const auto& snap : traj.snapshots) {
        json line;
        line["t"] = snap.time;
        json re = json::array(), im = json::array();
        for (const auto& z : snap.amplitudes) {
            re.push_back(z.real());
            im.push_back(z.imag());
        }
        line["re"] = re;
        line["im"] = im;
        out << line.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Single-run dispatch
// ---------------------------------------------------------------------------

namespace detail {

struct KindOutcome {
    json report;
    bool passed = true;
    std::optional<Trajectory> traj;
};

inline KindOutcome run_kind(const ExperimentConfig& cfg) {
    const ModelParams params = cfg.params();
    const IntegratorConfig integ = cfg.integrator();
    const json& c = cfg.canonical;
    KindOutcome out;

    switch (cfg.kind) {
        case Kind::simulate: {
            const LatticeState u0 = cfg.initial_state(params);
            out.traj = integrate(u0, params, integ, c.at("T").get<double>());
            const DecayReport audit = decay_audit(*out.traj);
            out.report["decay_audit"] = to_json(audit);
            out.report["initial_charge"] = out.traj->rows.front().charge;
            out.report["final_charge"] = out.traj->rows.back().charge;
            out.report["initial_energy"] = out.traj->rows.front().energy;
            out.report["final_energy"] = out.traj->rows.back().energy;
            out.passed = audit.passed;
            break;
        }
        case Kind::standing_wave: {
            const double omega = c.at("omega").get<double>();
            const double tol = c.at("tol").get<double>();
            const int max_iter = c.at("max_iter").get<int>();
            const LatticeState seed_state = cfg.initial_state(params);
            if (c.contains("coupling_schedule")) {
                const auto schedule = c.at("coupling_schedule").get<std::vector<double>>();
                const ContinuationResult res =
                    continuation(seed_state, omega, params.sigma, schedule, tol, max_iter);
                json branch = json::array();
                for (const auto& w : res.branch) branch.push_back(to_json(w));
                out.report["branch"] = branch;
                out.report["complete"] = res.complete;
                if (res.failed_coupling) {
                    out.report["failed_coupling"] = *res.failed_coupling;
                    out.report["message"] = res.message;
                }
                if (!res.branch.empty()) out.report["wave"] = to_json(res.branch.back());
                out.passed = res.complete;
            } else {
                const StandingWave wave = newton_standing_wave(seed_state, params.epsilon, omega,
                                                               params.sigma, tol, max_iter);
                out.report["wave"] = to_json(wave);
            }
            out.report["critical_energy"] = critical_energy(omega, params.sigma);
            break;
        }
        case Kind::contraction_probe: {
            const ContractionReport rep = contraction_probe(
                c.at("R").get<double>(), params.epsilon, c.at("omega").get<double>(), params.sigma,
                c.at("n_pairs").get<int>(), cfg.seed, params.half_width,
                c.at("max_iter").get<int>(), c.at("tol").get<double>());
            out.report = to_json(rep);
            out.passed = rep.empirical_ratio_max <= rep.lipschitz_bound * (1.0 + 1e-9) &&
                         (rep.R >= rep.Ec || rep.converged_to_zero);
            break;
        }
        case Kind::geometry_check: {
            const GeometryReport rep = mountain_pass_geometry(
                c.at("r").get<double>(), params.epsilon, c.at("omega").get<double>(), params.sigma,
                c.at("n_samples").get<int>(), cfg.seed, params.half_width);
            out.report = to_json(rep);
            out.passed = rep.rim_ok;
            break;
        }
        case Kind::tail_audit: {
            const LatticeState u0 = cfg.initial_state(params);
            out.traj = integrate(u0, params, integ, c.at("T").get<double>());
            const double rho1 = c.at("rho1").get<double>();
            std::vector<int> test_M;
            if (c.contains("test_M")) test_M = c.at("test_M").get<std::vector<int>>();
            const TailReport rep =
                tail_audit(*out.traj, c.at("eta").get<double>(), rho1, CutoffSpec{}, test_M);
            out.report = to_json(rep);
            const double R = std::max(std::sqrt(out.traj->rows.front().charge), rho1);
            out.report["prediction"] =
                json{{"rho", params.forcing_norm() / params.delta},
                     {"t0_predicted", absorbing_prediction(params, rho1, R).t0_predicted}};
            out.passed = rep.passed;
            break;
        }
        case Kind::truncation_sweep: {
            const LatticeState u0 = cfg.initial_state(params);
            const TruncationReport rep =
                truncation_delta({u0}, params, c.at("m_values").get<std::vector<int>>(),
                                 c.at("m_ref").get<int>(), c.at("T").get<double>(), integ);
            out.report = to_json(rep);
            break;
        }
        case Kind::weight_audit: {
            const auto spec = cfg.record_weight();
            const LatticeState u0 = cfg.initial_state(params);
            out.traj = integrate(u0, params, integ, c.at("T").get<double>());
            const TailReport rep =
                weighted_audit(*out.traj, *spec, c.at("eta").get<double>(), c.at("M").get<int>());
            out.report = to_json(rep);
            out.report["damping_slack"] = damping_condition(params.delta, *spec).second;
            out.passed = rep.passed;
            break;
        }
    }
    return out;
}

inline void flatten_scalars(const json& j, const std::string& prefix,
                            std::map<std::string, std::string>& out) {
    for (const auto& [key, value] : j.items()) {
        const std::string name = prefix.empty() ? key : prefix + "." + key;
        if (value.is_number()) {
            out[name] = fmt17(value.get<double>());
        } else if (value.is_boolean()) {
            out[name] = value.get<bool>() ? "1" : "0";
        } else if (value.is_object()) {
            flatten_scalars(value, name, out);
        }
    }
}

}  // namespace detail

/// Run one experiment: writes config_echo.json, diagnostics.csv, report.json
/// (and snapshots.jsonl when requested) into the output directory. Numerical
/// failures and failed audits return exit code 2 with the failure recorded in
/// the report; they are never silently swallowed.
inline RunArtifacts run(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    RunArtifacts art;
    art.config_echo = dir / "config_echo.json";
    art.diagnostics_csv = dir / "diagnostics.csv";
    art.report_json = dir / "report.json";
    {
        std::ofstream echo(art.config_echo);
        echo << serialize_config(cfg);
    }

    json envelope;
    envelope["kind"] = to_string(cfg.kind);
    envelope["seed"] = cfg.seed;

    std::optional<Trajectory> traj;
    try {
        detail::KindOutcome outcome = detail::run_kind(cfg);
        traj = std::move(outcome.traj);
        envelope["status"] = "ok";
        envelope["report"] = outcome.report;
        art.passed = outcome.passed;
        art.exit_code = outcome.passed ? 0 : 2;
    } catch (const NumericalError& err) {
        envelope["status"] = "numerical_error";
        envelope["error"] = json{{"message", err.what()},
                                 {"time", err.time},
                                 {"iteration", err.iteration},
                                 {"residual", err.residual}};
        art.passed = false;
        art.exit_code = 2;
    }
    envelope["passed"] = art.passed;

    write_diagnostics_csv(art.diagnostics_csv, traj ? &*traj : nullptr, cfg.record_tail_M(),
                          cfg.record_weight());
    if (cfg.want_snapshots() && traj) {
        art.snapshots = dir / "snapshots.jsonl";
        write_snapshots_jsonl(*art.snapshots, *traj);
    }
    {
        std::ofstream rep(art.report_json);
        rep << envelope.dump(2) << '\n';
    }
    art.report = envelope;
    return art;
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

struct SweepResult {
    fs::path csv;
    int exit_code = 0;
    int n_points = 0;
    int n_failed = 0;
};

/// Expand the config's grid, run every point (concurrently, with per-point
/// seeds derived from the base seed and the grid index) and write one
/// aggregated CSV row per point, in grid order regardless of completion order.
inline SweepResult sweep(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    {
        std::ofstream echo(dir / "config_echo.json");
        echo << serialize_config(cfg);
    }

    struct Axis {
        std::string path;
        std::vector<double> values;
    };
    std::vector<Axis> axes;
    if (cfg.canonical.contains("sweep"))
        for (const auto& axis : cfg.canonical.at("sweep").at("grid"))
            axes.push_back({axis.at("path").get<std::string>(),
                            axis.at("values").get<std::vector<double>>()});

    std::size_t n_points = axes.empty() ? 0 : 1;
    for (const auto& axis : axes) n_points *= axis.values.size();

    struct PointRow {
        std::vector<double> coords;
        std::string status = "ok";
        std::string error;
        bool passed = false;
        json report;
    };
    std::vector<PointRow> rows(n_points);

    // Validate axis paths once, against the canonical config.
    for (const auto& axis : axes) {
        std::string ptr = "/" + axis.path;
        for (auto& ch : ptr)
            if (ch == '.') ch = '/';
        if (!cfg.canonical.contains(json::json_pointer(ptr)) ||
            !cfg.canonical.at(json::json_pointer(ptr)).is_number())
            throw ValidationError("sweep.grid: path '" + axis.path +
                                  "' does not name a numeric config field");
    }

    parallel_for(n_points, [&](std::size_t index) {
        PointRow& row = rows[index];
        json point = cfg.canonical;
        point.erase("sweep");
        std::size_t rem = index;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& axis = axes[a];
            const std::size_t k = rem % axis.values.size();
            rem /= axis.values.size();
            row.coords.resize(axes.size());
            row.coords[a] = axis.values[k];
            std::string ptr = "/" + axis.path;
            for (auto& ch : ptr)
                if (ch == '.') ch = '/';
            point[json::json_pointer(ptr)] = axis.values[k];
        }
        std::uint64_t state = cfg.seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
        point["seed"] = splitmix64(state);
        point["output_dir"] = (dir / "points" / std::to_string(index)).string();
        try {
            const ExperimentConfig point_cfg = config_from_json(point);
            const RunArtifacts art = run(point_cfg);
            row.passed = art.passed;
            row.status = art.passed ? "ok" : "failed";
            if (!art.passed) {
                row.status = art.report.value("status", "failed");
                if (row.status == "ok") row.status = "audit_failed";
                if (art.report.contains("error"))
                    row.error = art.report.at("error").value("message", "");
            }
            if (art.report.contains("report")) row.report = art.report.at("report");
        } catch (const ValidationError& err) {
            row.status = "validation_error";
            row.error = err.what();
        } catch (const NumericalError& err) {
            row.status = "numerical_error";
            row.error = err.what();
        }
    });

    // Deterministic header: the sorted union of scalar report fields, minus
    // names already used by the fixed row columns.
    std::set<std::string> report_keys;
    std::vector<std::map<std::string, std::string>> flat(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        detail::flatten_scalars(rows[i].report, "", flat[i]);
        for (const auto& [k, v] : flat[i]) {
            (void)v;
            if (k != "passed" && k != "status" && k != "error" && k != "index")
                report_keys.insert(k);
        }
    }

    SweepResult result;
    result.csv = dir / "sweep.csv";
    result.n_points = static_cast<int>(n_points);
    std::ofstream out(result.csv);
    out << "index";
    for (const auto& axis : axes) out << ',' << axis.path;
    out << ",status,passed,error";
    for (const auto& key : report_keys) out << ',' << key;
    out << '\n';
    for (std::size_t i = 0; i < n_points; ++i) {
        out << i;
        for (double c : rows[i].coords) out << ',' << fmt17(c);
        out << ',' << rows[i].status << ',' << (rows[i].passed ? 1 : 0) << ',' << '"'
            << rows[i].error << '"';
        for (const auto& key : report_keys) {
            out << ',';
            const auto it = flat[i].find(key);
            if (it != flat[i].end()) out << it->second;
        }
        out << '\n';
        if (!rows[i].passed) ++result.n_failed;
    }
    result.exit_code = result.n_failed > 0 ? 2 : 0;

    json envelope;
    envelope["kind"] = "sweep:" + to_string(cfg.kind);
    envelope["n_points"] = result.n_points;
    envelope["n_failed"] = result.n_failed;
    envelope["passed"] = (result.n_failed == 0);
    std::ofstream rep(dir / "report.json");
    rep << envelope.dump(2) << '\n';
    return result;
}

/// Dispatch: configs carrying a sweep grid fan out, everything else is a
/// single run. Returns the process exit code.
inline int run_config(const ExperimentConfig& cfg) {
    if (cfg.has_sweep()) return sweep(cfg).exit_code;
    return run(cfg).exit_code;
}

}  // namespace dnls::cli
