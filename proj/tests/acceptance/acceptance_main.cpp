// End-to-end acceptance suite: one pass/fail line per criterion.
//
// Usage: acceptance [--dnls-bin <path>] [criterion numbers...]
// Exit code: number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dnls/dnls.hpp"

namespace fs = std::filesystem;
using namespace dnls;

namespace {

constexpr std::uint64_t kSeed = 420240817;

std::string g_dnls_bin;

double wall_seconds(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Shared fixtures -----------------------------------------------------------

// Criteria 1-3 share the conservative production runs: eps = 1, m = 100,
// Gaussian data of width 3 and charge 3, implicit midpoint.
ModelParams conservative_params(double sigma) {
    ModelParams p;
    p.half_width = 100;
    p.sigma = sigma;
    return p;
}

const LatticeState& production_gaussian() {
    static const LatticeState u0 = gaussian_state(100, 0.0, 3.0, 3.0);
    return u0;
}

const Trajectory& charge_run(double sigma) {
    static std::optional<Trajectory> runs[2];
    const int idx = (sigma == 1.0) ? 0 : 1;
    if (!runs[idx]) {
        IntegratorConfig cfg;
        cfg.dt = 0.01;
        cfg.record_stride = 10;
        runs[idx] = integrate(production_gaussian(), conservative_params(sigma), cfg, 100.0);
    }
    return *runs[idx];
}

// Criteria 6 and 11 share the dissipative setup delta = 0.5, ||g|| = 0.1 with
// g supported in |n| <= 10, so rho = 0.2 and rho1 = 0.3.
ModelParams absorbing_params(int m) {
    ModelParams p;
    p.half_width = m;
    p.sigma = 1.0;
    p.delta = 0.5;
    p.forcing.assign(static_cast<std::size_t>(2 * m + 1), cplx{0.0, 0.0});
    const double a = 0.1 / std::sqrt(21.0);
    for (int n = -10; n <= 10; ++n) p.forcing[static_cast<std::size_t>(n + m)] = a;
    return p;
}

LatticeState random_sphere(int m, std::uint64_t stream, double norm) {
    Rng rng(kSeed, stream);
    LatticeState u(m);
    for (auto& a : u.amplitudes) a = rng.complex_normal();
    const double nrm = norm_l2(u);
    for (auto& a : u.amplitudes) a *= norm / nrm;
    return u;
}

// The standing wave of criterion 8, shared with criterion 9.
const StandingWave& production_wave() {
    static std::optional<StandingWave> wave;
    if (!wave) {
        const LatticeState seed = anticontinuum_seed({0}, 1.0, 1.0, 20);
        const ContinuationResult res =
            continuation(seed, 1.0, 1.0, {0.0, 0.25, 0.5, 0.75, 1.0}, 1e-10);
        if (!res.complete) throw NumericalError("continuation did not complete");
        wave = res.branch.back();
    }
    return *wave;
}

int run_cli(const std::vector<std::string>& args) {
    std::string cmd = g_dnls_bin;
    for (const auto& a : args) cmd += " " + a;
    cmd += " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

// Criteria -------------------------------------------------------------------

Outcome criterion1() {
    Outcome out;
    double worst = 0.0;
    const double elapsed = wall_seconds([&] {
        for (const double sigma : {1.0, 3.0}) {
            const Trajectory& traj = charge_run(sigma);
            const double q0 = traj.rows.front().charge;
            for (const auto& row : traj.rows)
                worst = std::max(worst, std::abs(row.charge - q0) / q0);
        }
    });
    out.pass = worst <= 1e-9 && elapsed <= 10.0;
    out.detail = "max relative charge drift " + fmt(worst) + " (tol 1e-9), runtime " +
                 fmt(elapsed) + " s (limit 10)";
    return out;
}

Outcome criterion2() {
    Outcome out;
    out.pass = true;
    for (const double sigma : {1.0, 3.0}) {
        double drift[2];
        for (int i = 0; i < 2; ++i) {
            IntegratorConfig cfg;
            cfg.dt = (i == 0) ? 1e-3 : 5e-4;
            cfg.record_stride = 100;
            const Trajectory traj =
                integrate(production_gaussian(), conservative_params(sigma), cfg, 100.0);
            const double e0 = traj.rows.front().energy;
            double worst = 0.0;
            for (const auto& row : traj.rows)
                worst = std::max(worst, std::abs(row.energy - e0));
            drift[i] = worst / std::abs(e0);
        }
        const double ratio = drift[0] / drift[1];
        const bool ok = drift[0] <= 1e-6 && ratio >= 3.5 && ratio <= 4.5;
        out.pass = out.pass && ok;
        out.detail += "sigma=" + fmt(sigma) + ": drift " + fmt(drift[0]) +
                      " (tol 1e-6), halving ratio " + fmt(ratio) + " (in [3.5,4.5]); ";
    }
    return out;
}

Outcome criterion3() {
    Outcome out;
    out.pass = true;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const double sigma : {1.0, 3.0}) {
        const Trajectory& traj = charge_run(sigma);
        const double q0 = traj.rows.front().charge;
        const double bound =
            traj.rows.front().l21_sq + 2.0 / (sigma + 1.0) * std::pow(q0, sigma + 1.0);
        for (const auto& row : traj.rows) {
            min_margin = std::min(min_margin, bound - row.l21_sq);
            if (row.l21_sq > bound) out.pass = false;
        }
    }
    out.detail = "growth bound min margin " + fmt(min_margin) + " (zero violations required)";
    return out;
}

Outcome criterion4() {
    Outcome out;
    ModelParams p = conservative_params(3.0);
    const LatticeState u0 = gaussian_state(100, 0.0, 1.0, 10.0);
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    cfg.record_stride = 10;
    try {
        const Trajectory traj = integrate(u0, p, cfg, 100.0);
        const double q0 = traj.rows.front().charge;
        const double bound = traj.rows.front().l21_sq + 0.5 * std::pow(q0, 4.0);
        double l21_max = 0.0;
        bool bounded = true;
        for (const auto& row : traj.rows) {
            l21_max = std::max(l21_max, row.l21_sq);
            if (row.l21_sq > bound) bounded = false;
        }
        out.pass = bounded;
        out.detail = "run completed to T=100; max ||u||^2_{l^2_1} " + fmt(l21_max) +
                     " <= bound " + fmt(bound);
    } catch (const NumericalError& err) {
        out.pass = false;
        out.detail = std::string("run failed: ") + err.what();
    }
    return out;
}

Outcome criterion5() {
    Outcome out;
    ModelParams p;
    p.half_width = 40;
    p.sigma = 1.0;
    p.delta = 0.1;
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.record_stride = 100;
    const LatticeState u0 = gaussian_state(40, 0.0, 4.0, 1.0);
    const Trajectory traj = integrate(u0, p, cfg, 10.0);
    const double q0 = traj.rows.front().charge;
    double worst = 0.0;
    for (const auto& row : traj.rows)
        worst = std::max(worst,
                         std::abs(row.charge - q0 * std::exp(-2.0 * p.delta * row.t)) / q0);
    const DecayReport audit = decay_audit(traj);
    out.pass = worst <= 1e-6 && audit.passed && audit.gronwall_checked &&
               audit.gronwall_min_margin >= 0.0;
    out.detail = "max |charge - exact e^{-2 delta t} law| " + fmt(worst) +
                 " (tol 1e-6); gronwall margin " + fmt(audit.gronwall_min_margin);
    return out;
}

Outcome criterion6() {
    Outcome out;
    const ModelParams p = absorbing_params(50);
    const AbsorbingReport pred = absorbing_prediction(p, 0.3, 1.0);
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    cfg.record_stride = 10;  // samples every 0.1
    double worst_entry = 0.0;
    int entered = 0;
    for (int k = 0; k < 20; ++k) {
        const Trajectory traj = integrate(random_sphere(50, 1000 + k, 1.0), p, cfg, 50.0);
        const auto entry = observe_absorbing_entry(traj, 0.3);
        if (entry) {
            ++entered;
            worst_entry = std::max(worst_entry, *entry);
        }
    }
    out.pass = (entered == 20) && worst_entry <= pred.t0_predicted;
    out.detail = std::to_string(entered) + "/20 trajectories settle; worst entry " +
                 fmt(worst_entry) + " <= t0 " + fmt(pred.t0_predicted);
    return out;
}

Outcome criterion7() {
    Outcome out;
    const double ec = critical_energy(1.0, 1.0);
    const ContractionReport rep = contraction_probe(0.5, 1.0, 1.0, 1.0, 1000, kSeed, 20);
    bool iterations_ok = true;
    int worst_iters = 0;
    for (int k = 0; k < 20; ++k) {
        LatticeState z = random_sphere(20, 2000 + k, 0.9 * ec);
        int iters = 0;
        while (norm_l2(z) > 1e-12 && iters < 200) {
            z = fixed_point_map(z, 1.0, 1.0, 1.0);
            ++iters;
        }
        worst_iters = std::max(worst_iters, iters);
        if (norm_l2(z) > 1e-12) iterations_ok = false;
    }
    out.pass = rep.empirical_ratio_max <= 0.5 + 1e-9 && iterations_ok;
    out.detail = "empirical Lipschitz ratio " + fmt(rep.empirical_ratio_max) +
                 " <= 0.5; all 20 starts in B(0.9 Ec) reach 1e-12 within " +
                 std::to_string(worst_iters) + " iterations";
    return out;
}

Outcome criterion8() {
    Outcome out;
    const StandingWave& wave = production_wave();
    const double ec = critical_energy(1.0, 1.0);
    const double nrm = norm_l2(wave.phi);
    out.pass = wave.residual <= 1e-10 && wave.energy > 0.0 && nrm > ec && !wave.trivial;
    out.detail = "residual " + fmt(wave.residual) + " (tol 1e-10), action " + fmt(wave.energy) +
                 " > 0, ||phi|| " + fmt(nrm) + " > Ec " + fmt(ec);
    return out;
}

Outcome criterion9() {
    Outcome out;
    const StandingWave& wave = production_wave();
    ModelParams p;
    p.half_width = 20;
    p.sigma = 1.0;
    IntegratorConfig cfg;
    cfg.scheme = Scheme::rk4;
    cfg.dt = 1e-3;
    cfg.record_stride = 10;
    const Trajectory traj = integrate(wave.phi, p, cfg, 10.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        const double t = traj.rows[i].t;
        const LatticeState orbit = scaled(wave.phi, std::polar(1.0, t));
        worst = std::max(worst, distance_l2(traj.snapshots[i], orbit));
    }
    out.pass = worst <= 1e-6;
    out.detail = "sup_t ||u(t) - e^{i omega^2 t} phi|| = " + fmt(worst) + " (tol 1e-6)";
    return out;
}

Outcome criterion10() {
    Outcome out;
    const GeometryReport rep = mountain_pass_geometry(1.0, 1.0, 1.0, 1.0, 10000, kSeed, 20);
    out.pass = std::abs(rep.alpha - 0.25) <= 1e-12 && rep.rim_min_sampled >= 0.25 &&
               rep.ray_negative_t <= 10.0;
    out.detail = "alpha " + fmt(rep.alpha) + ", sampled rim min " + fmt(rep.rim_min_sampled) +
                 " >= 0.25, negative-action ray point at t = " + fmt(rep.ray_negative_t);
    return out;
}

Outcome criterion11() {
    Outcome out;
    const ModelParams p = absorbing_params(200);
    const double eta = 2.0 * M_PI * 0.09 / 39.5;  // K(eta) = 40 for this compact forcing
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    cfg.record_stride = 10;
    const Trajectory traj = integrate(random_sphere(200, 3000, 1.0), p, cfg, 20.0);
    const TailReport rep = tail_audit(traj, eta, 0.3, CutoffSpec{}, {41, 60, 80});
    double worst_tail = 0.0;
    for (const auto& [t, tail] : rep.observed_tail) worst_tail = std::max(worst_tail, tail);
    out.pass = rep.passed && rep.K_eta == 40;
    out.detail = "K(eta) = " + std::to_string(rep.K_eta) + " (expect 40), T(eta) = " +
                 fmt(rep.T_eta) + ", worst observed tail " + fmt(worst_tail) + " <= bound " +
                 fmt(rep.bound);
    return out;
}

Outcome criterion12() {
    Outcome out;
    ModelParams tpl;
    tpl.half_width = 400;
    tpl.epsilon = 0.15;  // front speed 2/eps reaches past m = 100 by T = 10, dies before 200
    tpl.delta = 0.1;
    tpl.sigma = 1.0;
    tpl.forcing.assign(801, cplx{0.0, 0.0});
    const double a = 0.1 / std::sqrt(21.0);
    for (int n = -10; n <= 10; ++n) tpl.forcing[static_cast<std::size_t>(n + 400)] = a;
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    cfg.record_stride = 10;
    const LatticeState u0 = gaussian_state(25, 0.0, 8.0, 1.0);
    const TruncationReport rep = truncation_delta({u0}, tpl, {25, 50, 100, 200}, 400, 10.0, cfg);
    bool strict = true;
    for (std::size_t i = 1; i < rep.deltas.size(); ++i)
        if (!(rep.deltas[i] < rep.deltas[i - 1])) strict = false;
    out.pass = strict && rep.deltas.back() <= 1e-6;
    std::string ds;
    for (const double d : rep.deltas) ds += fmt(d) + " ";
    out.detail = "delta_m = [ " + ds + "] strictly decreasing, delta_200 <= 1e-6";
    return out;
}

Outcome criterion13() {
    Outcome out;
    if (g_dnls_bin.empty()) {
        out.pass = false;
        out.detail = "needs --dnls-bin to exercise the CLI";
        return out;
    }
    const fs::path dir = fs::temp_directory_path() / "dnls_acceptance_c13";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto write_config = [&](double delta, const std::string& name) {
        std::ofstream f(dir / name);
        f << "{\n"
          << "  \"kind\": \"weight_audit\",\n"
          << "  \"params\": {\"m\": 100, \"delta\": " << delta << ",\n"
          << "    \"forcing\": {\"type\": \"box\", \"half_width\": 5, \"norm\": 0.1}},\n"
          << "  \"integrator\": {\"dt\": 0.01},\n"
          << "  \"initial_condition\": {\"type\": \"gaussian\", \"width\": 3.0, \"charge\": 1.0},\n"
          << "  \"T\": 50, \"eta\": 0.05, \"M\": 20,\n"
          << "  \"weight\": {\"family\": \"one_sided\", \"lambda\": 0.1},\n"
          << "  \"output_dir\": \"" << (dir / ("out_" + name)).string() << "\"\n"
          << "}\n";
        return (dir / name).string();
    };

    const int ok_exit =
        run_cli({"weight-audit", "--config", write_config(0.5, "pass.json")});
    const int reject_exit =
        run_cli({"weight-audit", "--config", write_config(0.3, "reject.json")});
    out.pass = (ok_exit == 0) && (reject_exit == 1);
    out.detail = "delta=0.5 run exits " + std::to_string(ok_exit) +
                 " (expect 0: weighted norm uniformly bounded over T=50); delta=0.3 config exits " +
                 std::to_string(reject_exit) + " (expect 1: damping condition rejected)";
    return out;
}

Outcome criterion14() {
    Outcome out;
    int fails = 0;
    std::string parts;
    const double elapsed = wall_seconds([&] {
        // adjointness and summation by parts
        double worst_adj = 0.0, worst_parts = 0.0;
        for (int k = 0; k < 1000; ++k) {
            Rng rng(kSeed, 50000 + k);
            LatticeState u(12), v(12);
            for (auto& z : u.amplitudes) z = rng.complex_normal();
            for (auto& z : v.amplitudes) z = rng.complex_normal();
            const double scale = norm_l2(u) * norm_l2(v);
            const LatticeState bu = apply_operator(DiffOp::B, u);
            const LatticeState bsv = apply_operator(DiffOp::Bstar, v);
            worst_adj = std::max(worst_adj, std::abs(inner(bu, v) - inner(u, bsv)) / scale);
            const LatticeState au = apply_operator(DiffOp::A, u);
            const LatticeState bv = apply_operator(DiffOp::B, v);
            worst_parts = std::max(worst_parts, std::abs(inner(au, v) + inner(bu, bv)) / scale);
            worst_parts =
                std::max(worst_parts, std::abs(inner(au, u) + charge(bu)) / charge(u));
        }
        if (worst_adj > 1e-12 || worst_parts > 1e-12) ++fails;
        parts += "adjoint " + fmt(worst_adj) + ", by-parts " + fmt(worst_parts) + "; ";

        // lp embedding
        bool embed_ok = true;
        const double ps[] = {1.0, 2.0, 4.0, std::numeric_limits<double>::infinity()};
        for (int k = 0; k < 1000; ++k) {
            Rng rng(kSeed, 60000 + k);
            LatticeState u(10);
            for (auto& z : u.amplitudes) z = rng.complex_normal();
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b <= a; ++b)
                    if (norm_lp(u, ps[a]) > norm_lp(u, ps[b]) * (1.0 + 1e-12)) embed_ok = false;
        }
        if (!embed_ok) ++fails;
        parts += std::string("embedding ") + (embed_ok ? "ok" : "VIOLATED") + "; ";

        // gradient vs finite differences
        double worst_grad = 0.0;
        const double h = 1e-5;
        for (int k = 0; k < 1000; ++k) {
            Rng rng(kSeed, 70000 + k);
            LatticeState phi(8), psi(8);
            for (auto& z : phi.amplitudes) z = rng.complex_normal();
            for (auto& z : psi.amplitudes) z = rng.complex_normal();
            const double analytic = inner(stationary_gradient(phi, 1.0, 1.0, 1.0), psi);
            const double numeric = (stationary_energy(axpy(h, psi, phi), 1.0, 1.0, 1.0) -
                                    stationary_energy(axpy(-h, psi, phi), 1.0, 1.0, 1.0)) /
                                   (2.0 * h);
            worst_grad = std::max(worst_grad,
                                  std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
        }
        if (worst_grad > 1e-6) ++fails;
        parts += "gradient-vs-FD " + fmt(worst_grad) + "; ";

        // norm equivalence sandwich
        bool sandwich_ok = true;
        for (int k = 0; k < 1000; ++k) {
            Rng rng(kSeed, 80000 + k);
            LatticeState phi(10);
            for (auto& z : phi.amplitudes) z = rng.complex_normal();
            const double eps = 0.25 + 3.0 * rng.uniform();
            const double omega = 0.3 + 2.0 * rng.uniform();
            const double lo = std::min(1.0 / eps, omega * omega);
            const double hi = std::max(1.0 / eps, omega * omega);
            const double l21 = norm_l21_sq(phi);
            const double l2e = norm_l2e_sq_c(phi, 1.0 / eps, omega);
            if (l2e < lo * l21 * (1.0 - 1e-12) || l2e > hi * l21 * (1.0 + 1e-12))
                sandwich_ok = false;
        }
        if (!sandwich_ok) ++fails;
        parts += std::string("norm sandwich ") + (sandwich_ok ? "ok" : "VIOLATED");
    });
    out.pass = (fails == 0) && elapsed <= 5.0;
    out.detail = parts + "; runtime " + fmt(elapsed) + " s (limit 5)";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--dnls-bin" && i + 1 < argc) {
            g_dnls_bin = argv[++i];
        } else {
            only.insert(std::atoi(arg.c_str()));
        }
    }

    struct Entry {
        int id;
        const char* label;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> criteria = {
        {1, "charge conservation (conservative run, sigma in {1,3})", criterion1},
        {2, "energy conservation with order-2 dt dependence", criterion2},
        {3, "growth bound on the l^2_1 norm", criterion3},
        {4, "no blow-up at supercritical exponent (focusing, charge 10)", criterion4},
        {5, "exact dissipation law and Gronwall envelope", criterion5},
        {6, "absorbing-ball entry before the predicted t0", criterion6},
        {7, "contraction threshold: certified ratio and collapse to zero", criterion7},
        {8, "standing-wave existence via continuation", criterion8},
        {9, "standing wave is an exact orbit", criterion9},
        {10, "mountain-pass geometry: rim bound and negative ray", criterion10},
        {11, "uniform tail estimate beyond 2M", criterion11},
        {12, "finite-truncation convergence delta_m", criterion12},
        {13, "weighted space: bounded norm, damping-condition rejection", criterion13},
        {14, "structural identity suites (1000 random cases each)", criterion14},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& err) {
            out.pass = false;
            out.detail = std::string("exception: ") + err.what();
        }
        std::printf("criterion %2d %s  %s — %s\n", c.id, out.pass ? "PASS" : "FAIL", c.label,
                    out.detail.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    if (failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criterion(s) FAILED\n", failures);
    return failures;
}
