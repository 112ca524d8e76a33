#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dnls/dynamics.hpp"
#include "dnls/errors.hpp"
#include "dnls/lattice.hpp"

namespace dnls {

// ---------------------------------------------------------------------------
// Smooth cutoff
// ---------------------------------------------------------------------------

/// Derivative bound of the sin^2 bridge below; attained at s = 1.5.
inline constexpr double cutoff_c0 = M_PI / 2.0;

struct CutoffSpec {
    int M = 1;            // cutoff scale; theta is evaluated at |n| / M
    double C0 = cutoff_c0;
};

/// theta(s) = 0 on [0,1], sin^2(pi (s-1)/2) on [1,2], 1 on [2, inf).
/// The sin^2 bridge makes C0 = pi/2 exact and reports reproducible.
inline double cutoff_theta(double s) {
    if (s < 0.0) throw ValidationError("cutoff_theta: s must be >= 0");
    if (s <= 1.0) return 0.0;
    if (s >= 2.0) return 1.0;
    const double x = std::sin(M_PI * (s - 1.0) / 2.0);
    return x * x;
}

/// Mass beyond lattice radius 2M: sum over |n| > 2M of |u_n|^2.
inline double tail_mass(const LatticeState& u, int M) {
    if (M < 1) throw ValidationError("tail_mass: M must be >= 1");
    const int m = u.half_width;
    double s = 0.0;
    for (int n = -m; n <= m; ++n)
        if (std::abs(n) > 2 * M) s += std::norm(u.site(n));
    return s;
}

/// sum theta(|n|/M) |u_n|^2; squeezed between tail_mass(u, M) and the mass
/// beyond radius M.
inline double cutoff_weighted_mass(const LatticeState& u, int M) {
    if (M < 1) throw ValidationError("cutoff_weighted_mass: M must be >= 1");
    const int m = u.half_width;
    double s = 0.0;
    for (int n = -m; n <= m; ++n)
        s += cutoff_theta(std::abs(n) / static_cast<double>(M)) * std::norm(u.site(n));
    return s;
}

// ---------------------------------------------------------------------------
// Tail audit
// ---------------------------------------------------------------------------

struct TailReport {
    double eta = 0.0;
    int K_eta = 0;
    double T_eta = 0.0;
    std::vector<std::pair<double, double>> observed_tail;  // (t, tail mass) for the smallest tested M
    double bound = 0.0;                                    // 2 eta / delta
    bool passed = false;
    double C1 = 2.0 * cutoff_c0;
    std::vector<int> tested_M;
    std::optional<double> t_entry;
    std::string message;
};

namespace detail {

inline double forcing_tail_sq(const ModelParams& p, int M) {
    double s = 0.0;
    for (int n = -p.half_width; n <= p.half_width; ++n)
        if (std::abs(n) > M) s += std::norm(p.forcing_at(n));
    return s;
}

}  // namespace detail

/// Smallest M >= 1 with (2 C1 / M) rho1^2 + (1/delta) sum_{|n|>M} |g_n|^2 <= eta.
inline int tail_K(const ModelParams& params, double eta, double rho1, double C1 = 2.0 * cutoff_c0) {
    if (!(eta > 0.0)) throw ValidationError("tail_K: eta must be > 0");
    if (!(params.delta > 0.0)) throw ValidationError("tail_K: delta must be > 0");
    const int cap = std::max(params.half_width,
                             static_cast<int>(std::ceil(2.0 * C1 * rho1 * rho1 / eta))) +
                    1;
    for (int M = 1; M <= cap; ++M) {
        const double lhs = 2.0 * C1 / M * rho1 * rho1 +
                           detail::forcing_tail_sq(params, M) / params.delta;
        if (lhs <= eta) return M;
    }
    return cap;
}

/// Verifies the uniform tail estimate sum_{|n| > 2M} |u_n|^2 <= 2 eta / delta
/// for every sampled t >= T(eta) and every tested M > K(eta), with
/// K(eta) from tail_K (C1 = 2 C0) and T(eta) = t_entry + (1/delta) ln(delta rho1^2 / eta),
/// t_entry being the observed entry time into the charge ball of radius rho1.
inline TailReport tail_audit(const Trajectory& traj, double eta, double rho1,
                             const CutoffSpec& spec = {},
                             std::vector<int> test_M = {}) {
    if (!(traj.params.delta > 0.0))
        throw ValidationError("tail_audit: requires a dissipative run (delta > 0)");
    if (!(eta > 0.0)) throw ValidationError("tail_audit: eta must be > 0");
    if (traj.rows.empty()) throw ValidationError("tail_audit: empty trajectory");

    TailReport rep;
    rep.eta = eta;
    rep.C1 = 2.0 * spec.C0;
    rep.bound = 2.0 * eta / traj.params.delta;
    rep.K_eta = tail_K(traj.params, eta, rho1, rep.C1);

    rep.t_entry = observe_absorbing_entry(traj, rho1);
    if (!rep.t_entry) {
        rep.message = "trajectory never settles in the absorbing ball of radius rho1";
        rep.passed = false;
        return rep;
    }
    const double delta = traj.params.delta;
    rep.T_eta = *rep.t_entry + std::log(delta * rho1 * rho1 / eta) / delta;

    if (test_M.empty()) {
        const int k1 = rep.K_eta + 1;
        test_M = {k1, (3 * k1 + 1) / 2, 2 * k1};
    }
    std::sort(test_M.begin(), test_M.end());
    test_M.erase(std::unique(test_M.begin(), test_M.end()), test_M.end());
    for (int M : test_M)
        if (M <= rep.K_eta)
            throw ValidationError("tail_audit: every tested M must exceed K(eta) = " +
                                  std::to_string(rep.K_eta));
    rep.tested_M = test_M;

    rep.passed = true;
    for (std::size_t i = 0; i < traj.rows.size(); ++i) {
        const double t = traj.rows[i].t;
        if (t < rep.T_eta) continue;
        for (int M : test_M) {
            const double tail = tail_mass(traj.snapshots[i], M);
            if (M == test_M.front()) rep.observed_tail.emplace_back(t, tail);
            if (tail > rep.bound) {
                rep.passed = false;
                rep.message = "tail bound exceeded at t = " + std::to_string(t) +
                              ", M = " + std::to_string(M);
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Finite-truncation convergence
// ---------------------------------------------------------------------------

struct TruncationReport {
    std::vector<int> m_values;
    int m_ref = 0;
    double T = 0.0;
    std::vector<double> deltas;  // delta_m = worst trajectory gap over [0, T]
    bool monotone = false;       // non-increasing in m
};

namespace detail {

inline ModelParams params_for_width(const ModelParams& tpl, int m) {
    ModelParams p = tpl;
    p.half_width = m;
    p.forcing.clear();
    if (!tpl.forcing.empty()) {
        p.forcing.resize(static_cast<std::size_t>(2 * m + 1));
        for (int n = -m; n <= m; ++n)
            p.forcing[static_cast<std::size_t>(n + m)] =
                (std::abs(n) <= tpl.half_width) ? tpl.forcing_at(n) : cplx{0.0, 0.0};
    }
    return p;
}

inline LatticeState embed(const LatticeState& u, int m) {
    LatticeState out(m, u.time);
    for (int n = -m; n <= m; ++n) out.site(n) = u.value_at(n);
    return out;
}

}  // namespace detail

/// Worst-case trajectory gap delta_m between the width-m Dirichlet truncation
/// and a reference width m_ref, over the initial set and sampled t in [0, T].
/// Truncated solutions are compared after zero-extension.
inline TruncationReport truncation_delta(const std::vector<LatticeState>& u0_set,
                                         const ModelParams& params_template,
                                         const std::vector<int>& m_values, int m_ref, double T,
                                         const IntegratorConfig& config) {
    if (u0_set.empty()) throw ValidationError("truncation_delta: empty initial set");
    if (m_values.empty()) throw ValidationError("truncation_delta: empty m list");
    const int m_min = *std::min_element(m_values.begin(), m_values.end());
    const int m_max = *std::max_element(m_values.begin(), m_values.end());
    if (m_min < 1) throw ValidationError("truncation_delta: m values must be >= 1");
    if (m_ref <= m_max) throw ValidationError("truncation_delta: m_ref must exceed every m");
    for (const auto& u0 : u0_set)
        for (int n = -u0.half_width; n <= -m_min - 1; ++n)
            if (std::norm(u0.site(n)) != 0.0 || std::norm(u0.site(-n)) != 0.0)
                throw ValidationError(
                    "truncation_delta: initial states must be supported within the smallest m");

    TruncationReport rep;
    rep.m_values = m_values;
    rep.m_ref = m_ref;
    rep.T = T;
    rep.deltas.assign(m_values.size(), 0.0);

    const ModelParams params_ref = detail::params_for_width(params_template, m_ref);
    for (const auto& u0 : u0_set) {
        const Trajectory ref = integrate(detail::embed(u0, m_ref), params_ref, config, T);
        for (std::size_t im = 0; im < m_values.size(); ++im) {
            const int m = m_values[im];
            const ModelParams params_m = detail::params_for_width(params_template, m);
            const Trajectory cut = integrate(detail::embed(u0, m), params_m, config, T);
            double worst = 0.0;
            for (std::size_t k = 0; k < cut.snapshots.size() && k < ref.snapshots.size(); ++k)
                worst = std::max(worst, distance_l2(cut.snapshots[k], ref.snapshots[k]));
            rep.deltas[im] = std::max(rep.deltas[im], worst);
        }
    }

    // Monotonicity is judged with m in ascending order.
    std::vector<std::pair<int, double>> ordered;
    for (std::size_t i = 0; i < m_values.size(); ++i) ordered.emplace_back(m_values[i], rep.deltas[i]);
    std::sort(ordered.begin(), ordered.end());
    rep.monotone = true;
    for (std::size_t i = 1; i < ordered.size(); ++i)
        if (ordered[i].second > ordered[i - 1].second) rep.monotone = false;
    return rep;
}

/// sup_{x in A} inf_{y in B} ||x - y||_{l^2}, after zero-extension to a common
/// width. Asymmetric by construction.
inline double semidistance(const std::vector<LatticeState>& A, const std::vector<LatticeState>& B) {
    if (A.empty() || B.empty()) throw ValidationError("semidistance: sets must be nonempty");
    double sup = 0.0;
    for (const auto& a : A) {
        double inf = std::numeric_limits<double>::infinity();
        for (const auto& b : B) inf = std::min(inf, distance_l2(a, b));
        sup = std::max(sup, inf);
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Weighted spaces
// ---------------------------------------------------------------------------

enum class WeightFamily { exponential_one_sided, exponential_two_sided };

/// Weight family w_n = exp(lambda n) (one-sided, matching the closed-form
/// constants d1 = e^lambda - 1, d2 = e^lambda) or w_n = exp(lambda |n|)
/// (two-sided, increasing in |n| but with d2 = e^{-lambda} < 1).
struct WeightSpec {
    WeightFamily family = WeightFamily::exponential_one_sided;
    double lambda = 0.0;
    double d1 = 0.0;        // sup |w_{n+1} - w_n| / w_n
    double d2_lower = 1.0;  // inf w_{n+1} / w_n
};

inline double weight_value(const WeightSpec& spec, int n) {
    const double x = (spec.family == WeightFamily::exponential_one_sided)
                         ? static_cast<double>(n)
                         : std::abs(static_cast<double>(n));
    return std::exp(spec.lambda * x);
}

/// (d1, d2_lower) measured over the sites |n| <= n_range.
inline std::pair<double, double> weight_constants(const WeightSpec& spec, int n_range) {
    if (!(spec.lambda > 0.0)) throw ValidationError("weight_constants: lambda must be > 0");
    if (n_range < 1) throw ValidationError("weight_constants: n_range must be >= 1");
    double d1 = 0.0;
    double d2 = std::numeric_limits<double>::infinity();
    for (int n = -n_range; n < n_range; ++n) {
        const double w = weight_value(spec, n);
        const double w_next = weight_value(spec, n + 1);
        d1 = std::max(d1, std::abs(w_next - w) / w);
        d2 = std::min(d2, w_next / w);
    }
    return {d1, d2};
}

inline WeightSpec make_weight_spec(WeightFamily family, double lambda, int n_range) {
    WeightSpec spec;
    spec.family = family;
    spec.lambda = lambda;
    std::tie(spec.d1, spec.d2_lower) = weight_constants(spec, n_range);
    return spec;
}

/// Whether delta/2 - 2 d1 d2^{-1/2} >= 0, and the slack. For the one-sided
/// exponential family this is equivalent to 8 sinh(lambda/2) <= delta.
inline std::pair<bool, double> damping_condition(double delta, const WeightSpec& spec) {
    if (delta < 0.0) throw ValidationError("damping_condition: delta must be >= 0");
    const double slack = 0.5 * delta - 2.0 * spec.d1 / std::sqrt(spec.d2_lower);
    return {slack >= 0.0, slack};
}

inline double weighted_norm_sq(const LatticeState& u, const WeightSpec& spec) {
    if (spec.lambda * u.half_width > 300.0)
        throw ValidationError("weighted_norm: lambda * m must be <= 300 (weight overflow)");
    double s = 0.0;
    for (int n = -u.half_width; n <= u.half_width; ++n)
        s += weight_value(spec, n) * std::norm(u.site(n));
    return s;
}

inline double weighted_norm(const LatticeState& u, const WeightSpec& spec) {
    return std::sqrt(weighted_norm_sq(u, spec));
}

/// Weighted-space audit. Requires the damping condition; verifies along the
/// trajectory the dissipative envelope
///   X(t) <= X(0) e^{-2 kappa t} + ||g||_w^2 / (2 kappa delta) (1 - e^{-2 kappa t}),
///   X = weighted squared norm, kappa = delta/2 - 2 d1 d2^{-1/2},
/// and the weighted tail bound sum_{|n| > 2M} w_n |u_n|^2 <= 2 eta / delta for
/// sampled t >= T(eta) = (1/delta) ln(delta rho_w^2 / eta), rho_w^2 being the
/// observed weighted ball level.
inline TailReport weighted_audit(const Trajectory& traj, const WeightSpec& spec, double eta,
                                 int M) {
    if (traj.rows.empty()) throw ValidationError("weighted_audit: empty trajectory");
    if (!(eta > 0.0)) throw ValidationError("weighted_audit: eta must be > 0");
    if (M < 1) throw ValidationError("weighted_audit: M must be >= 1");
    const double delta = traj.params.delta;
    const auto [ok, slack] = damping_condition(delta, spec);
    if (!ok)
        throw ValidationError(
            "weighted_audit: damping condition delta/2 - 2 d1 d2^{-1/2} >= 0 violated (slack " +
            std::to_string(slack) + ")");

    LatticeState g(traj.params.half_width);
    for (int n = -g.half_width; n <= g.half_width; ++n) g.site(n) = traj.params.forcing_at(n);
    const double g_w_sq = weighted_norm_sq(g, spec);
    const double kappa = slack;

    TailReport rep;
    rep.eta = eta;
    rep.K_eta = M;
    rep.tested_M = {M};
    rep.bound = 2.0 * eta / delta;
    rep.passed = true;

    const double t0 = traj.rows.front().t;
    std::vector<double> weighted_sq(traj.snapshots.size());
    double rho_w_sq = 0.0;
    const double x0 = weighted_norm_sq(traj.snapshots.front(), spec);
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        weighted_sq[i] = weighted_norm_sq(traj.snapshots[i], spec);
        rho_w_sq = std::max(rho_w_sq, weighted_sq[i]);
        const double t = traj.rows[i].t - t0;
        double envelope;
        if (kappa > 0.0) {
            const double decay = std::exp(-2.0 * kappa * t);
            envelope = x0 * decay + g_w_sq / (2.0 * kappa * delta) * (1.0 - decay);
        } else {
            envelope = x0 + t * g_w_sq / delta;
        }
        if (weighted_sq[i] > envelope * (1.0 + 1e-7) + 1e-12) {
            rep.passed = false;
            rep.message = "weighted envelope exceeded at t = " + std::to_string(traj.rows[i].t);
        }
    }

    rep.T_eta = (rho_w_sq > 0.0 && delta * rho_w_sq > eta)
                    ? t0 + std::log(delta * rho_w_sq / eta) / delta
                    : t0;
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        if (traj.rows[i].t < rep.T_eta) continue;
        const auto& u = traj.snapshots[i];
        double tail = 0.0;
        for (int n = -u.half_width; n <= u.half_width; ++n)
            if (std::abs(n) > 2 * M) tail += weight_value(spec, n) * std::norm(u.site(n));
        rep.observed_tail.emplace_back(traj.rows[i].t, tail);
        if (tail > rep.bound) {
            rep.passed = false;
            rep.message = "weighted tail bound exceeded at t = " + std::to_string(traj.rows[i].t);
        }
    }
    return rep;
}

}  // namespace dnls
