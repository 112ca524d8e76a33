#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dnls/errors.hpp"
#include "dnls/lattice.hpp"
#include "dnls/tridiag.hpp"

namespace dnls {

enum class Scheme { implicit_midpoint, rk4 };

/// implicit_midpoint is the production scheme: it conserves the charge up to
/// the inner-solver residual. rk4 is kept as an accuracy cross-check.
struct IntegratorConfig {
    Scheme scheme = Scheme::implicit_midpoint;
    double dt = 0.01;
    double solver_tol = 1e-12;
    int max_inner_iters = 50;
    int record_stride = 10;

    void validate() const {
        if (!(dt > 0.0)) throw ValidationError("integrator.dt: must be > 0");
        if (!(solver_tol > 0.0) || solver_tol > 1e-6)
            throw ValidationError("integrator.solver_tol: must lie in (0, 1e-6]");
        if (max_inner_iters < 1) throw ValidationError("integrator.max_inner_iters: must be >= 1");
        if (record_stride < 1) throw ValidationError("integrator.record_stride: must be >= 1");
    }
};

struct DiagnosticsRow {
    double t = 0.0;
    double charge = 0.0;
    double energy = 0.0;
    double l21_sq = 0.0;
    std::optional<double> tail_mass;      // filled by tail diagnostics when configured
    std::optional<double> weighted_norm;  // filled by weighted diagnostics when configured
    double J = 0.0;
    double Lambda = 0.0;
};

struct Trajectory {
    std::vector<DiagnosticsRow> rows;
    std::vector<LatticeState> snapshots;  // states at the row times
    ModelParams params;
    IntegratorConfig config;
};

// ---------------------------------------------------------------------------
// Vector field
// ---------------------------------------------------------------------------

namespace detail {

/// du/dt = i (1/eps) A u - delta u + i |u|^{2 sigma} u - i g, written into `out`.
inline void rhs_into(const std::vector<cplx>& u, const ModelParams& p, std::vector<cplx>& out) {
    const std::size_t n = u.size();
    out.resize(n);
    const double c = 1.0 / p.epsilon;
    const bool forced = !p.forcing.empty();
    for (std::size_t i = 0; i < n; ++i) {
        const cplx left = (i > 0) ? u[i - 1] : cplx{0.0, 0.0};
        const cplx right = (i + 1 < n) ? u[i + 1] : cplx{0.0, 0.0};
        cplx w = c * (left - 2.0 * u[i] + right);
        w += pow_sigma(std::norm(u[i]), p.sigma) * u[i];
        if (forced) w -= p.forcing[i];
        out[i] = cplx{-w.imag(), w.real()} - p.delta * u[i];
    }
}

inline double l2_norm(const std::vector<cplx>& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

inline double sup_norm(const std::vector<cplx>& v) {
    double s = 0.0;
    for (const auto& z : v) s = std::max(s, std::abs(z));
    return s;
}

}  // namespace detail

inline LatticeState vector_field(const LatticeState& u, const ModelParams& params) {
    params.validate();
    require_finite(u, "vector_field");
    if (u.half_width != params.half_width)
        throw ValidationError("vector_field: state and params have different half_width");
    LatticeState out(u.half_width, u.time);
    detail::rhs_into(u.amplitudes, params, out.amplitudes);
    return out;
}

// ---------------------------------------------------------------------------
// One-step integrators
// ---------------------------------------------------------------------------

namespace detail {

/// Persistent workspace so repeated stepping does not allocate.
class Stepper {
public:
    Stepper(const ModelParams& params, const IntegratorConfig& config)
        : p_(params), c_(config) {}

    /// Advance `u` (amplitudes and time) by dt in place.
    void step_in_place(std::vector<cplx>& u, double& t, double dt) {
        if (c_.scheme == Scheme::rk4)
            step_rk4(u, dt);
        else
            step_midpoint(u, t, dt);
        t += dt;
        if (sup_norm(u) > 1e100 || !finite(u))
            throw NumericalError("integrate: amplitude overflow (|u|_inf > 1e100)", t);
    }

private:
    static bool finite(const std::vector<cplx>& v) {
        for (const auto& z : v)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    void step_rk4(std::vector<cplx>& u, double dt) {
        const std::size_t n = u.size();
        rhs_into(u, p_, k1_);
        stage_.resize(n);
        for (std::size_t i = 0; i < n; ++i) stage_[i] = u[i] + 0.5 * dt * k1_[i];
        rhs_into(stage_, p_, k2_);
        for (std::size_t i = 0; i < n; ++i) stage_[i] = u[i] + 0.5 * dt * k2_[i];
        rhs_into(stage_, p_, k3_);
        for (std::size_t i = 0; i < n; ++i) stage_[i] = u[i] + dt * k3_[i];
        rhs_into(stage_, p_, k4_);
        for (std::size_t i = 0; i < n; ++i)
            u[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

    /// Solve x = u + dt f((u + x)/2) to solver_tol: plain fixed-point sweeps
    /// while they contract, then Newton on the 2(2m+1)-dimensional real system
    /// with a block-tridiagonal Jacobian.
    void step_midpoint(std::vector<cplx>& u, double t, double dt) {
        const std::size_t n = u.size();
        const double tol = c_.solver_tol * std::max(1.0, l2_norm(u));

        // Explicit predictor.
        rhs_into(u, p_, k1_);
        x_.resize(n);
        for (std::size_t i = 0; i < n; ++i) x_[i] = u[i] + dt * k1_[i];

        double residual = std::numeric_limits<double>::infinity();
        double best = residual;
        int stalled = 0;
        bool converged = false;
        for (int iter = 0; iter < c_.max_inner_iters; ++iter) {
            const double r = fp_sweep(u, dt);
            if (r <= tol) {
                converged = true;
                break;
            }
            if (r < best) {
                best = r;
                xbest_ = x_;
            }
            if (!std::isfinite(r) || r > 1e6 * std::max(1.0, best)) break;  // diverging
            if (r >= 0.5 * residual) {
                if (++stalled >= 2) break;  // not contracting, hand over to Newton
            } else {
                stalled = 0;
            }
            residual = r;
        }
        if (!converged) {
            // Newton restarts from the best iterate seen; the previous state
            // (residual dt ||f(u)||) wins when the fixed point diverged.
            const double r_at_u = dt * l2_norm(k1_);
            if (best < r_at_u && finite(xbest_))
                x_ = xbest_;
            else
                x_ = u;
            newton_midpoint(u, t, dt, tol);
        }
        u.swap(x_);
    }

    /// One fixed-point sweep; returns the midpoint-equation residual at the
    /// current iterate and replaces it by u + dt f(mid).
    double fp_sweep(const std::vector<cplx>& u, double dt) {
        const std::size_t n = u.size();
        mid_.resize(n);
        for (std::size_t i = 0; i < n; ++i) mid_[i] = 0.5 * (u[i] + x_[i]);
        rhs_into(mid_, p_, fmid_);
        double rsq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const cplx next = u[i] + dt * fmid_[i];
            rsq += std::norm(x_[i] - next);
            x_[i] = next;
        }
        return std::sqrt(rsq);
    }

    double residual_at(const std::vector<cplx>& u, double dt) {
        const std::size_t n = u.size();
        mid_.resize(n);
        for (std::size_t i = 0; i < n; ++i) mid_[i] = 0.5 * (u[i] + x_[i]);
        rhs_into(mid_, p_, fmid_);
        double rsq = 0.0;
        g_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            g_[i] = x_[i] - u[i] - dt * fmid_[i];
            rsq += std::norm(g_[i]);
        }
        return std::sqrt(rsq);
    }

    void newton_midpoint(const std::vector<cplx>& u, double t, double dt, double tol) {
        const std::size_t n = u.size();
        const double c = 1.0 / p_.epsilon;
        lower_.assign(n, Mat2{});
        diag_.assign(n, Mat2{});
        upper_.assign(n, Mat2{});
        rhs2_.assign(n, Vec2{});

        double res = residual_at(u, dt);
        for (int iter = 0; iter < c_.max_inner_iters; ++iter) {
            if (res <= tol) return;
            // Jacobian of G(x) = x - u - dt f((u+x)/2) at the current iterate.
            const double h = 0.5 * dt;
            const Mat2 off{0.0, h * c, -h * c, 0.0};  // -(dt/2) * coupling block
            for (std::size_t i = 0; i < n; ++i) {
                const double a = mid_[i].real(), b = mid_[i].imag();
                const double s = a * a + b * b;
                const double F = pow_sigma(s, p_.sigma);
                const double Fp = (p_.sigma == 0.0 || s <= 0.0) ? 0.0 : p_.sigma * F / s;
                // site-local block of df
                const double d00 = -p_.delta - 2.0 * Fp * a * b;
                const double d01 = 2.0 * c - F - 2.0 * Fp * b * b;
                const double d10 = -2.0 * c + F + 2.0 * Fp * a * a;
                const double d11 = -p_.delta + 2.0 * Fp * a * b;
                diag_[i] = Mat2{1.0 - h * d00, -h * d01, -h * d10, 1.0 - h * d11};
                lower_[i] = off;
                upper_[i] = off;
                rhs2_[i] = Vec2{-g_[i].real(), -g_[i].imag()};
            }
            const auto delta = block_thomas_solve(lower_, diag_, upper_, rhs2_);

            double alpha = 1.0;
            bool accepted = false;
            xtrial_.resize(n);
            for (int back = 0; back < 8; ++back) {
                for (std::size_t i = 0; i < n; ++i)
                    xtrial_[i] = x_[i] + alpha * cplx(delta[i][0], delta[i][1]);
                std::swap(x_, xtrial_);
                const double rn = residual_at(u, dt);
                if (rn < res || rn <= tol) {
                    res = rn;
                    accepted = true;
                    break;
                }
                std::swap(x_, xtrial_);  // revert
                alpha *= 0.5;
            }
            if (!accepted)
                throw NumericalError("implicit midpoint: Newton line search stalled", t, iter, res);
        }
        if (res > tol)
            throw NumericalError("implicit midpoint: inner solver did not reach solver_tol", t,
                                 c_.max_inner_iters, res);
    }

    const ModelParams& p_;
    const IntegratorConfig& c_;
    std::vector<cplx> k1_, k2_, k3_, k4_, stage_, x_, mid_, fmid_, g_, xtrial_, xbest_;
    std::vector<Mat2> lower_, diag_, upper_;
    std::vector<Vec2> rhs2_;
};

}  // namespace detail

/// One time step of the configured scheme. For implicit_midpoint the midpoint
/// equation is solved to config.solver_tol (fixed point, then Newton).
inline LatticeState step(const LatticeState& u, const ModelParams& params,
                         const IntegratorConfig& config) {
    params.validate();
    config.validate();
    require_finite(u, "step");
    if (u.half_width != params.half_width)
        throw ValidationError("step: state and params have different half_width");
    detail::Stepper stepper(params, config);
    LatticeState out = u;
    double t = u.time;
    stepper.step_in_place(out.amplitudes, t, config.dt);
    out.time = u.time + config.dt;
    return out;
}

/// Integrate to time u0.time + T, recording diagnostics every record_stride
/// steps (plus the initial and final states). Numerical failures propagate
/// with the failing time attached; the run is never silently continued.
inline Trajectory integrate(const LatticeState& u0, const ModelParams& params,
                            const IntegratorConfig& config, double T) {
    params.validate();
    config.validate();
    require_finite(u0, "integrate");
    if (u0.half_width != params.half_width)
        throw ValidationError("integrate: state and params have different half_width");
    if (T < 0.0) throw ValidationError("integrate: T must be >= 0");

    Trajectory traj;
    traj.params = params;
    traj.config = config;

    std::vector<cplx> u = u0.amplitudes;
    const double t0 = u0.time;
    double t = t0;

    auto record = [&](double time) {
        LatticeState s(u0.half_width, time);
        s.amplitudes = u;
        DiagnosticsRow row;
        row.t = time;
        const FunctionalReport f = compute_functionals(s, params);
        row.charge = f.charge;
        row.energy = f.energy;
        row.l21_sq = f.l21_norm_sq;
        row.J = f.J;
        row.Lambda = f.Lambda;
        traj.rows.push_back(row);
        traj.snapshots.push_back(std::move(s));
    };

    record(t0);
    if (T == 0.0) return traj;

    const double dt = config.dt;
    const long n_steps = static_cast<long>(std::floor(T / dt + 1e-9));
    const double remainder = T - static_cast<double>(n_steps) * dt;

    detail::Stepper stepper(params, config);
    for (long k = 1; k <= n_steps; ++k) {
        stepper.step_in_place(u, t, dt);
        t = t0 + static_cast<double>(k) * dt;
        if (k % config.record_stride == 0 && !(k == n_steps && remainder <= 1e-12 * std::max(1.0, T)))
            record(t);
    }
    if (remainder > 1e-12 * std::max(1.0, T)) {
        stepper.step_in_place(u, t, remainder);
        t = t0 + T;
    }
    record(t0 + T);
    return traj;
}

// ---------------------------------------------------------------------------
// Absorbing-ball prediction and audits
// ---------------------------------------------------------------------------

struct AbsorbingReport {
    double rho = 0.0;    // ||g|| / delta
    double rho1 = 0.0;   // chosen ball radius, > rho
    double R = 0.0;      // radius bounding the initial data
    double t0_predicted = 0.0;
    std::optional<double> t_entry_observed;
    double rho2 = 0.0;   // l^2_1 radius estimate (0 when not computed)
};

/// Entry-time bound t0 = (1/delta) log(R^2 / (rho1^2 - rho^2)) for data of
/// norm <= R entering the ball of radius rho1 > rho = ||g||/delta.
inline AbsorbingReport absorbing_prediction(double norm_g, double delta, double rho1, double R) {
    if (!(delta > 0.0)) throw ValidationError("absorbing_prediction: delta must be > 0");
    AbsorbingReport rep;
    rep.rho = norm_g / delta;
    if (!(rho1 > rep.rho))
        throw ValidationError("absorbing_prediction: rho1 must exceed rho = ||g||/delta");
    if (!(R >= rho1)) throw ValidationError("absorbing_prediction: R must be >= rho1");
    rep.rho1 = rho1;
    rep.R = R;
    rep.t0_predicted = std::log(R * R / (rho1 * rho1 - rep.rho * rep.rho)) / delta;
    return rep;
}

/// Same, plus the l^2_1 absorbing radius
/// rho2^2 = eps rho1^{2 sigma + 2} + 3 eps ||g|| rho1 + ||g|| rho1 / delta.
inline AbsorbingReport absorbing_prediction(const ModelParams& params, double rho1, double R) {
    params.validate();
    const double norm_g = params.forcing_norm();
    AbsorbingReport rep = absorbing_prediction(norm_g, params.delta, rho1, R);
    const double rho2_sq = params.epsilon * std::pow(rho1, 2.0 * params.sigma + 2.0) +
                           3.0 * params.epsilon * norm_g * rho1 + norm_g * rho1 / params.delta;
    rep.rho2 = std::sqrt(rho2_sq);
    return rep;
}

/// Earliest sample time after which the charge stays <= rho1^2 for the rest of
/// the trajectory; nullopt when the trajectory never settles in the ball.
inline std::optional<double> observe_absorbing_entry(const Trajectory& traj, double rho1) {
    const double level = rho1 * rho1 * (1.0 + 1e-12);
    std::optional<double> entry;
    for (auto it = traj.rows.rbegin(); it != traj.rows.rend(); ++it) {
        if (it->charge <= level)
            entry = it->t;
        else
            break;
    }
    return entry;
}

struct DecayReport {
    bool passed = true;
    bool gronwall_checked = false;
    double gronwall_min_margin = 0.0;
    double gronwall_worst_time = 0.0;
    bool growth_checked = false;
    double growth_min_margin = 0.0;
    double growth_worst_time = 0.0;
    double jbalance_max_residual = 0.0;  // |(1/2) dJ/dt + delta J - Lambda|, O(dt^2)
    double jbalance_worst_time = 0.0;
    std::string failure;
};

/// Checks, at every recorded sample,
///  (i)  dissipative runs: the Gronwall envelope
///       ||u(t)||^2 <= ||u0||^2 e^{-delta t} + rho^2 (1 - e^{-delta t}),
///  (ii) conservative runs: the growth bound
///       ||u(t)||^2_{l^2_1} <= ||u0||^2_{l^2_1} + 2 eps/(sigma+1) ||u0||^{2 sigma + 2},
/// and reports the centered-difference residual of the J balance.
inline DecayReport decay_audit(const Trajectory& traj) {
    if (traj.rows.empty()) throw ValidationError("decay_audit: empty trajectory");
    DecayReport rep;
    const auto& rows = traj.rows;
    const double q0 = rows.front().charge;
    const double t_start = rows.front().t;
    const double delta = traj.params.delta;
    const double tol = 1e-9 * std::max(1.0, q0);

    if (delta > 0.0) {
        rep.gronwall_checked = true;
        const double rho = traj.params.forcing_norm() / delta;
        rep.gronwall_min_margin = std::numeric_limits<double>::infinity();
        for (const auto& row : rows) {
            const double decay = std::exp(-delta * (row.t - t_start));
            const double envelope = q0 * decay + rho * rho * (1.0 - decay);
            const double margin = envelope - row.charge;
            if (margin < rep.gronwall_min_margin) {
                rep.gronwall_min_margin = margin;
                rep.gronwall_worst_time = row.t;
            }
        }
        if (rep.gronwall_min_margin < -tol) {
            rep.passed = false;
            rep.failure = "gronwall envelope violated at t = " +
                          std::to_string(rep.gronwall_worst_time) +
                          " (margin " + std::to_string(rep.gronwall_min_margin) + ")";
        }
    }

    if (traj.params.conservative()) {
        rep.growth_checked = true;
        const double bound = rows.front().l21_sq + 2.0 * traj.params.epsilon /
                                                       (traj.params.sigma + 1.0) *
                                                       std::pow(q0, traj.params.sigma + 1.0);
        rep.growth_min_margin = std::numeric_limits<double>::infinity();
        for (const auto& row : rows) {
            const double margin = bound - row.l21_sq;
            if (margin < rep.growth_min_margin) {
                rep.growth_min_margin = margin;
                rep.growth_worst_time = row.t;
            }
        }
        if (rep.growth_min_margin < -tol) {
            rep.passed = false;
            rep.failure = "growth bound violated at t = " + std::to_string(rep.growth_worst_time) +
                          " (margin " + std::to_string(rep.growth_min_margin) + ")";
        }
    }

    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        const double h_prev = rows[i].t - rows[i - 1].t;
        const double h_next = rows[i + 1].t - rows[i].t;
        if (std::abs(h_prev - h_next) > 1e-9 * std::max(1.0, h_prev)) continue;
        const double dJ = (rows[i + 1].J - rows[i - 1].J) / (h_prev + h_next);
        const double residual = std::abs(0.5 * dJ + delta * rows[i].J - rows[i].Lambda);
        if (residual > rep.jbalance_max_residual) {
            rep.jbalance_max_residual = residual;
            rep.jbalance_worst_time = rows[i].t;
        }
    }
    return rep;
}

}  // namespace dnls
