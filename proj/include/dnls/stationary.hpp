#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnls/errors.hpp"
#include "dnls/lattice.hpp"
#include "dnls/parallel.hpp"
#include "dnls/rng.hpp"
#include "dnls/tridiag.hpp"

namespace dnls {

/// Critical energy E_c(omega, sigma) = (omega^4 / 4)^{1/(4 sigma)}; below this
/// l2 norm the only standing wave of frequency omega is the trivial one.
inline double critical_energy(double omega, double sigma) {
    if (omega == 0.0) throw ValidationError("critical_energy: omega must be nonzero");
    if (!(sigma > 0.0)) throw ValidationError("critical_energy: sigma must be > 0");
    const double w2 = omega * omega;
    return std::pow(w2 * w2 / 4.0, 1.0 / (4.0 * sigma));
}

/// ||phi||_{l^2_eps}^2 = c ||B phi||^2 + omega^2 ||phi||^2 with c the coupling.
inline double norm_l2e_sq_c(const LatticeState& phi, double coupling, double omega) {
    return coupling * grad_norm_sq(phi) + omega * omega * charge(phi);
}

inline double norm_l2e(const LatticeState& phi, double epsilon, double omega) {
    if (epsilon <= 0.0) throw ValidationError("norm_l2e: epsilon must be > 0");
    return std::sqrt(norm_l2e_sq_c(phi, 1.0 / epsilon, omega));
}

// ---------------------------------------------------------------------------
// The coercive linear operator A_omega and the fixed-point map P
// ---------------------------------------------------------------------------

/// Apply A_omega phi = -c A phi + omega^2 phi (c = coupling).
inline LatticeState apply_Aomega_c(const LatticeState& phi, double coupling, double omega) {
    const int m = phi.half_width;
    LatticeState out(m, phi.time);
    const double w2 = omega * omega;
    for (int n = -m; n <= m; ++n) {
        const cplx lap = phi.value_at(n - 1) - 2.0 * phi.site(n) + phi.value_at(n + 1);
        out.site(n) = -coupling * lap + w2 * phi.site(n);
    }
    return out;
}

/// Solve A_omega phi = rhs on the Dirichlet box. The matrix is symmetric
/// positive definite tridiagonal [-c, 2c + omega^2, -c]; real and imaginary
/// parts are solved independently and the residual is verified.
inline LatticeState solve_Aomega_c(const LatticeState& rhs, double coupling, double omega) {
    if (coupling < 0.0) throw ValidationError("solve_Aomega: coupling must be >= 0");
    if (omega == 0.0) throw ValidationError("solve_Aomega: omega must be nonzero");
    require_finite(rhs, "solve_Aomega");
    const int m = rhs.half_width;
    const std::size_t n = static_cast<std::size_t>(2 * m + 1);
    const double w2 = omega * omega;
    LatticeState phi(m, rhs.time);
    if (coupling == 0.0) {
        for (std::size_t i = 0; i < n; ++i) phi.amplitudes[i] = rhs.amplitudes[i] / w2;
        return phi;
    }
    std::vector<double> lower(n, -coupling), diag(n, 2.0 * coupling + w2), upper(n, -coupling);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = rhs.amplitudes[i].real();
    const auto re = thomas_solve(lower, diag, upper, b);
    for (std::size_t i = 0; i < n; ++i) b[i] = rhs.amplitudes[i].imag();
    const auto im = thomas_solve(lower, diag, upper, b);
    for (std::size_t i = 0; i < n; ++i) phi.amplitudes[i] = cplx{re[i], im[i]};

    const double res = distance_l2(apply_Aomega_c(phi, coupling, omega), rhs);
    if (res > 1e-12 * std::max(1.0, norm_l2(rhs)))
        throw NumericalError("solve_Aomega: residual check failed", rhs.time, -1, res);
    return phi;
}

inline LatticeState solve_Aomega(const LatticeState& rhs, double epsilon, double omega) {
    if (epsilon <= 0.0) throw ValidationError("solve_Aomega: epsilon must be > 0");
    return solve_Aomega_c(rhs, 1.0 / epsilon, omega);
}

/// P(z) = A_omega^{-1}(|z|^{2 sigma} z). Fixed points solve the stationary
/// equation; on balls of radius R < E_c the map is a contraction.
inline LatticeState fixed_point_map_c(const LatticeState& z, double coupling, double omega,
                                      double sigma) {
    return solve_Aomega_c(apply_nonlinearity(z, sigma), coupling, omega);
}

inline LatticeState fixed_point_map(const LatticeState& z, double epsilon, double omega,
                                    double sigma) {
    if (epsilon <= 0.0) throw ValidationError("fixed_point_map: epsilon must be > 0");
    return fixed_point_map_c(z, 1.0 / epsilon, omega, sigma);
}

// ---------------------------------------------------------------------------
// Contraction probe
// ---------------------------------------------------------------------------

struct ContractionReport {
    double R = 0.0;
    double Ec = 0.0;
    double lipschitz_bound = 0.0;     // (2/omega^2) R^{2 sigma}
    double empirical_ratio_max = 0.0;
    bool converged_to_zero = false;
    int iterations = 0;
    int n_pairs = 0;
    int half_width = 0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Uniform draw from the l2 ball of radius R: Gaussian direction, radius
/// R v^{1/(2(2m+1))} with v uniform (2(2m+1) real dimensions).
inline LatticeState draw_in_ball(int m, double R, Rng& rng) {
    LatticeState z(m);
    for (auto& a : z.amplitudes) a = rng.complex_normal();
    const double nrm = norm_l2(z);
    const double v = rng.uniform();
    const double dim = 2.0 * (2.0 * m + 1.0);
    const double radius = R * std::pow(v, 1.0 / dim);
    if (nrm > 0.0)
        for (auto& a : z.amplitudes) a *= radius / nrm;
    return z;
}

}  // namespace detail

/// Samples Lipschitz ratios ||P(z) - P(xi)|| / ||z - xi|| over random pairs in
/// B_R and iterates P from a random start; when R < E_c the certified bound
/// (2/omega^2) R^{2 sigma} is < 1 and the iteration collapses to zero. R >= E_c
/// is allowed: the bound then merely fails to certify contraction.
inline ContractionReport contraction_probe(double R, double epsilon, double omega, double sigma,
                                           int n_pairs, std::uint64_t seed, int half_width,
                                           int max_iter = 200, double tol = 1e-12) {
    if (!(R > 0.0)) throw ValidationError("contraction_probe: R must be > 0");
    if (n_pairs < 100) throw ValidationError("contraction_probe: n_pairs must be >= 100");
    if (epsilon <= 0.0) throw ValidationError("contraction_probe: epsilon must be > 0");
    const double coupling = 1.0 / epsilon;

    ContractionReport rep;
    rep.R = R;
    rep.Ec = critical_energy(omega, sigma);
    rep.lipschitz_bound = 2.0 / (omega * omega) * pow_sigma(R * R, sigma);
    rep.n_pairs = n_pairs;
    rep.half_width = half_width;
    rep.seed = seed;

    // One RNG stream per pair, so the result is independent of thread count.
    std::vector<double> ratios(static_cast<std::size_t>(n_pairs), 0.0);
    parallel_for(static_cast<std::size_t>(n_pairs), [&](std::size_t i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        const LatticeState z = detail::draw_in_ball(half_width, R, rng);
        const LatticeState xi = detail::draw_in_ball(half_width, R, rng);
        const double dist = distance_l2(z, xi);
        if (dist == 0.0) return;
        ratios[i] = distance_l2(fixed_point_map_c(z, coupling, omega, sigma),
                                fixed_point_map_c(xi, coupling, omega, sigma)) /
                    dist;
    });
    for (const double r : ratios) rep.empirical_ratio_max = std::max(rep.empirical_ratio_max, r);

    Rng rng(seed, static_cast<std::uint64_t>(n_pairs) + 1);
    LatticeState z = detail::draw_in_ball(half_width, R, rng);
    for (int k = 0; k < max_iter; ++k) {
        const double nrm = norm_l2(z);
        if (nrm <= tol) break;
        if (nrm > 1e50) break;  // iteration escaping, give up on convergence
        z = fixed_point_map_c(z, coupling, omega, sigma);
        rep.iterations = k + 1;
    }
    rep.converged_to_zero = (norm_l2(z) <= tol);
    return rep;
}

// ---------------------------------------------------------------------------
// Standing waves: anti-continuum seed, Newton, continuation
// ---------------------------------------------------------------------------

/// Exact solution of the stationary equation at zero coupling:
/// |phi|^{2 sigma} = omega^2 on the support, zero elsewhere.
inline LatticeState anticontinuum_seed(const std::vector<int>& support, double omega, double sigma,
                                       int m) {
    if (support.empty()) throw ValidationError("anticontinuum_seed: support must be nonempty");
    if (omega == 0.0) throw ValidationError("anticontinuum_seed: omega must be nonzero");
    if (!(sigma > 0.0)) throw ValidationError("anticontinuum_seed: sigma must be > 0");
    LatticeState phi(m);
    const double amp = std::pow(omega * omega, 1.0 / (2.0 * sigma));
    for (int n : support) {
        if (n < -m || n > m) throw ValidationError("anticontinuum_seed: support outside [-m, m]");
        phi.site(n) = amp;
    }
    return phi;
}

struct StandingWave {
    double omega = 0.0;
    LatticeState phi;
    double residual = 0.0;  // l2 norm of the stationary gradient at phi
    double energy = 0.0;    // stationary action value
    double coupling = 0.0;  // 1/eps at which the profile was computed
    bool trivial = false;   // converged to the zero profile
};

namespace detail {

/// Global-phase alignment: rotate so the largest component is real, then keep
/// the real part. The equation has a phase gauge freedom; Newton runs on real
/// profiles to remove the Jacobian null direction.
inline std::vector<double> to_real_profile(const LatticeState& seed) {
    std::size_t k = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < seed.amplitudes.size(); ++i) {
        const double a = std::abs(seed.amplitudes[i]);
        if (a > best) {
            best = a;
            k = i;
        }
    }
    cplx rot{1.0, 0.0};
    if (best > 0.0) rot = std::conj(seed.amplitudes[k]) / std::abs(seed.amplitudes[k]);
    std::vector<double> out(seed.amplitudes.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (rot * seed.amplitudes[i]).real();
    return out;
}

inline double real_gradient(const std::vector<double>& phi, double coupling, double w2,
                            double sigma, std::vector<double>& grad) {
    const std::size_t n = phi.size();
    grad.resize(n);
    double rsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double left = (i > 0) ? phi[i - 1] : 0.0;
        const double right = (i + 1 < n) ? phi[i + 1] : 0.0;
        const double s = phi[i] * phi[i];
        grad[i] = -coupling * (left - 2.0 * phi[i] + right) + w2 * phi[i] -
                  pow_sigma(s, sigma) * phi[i];
        rsq += grad[i] * grad[i];
    }
    return std::sqrt(rsq);
}

}  // namespace detail

/// Newton iteration for the stationary equation on gauge-fixed real profiles,
/// with the tridiagonal Jacobian -c A + omega^2 I - (2 sigma + 1) diag(|phi|^{2 sigma}).
/// Convergence to the zero profile is reported as a trivial wave, not an error.
inline StandingWave newton_standing_wave_c(const LatticeState& seed, double coupling, double omega,
                                           double sigma, double tol = 1e-10, int max_iter = 50) {
    if (coupling < 0.0) throw ValidationError("newton_standing_wave: coupling must be >= 0");
    if (omega == 0.0) throw ValidationError("newton_standing_wave: omega must be nonzero");
    if (!(sigma > 0.0)) throw ValidationError("newton_standing_wave: sigma must be > 0");
    if (!(tol > 0.0) || tol > 1e-8)
        throw ValidationError("newton_standing_wave: tol must lie in (0, 1e-8]");
    if (max_iter < 1) throw ValidationError("newton_standing_wave: max_iter must be >= 1");
    require_finite(seed, "newton_standing_wave");

    const int m = seed.half_width;
    const std::size_t n = static_cast<std::size_t>(2 * m + 1);
    const double w2 = omega * omega;

    std::vector<double> phi = detail::to_real_profile(seed);
    std::vector<double> grad, lower(n, -coupling), diag(n), upper(n, -coupling), trial;

    double res = detail::real_gradient(phi, coupling, w2, sigma, grad);
    int iter = 0;
    while (res > tol && iter < max_iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = phi[i] * phi[i];
            diag[i] = 2.0 * coupling + w2 - (2.0 * sigma + 1.0) * pow_sigma(s, sigma);
        }
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = -grad[i];
        const auto delta = thomas_solve(lower, diag, upper, rhs);

        double alpha = 1.0;
        bool accepted = false;
        for (int back = 0; back < 12; ++back) {
            trial = phi;
            for (std::size_t i = 0; i < n; ++i) trial[i] += alpha * delta[i];
            std::vector<double> grad_trial;
            const double res_trial = detail::real_gradient(trial, coupling, w2, sigma, grad_trial);
            if (res_trial < res) {
                phi.swap(trial);
                grad.swap(grad_trial);
                res = res_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        ++iter;
        if (!accepted)
            throw NumericalError("newton_standing_wave: line search stalled", seed.time, iter, res);
    }
    if (res > tol)
        throw NumericalError("newton_standing_wave: no convergence within max_iter", seed.time,
                             max_iter, res);

    StandingWave wave;
    wave.omega = omega;
    wave.coupling = coupling;
    wave.phi = LatticeState(m);
    for (std::size_t i = 0; i < n; ++i) wave.phi.amplitudes[i] = phi[i];
    wave.residual = norm_l2(stationary_gradient_c(wave.phi, coupling, omega, sigma));
    wave.energy = stationary_energy_c(wave.phi, coupling, omega, sigma);
    wave.trivial = (norm_l2(wave.phi) <= 1e-8);
    return wave;
}

inline StandingWave newton_standing_wave(const LatticeState& seed, double epsilon, double omega,
                                         double sigma, double tol = 1e-10, int max_iter = 50) {
    if (epsilon <= 0.0) throw ValidationError("newton_standing_wave: epsilon must be > 0");
    return newton_standing_wave_c(seed, 1.0 / epsilon, omega, sigma, tol, max_iter);
}

struct ContinuationResult {
    std::vector<StandingWave> branch;
    bool complete = false;
    std::optional<double> failed_coupling;
    std::string message;
};

/// Path-following from weak coupling: each coupling value is solved by Newton
/// warm-started from the previous profile. A first-step failure throws; a
/// mid-branch failure returns the partial branch, flagged.
inline ContinuationResult continuation(const LatticeState& seed, double omega, double sigma,
                                       const std::vector<double>& coupling_schedule,
                                       double tol = 1e-10, int max_iter = 50) {
    if (coupling_schedule.empty()) throw ValidationError("continuation: empty coupling schedule");
    if (coupling_schedule.front() < 0.0)
        throw ValidationError("continuation: couplings must be >= 0");
    for (std::size_t i = 1; i < coupling_schedule.size(); ++i)
        if (coupling_schedule[i] <= coupling_schedule[i - 1])
            throw ValidationError("continuation: coupling schedule must be strictly increasing");

    ContinuationResult result;
    LatticeState current = seed;
    for (std::size_t i = 0; i < coupling_schedule.size(); ++i) {
        const double c = coupling_schedule[i];
        try {
            StandingWave wave = newton_standing_wave_c(current, c, omega, sigma, tol, max_iter);
            current = wave.phi;
            result.branch.push_back(std::move(wave));
        } catch (const NumericalError& err) {
            if (i == 0) throw;
            result.failed_coupling = c;
            result.message = err.what();
            return result;
        }
    }
    result.complete = true;
    return result;
}

// ---------------------------------------------------------------------------
// Mountain-pass geometry
// ---------------------------------------------------------------------------

struct GeometryReport {
    double r = 0.0;
    double kappa1 = 0.0;
    double alpha = 0.0;
    double rim_min_sampled = 0.0;
    double ray_negative_t = 0.0;
    bool rim_ok = false;
    int n_samples = 0;
    int half_width = 0;
    std::uint64_t seed = 0;
};

/// Checks the two mountain-pass hypotheses numerically: the action is at least
/// alpha = r^2 (1/2 - kappa1^{2s+2} r^{2s} / (2s+2)) on the rim ||phi||_{l^2_eps} = r,
/// and becomes negative along a fixed single-site ray.
inline GeometryReport mountain_pass_geometry(double r, double epsilon, double omega, double sigma,
                                             int n_samples, std::uint64_t seed, int half_width) {
    if (epsilon <= 0.0) throw ValidationError("mountain_pass_geometry: epsilon must be > 0");
    if (!(omega > 0.0)) throw ValidationError("mountain_pass_geometry: omega must be > 0");
    if (!(sigma > 0.0)) throw ValidationError("mountain_pass_geometry: sigma must be > 0");
    if (n_samples < 1000) throw ValidationError("mountain_pass_geometry: n_samples must be >= 1000");
    const double coupling = 1.0 / epsilon;
    const double kappa1 = 1.0 / std::min(coupling, omega);
    const double kpow = std::pow(kappa1, 2.0 * sigma + 2.0);
    const double r_max = std::pow((sigma + 1.0) / kpow, 1.0 / (2.0 * sigma));
    if (!(r > 0.0) || !(r < r_max))
        throw ValidationError("mountain_pass_geometry: r must lie in (0, ((sigma+1)/kappa1^{2s+2})^{1/(2s)})");

    GeometryReport rep;
    rep.r = r;
    rep.kappa1 = kappa1;
    rep.alpha = r * r * (0.5 - kpow * pow_sigma(r * r, sigma) / (2.0 * sigma + 2.0));
    rep.n_samples = n_samples;
    rep.half_width = half_width;
    rep.seed = seed;

    std::vector<double> values(static_cast<std::size_t>(n_samples),
                               std::numeric_limits<double>::infinity());
    parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        LatticeState phi(half_width);
        for (auto& a : phi.amplitudes) a = rng.complex_normal();
        const double nrm = std::sqrt(norm_l2e_sq_c(phi, coupling, omega));
        if (nrm == 0.0) return;
        for (auto& a : phi.amplitudes) a *= r / nrm;
        values[i] = stationary_energy_c(phi, coupling, omega, sigma);
    });
    double rim_min = std::numeric_limits<double>::infinity();
    for (const double v : values) rim_min = std::min(rim_min, v);
    rep.rim_min_sampled = rim_min;
    rep.rim_ok = (rim_min >= rep.alpha);

    LatticeState ray = single_site_state(half_width, 0, 1.0);
    const double e_norm = std::sqrt(norm_l2e_sq_c(ray, coupling, omega));
    ray.site(0) = 1.0 / e_norm;
    double t = 1.0;
    for (int k = 0; k < 60; ++k) {
        if (stationary_energy_c(scaled(ray, t), coupling, omega, sigma) < 0.0) break;
        t *= 2.0;
    }
    rep.ray_negative_t = t;
    return rep;
}

}  // namespace dnls
