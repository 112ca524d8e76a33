#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dnls/errors.hpp"

namespace dnls {

using cplx = std::complex<double>;

/// Complex amplitudes on the sites n = -m..m of a lattice truncated with
/// Dirichlet ends: every site with |n| > m is identically zero, and the
/// stencil operators use zero ghost values at n = +-(m+1).
struct LatticeState {
    std::vector<cplx> amplitudes;  // size 2m+1, site n stored at index n+m
    int half_width = 0;
    double time = 0.0;

    LatticeState() = default;
    explicit LatticeState(int m, double t = 0.0)
        : amplitudes(static_cast<std::size_t>(2 * m + 1)), half_width(m), time(t) {
        if (m < 0) throw ValidationError("LatticeState: half_width must be >= 0");
    }

    int size() const { return 2 * half_width + 1; }

    cplx& site(int n) { return amplitudes[static_cast<std::size_t>(n + half_width)]; }
    const cplx& site(int n) const { return amplitudes[static_cast<std::size_t>(n + half_width)]; }

    /// Value at any lattice site, zero outside the box.
    cplx value_at(int n) const {
        if (n < -half_width || n > half_width) return {0.0, 0.0};
        return site(n);
    }
};

inline bool all_finite(const LatticeState& u) {
    for (const auto& z : u.amplitudes)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

inline void require_finite(const LatticeState& u, const char* where) {
    if (!all_finite(u)) throw ValidationError(std::string(where) + ": state has non-finite amplitudes");
}

inline LatticeState zero_state(int m, double t = 0.0) { return LatticeState(m, t); }

inline LatticeState single_site_state(int m, int n, cplx amplitude) {
    if (n < -m || n > m) throw ValidationError("single_site_state: site outside [-m, m]");
    LatticeState u(m);
    u.site(n) = amplitude;
    return u;
}

/// Real Gaussian profile exp(-(n-center)^2 / (2 width^2)) rescaled so that the
/// squared l2 norm equals `charge` exactly.
inline LatticeState gaussian_state(int m, double center, double width, double charge) {
    if (width <= 0.0) throw ValidationError("gaussian_state: width must be > 0");
    if (charge < 0.0) throw ValidationError("gaussian_state: charge must be >= 0");
    LatticeState u(m);
    double sum_sq = 0.0;
    for (int n = -m; n <= m; ++n) {
        const double x = (n - center) / width;
        const double a = std::exp(-0.5 * x * x);
        u.site(n) = a;
        sum_sq += a * a;
    }
    if (charge > 0.0 && sum_sq > 0.0) {
        const double scale = std::sqrt(charge / sum_sq);
        for (auto& z : u.amplitudes) z *= scale;
    } else {
        for (auto& z : u.amplitudes) z = 0.0;
    }
    return u;
}

/// Model parameters for i u' + (1/eps) A u + i delta u + |u|^{2 sigma} u = g.
/// delta = 0 together with g = 0 is the conservative regime.
struct ModelParams {
    double epsilon = 1.0;
    double delta = 0.0;
    double sigma = 1.0;
    std::vector<cplx> forcing;  // g_n for n = -m..m; empty means identically zero
    int half_width = 0;

    cplx forcing_at(int n) const {
        if (forcing.empty()) return {0.0, 0.0};
        return forcing[static_cast<std::size_t>(n + half_width)];
    }

    bool conservative() const {
        if (delta != 0.0) return false;
        for (const auto& g : forcing)
            if (g != cplx{0.0, 0.0}) return false;
        return true;
    }

    double forcing_norm() const {
        double s = 0.0;
        for (const auto& g : forcing) s += std::norm(g);
        return std::sqrt(s);
    }

    void validate() const {
        if (epsilon <= 0.0) throw ValidationError("params.epsilon: must be > 0");
        if (delta < 0.0) throw ValidationError("params.delta: must be >= 0");
        if (sigma < 0.0) throw ValidationError("params.sigma: must be >= 0");
        if (half_width < 0) throw ValidationError("params.m: must be >= 0");
        if (!forcing.empty() && forcing.size() != static_cast<std::size_t>(2 * half_width + 1))
            throw ValidationError("params.forcing: length must be 2m+1");
        for (const auto& g : forcing)
            if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
                throw ValidationError("params.forcing: non-finite entry");
    }
};

// ---------------------------------------------------------------------------
// Difference operators
// ---------------------------------------------------------------------------

enum class DiffOp { B, Bstar, A };

/// (Bu)_n = u_{n+1} - u_n,  (B*u)_n = u_{n-1} - u_n,
/// (Au)_n = u_{n-1} - 2 u_n + u_{n+1}.
/// A state with half_width m is a compactly supported element of the full
/// lattice, so the output support grows by one site; with that convention
/// A = -B*B, (Bu,v) = (u,B*v) and (Au,v) = -(Bu,Bv) hold exactly.
inline LatticeState apply_operator(DiffOp kind, const LatticeState& u) {
    require_finite(u, "apply_operator");
    const int m = u.half_width;
    LatticeState out(m + 1, u.time);
    for (int n = -m - 1; n <= m + 1; ++n) {
        const cplx left = u.value_at(n - 1);
        const cplx right = u.value_at(n + 1);
        const cplx mid = u.value_at(n);
        switch (kind) {
            case DiffOp::B: out.site(n) = right - mid; break;
            case DiffOp::Bstar: out.site(n) = left - mid; break;
            case DiffOp::A: out.site(n) = left - 2.0 * mid + right; break;
        }
    }
    return out;
}

/// Real scalar product Re sum u_n conj(v_n).
inline double inner(const LatticeState& u, const LatticeState& v) {
    double s = 0.0;
    const int m = std::max(u.half_width, v.half_width);
    for (int n = -m; n <= m; ++n) s += std::real(u.value_at(n) * std::conj(v.value_at(n)));
    return s;
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

inline double norm_lp(const LatticeState& u, double p) {
    if (!(p >= 1.0))
        throw ValidationError("norm_lp: p must be >= 1 (or infinity)");
    if (std::isinf(p)) {
        double sup = 0.0;
        for (const auto& z : u.amplitudes) sup = std::max(sup, std::abs(z));
        return sup;
    }
    if (p == 2.0) {
        double s = 0.0;
        for (const auto& z : u.amplitudes) s += std::norm(z);
        return std::sqrt(s);
    }
    double s = 0.0;
    for (const auto& z : u.amplitudes) s += std::pow(std::abs(z), p);
    return std::pow(s, 1.0 / p);
}

inline double norm_l2(const LatticeState& u) { return norm_lp(u, 2.0); }

/// Squared l2 norm, i.e. the conserved charge of the conservative flow.
inline double charge(const LatticeState& u) {
    double s = 0.0;
    for (const auto& z : u.amplitudes) s += std::norm(z);
    return s;
}

/// ||Bu||^2 over the full lattice: both boundary differences u_{-m} - 0 and
/// 0 - u_m are counted, which keeps (-A u, u) = ||Bu||^2 exact on the box.
inline double grad_norm_sq(const LatticeState& u) {
    const int m = u.half_width;
    double s = 0.0;
    for (int n = -m - 1; n <= m; ++n) s += std::norm(u.value_at(n + 1) - u.value_at(n));
    return s;
}

/// ||u||^2 + ||Bu||^2 (squared Sobolev-type lattice norm).
inline double norm_l21_sq(const LatticeState& u) {
    return charge(u) + grad_norm_sq(u);
}

inline double norm_l21(const LatticeState& u) { return std::sqrt(norm_l21_sq(u)); }

// ---------------------------------------------------------------------------
// Nonlinearity
// ---------------------------------------------------------------------------

/// s^sigma with the common exponents special-cased; s >= 0.
inline double pow_sigma(double s, double sigma) {
    if (sigma == 0.0) return 1.0;
    if (sigma == 1.0) return s;
    if (sigma == 2.0) return s * s;
    if (sigma == 3.0) return s * s * s;
    if (sigma == 0.5) return std::sqrt(s);
    return std::pow(s, sigma);
}

/// Site-wise map z -> f(|z|^2) z together with f' for Jacobians. Only the
/// power law f(s) = s^sigma ships; anything smooth can be plugged in.
struct Nonlinearity {
    std::function<double(double)> f;
    std::function<double(double)> fprime;
};

inline Nonlinearity power_law(double sigma) {
    if (sigma < 0.0) throw ValidationError("power_law: sigma must be >= 0");
    return Nonlinearity{
        [sigma](double s) { return pow_sigma(s, sigma); },
        [sigma](double s) {
            if (sigma == 0.0) return 0.0;
            return s > 0.0 ? sigma * pow_sigma(s, sigma) / s : 0.0;
        }};
}

inline LatticeState apply_nonlinearity(const LatticeState& u, const Nonlinearity& nl) {
    LatticeState out(u.half_width, u.time);
    for (std::size_t i = 0; i < u.amplitudes.size(); ++i)
        out.amplitudes[i] = nl.f(std::norm(u.amplitudes[i])) * u.amplitudes[i];
    if (!all_finite(out))
        throw NumericalError("apply_nonlinearity: non-finite output (overflow)", u.time);
    return out;
}

/// Power-law nonlinearity |u|^{2 sigma} u.
inline LatticeState apply_nonlinearity(const LatticeState& u, double sigma) {
    if (sigma < 0.0) throw ValidationError("apply_nonlinearity: sigma must be >= 0");
    LatticeState out(u.half_width, u.time);
    for (std::size_t i = 0; i < u.amplitudes.size(); ++i)
        out.amplitudes[i] = pow_sigma(std::norm(u.amplitudes[i]), sigma) * u.amplitudes[i];
    if (!all_finite(out))
        throw NumericalError("apply_nonlinearity: non-finite output (overflow)", u.time);
    return out;
}

// ---------------------------------------------------------------------------
// Scalar functionals
// ---------------------------------------------------------------------------

/// Hamiltonian energy (1/eps) ||u||_{l^2_1}^2 - 1/(sigma+1) sum |u_n|^{2 sigma + 2},
/// conserved by the conservative flow.
inline double hamiltonian_energy(const LatticeState& u, const ModelParams& params) {
    params.validate();
    double pot = 0.0;
    for (const auto& z : u.amplitudes) {
        const double s = std::norm(z);
        pot += pow_sigma(s, params.sigma) * s;
    }
    const double e = norm_l21_sq(u) / params.epsilon - pot / (params.sigma + 1.0);
    if (!std::isfinite(e)) throw NumericalError("hamiltonian_energy: overflow", u.time);
    return e;
}

/// Action functional whose critical points are standing-wave profiles, written
/// in terms of the coupling c = 1/eps:
///   (c/2) ||B phi||^2 + (omega^2/2) ||phi||^2 - 1/(2 sigma + 2) sum |phi_n|^{2 sigma + 2}.
inline double stationary_energy_c(const LatticeState& phi, double coupling, double omega,
                                  double sigma) {
    if (coupling < 0.0) throw ValidationError("stationary_energy: coupling must be >= 0");
    if (omega == 0.0) throw ValidationError("stationary_energy: omega must be nonzero");
    if (sigma <= 0.0) throw ValidationError("stationary_energy: sigma must be > 0");
    const int m = phi.half_width;
    double mass = 0.0, pot = 0.0;
    for (int n = -m; n <= m; ++n) {
        const double s = std::norm(phi.site(n));
        mass += s;
        pot += pow_sigma(s, sigma) * s;
    }
    return 0.5 * coupling * grad_norm_sq(phi) + 0.5 * omega * omega * mass -
           pot / (2.0 * sigma + 2.0);
}

inline double stationary_energy(const LatticeState& phi, double epsilon, double omega,
                                double sigma) {
    if (epsilon <= 0.0) throw ValidationError("stationary_energy: epsilon must be > 0");
    return stationary_energy_c(phi, 1.0 / epsilon, omega, sigma);
}

/// l2 representer of the derivative of the action functional:
///   -c A phi + omega^2 phi - |phi|^{2 sigma} phi,   c = 1/eps.
/// Vanishes exactly at standing-wave profiles.
inline LatticeState stationary_gradient_c(const LatticeState& phi, double coupling, double omega,
                                          double sigma) {
    if (coupling < 0.0) throw ValidationError("stationary_gradient: coupling must be >= 0");
    if (omega == 0.0) throw ValidationError("stationary_gradient: omega must be nonzero");
    if (sigma <= 0.0) throw ValidationError("stationary_gradient: sigma must be > 0");
    const int m = phi.half_width;
    LatticeState out(m, phi.time);
    const double w2 = omega * omega;
    for (int n = -m; n <= m; ++n) {
        const cplx lap = phi.value_at(n - 1) - 2.0 * phi.site(n) + phi.value_at(n + 1);
        const double s = std::norm(phi.site(n));
        out.site(n) = -coupling * lap + w2 * phi.site(n) - pow_sigma(s, sigma) * phi.site(n);
    }
    return out;
}

inline LatticeState stationary_gradient(const LatticeState& phi, double epsilon, double omega,
                                        double sigma) {
    if (epsilon <= 0.0) throw ValidationError("stationary_gradient: epsilon must be > 0");
    return stationary_gradient_c(phi, 1.0 / epsilon, omega, sigma);
}

/// The pair (J, Lambda) of the dissipative energy balance
///   (1/2) dJ/dt + delta J = Lambda  along solutions, with
///   J = ||u||_{l^2_1}^2 - eps [ 1/(sigma+1) sum |u|^{2s+2} - 2 (g,u) ]
///   Lambda = eps delta [ sigma/(sigma+1) sum |u|^{2s+2} + (g,u) ] + Im sum conj(u_n) g_n.
inline std::pair<double, double> j_lambda(const LatticeState& u, const ModelParams& params) {
    params.validate();
    const int m = u.half_width;
    double pot = 0.0;       // sum |u|^{2 sigma + 2}
    double g_dot_u = 0.0;   // Re sum g_n conj(u_n)
    double im_ug = 0.0;     // Im sum conj(u_n) g_n
    for (int n = -m; n <= m; ++n) {
        const double s = std::norm(u.site(n));
        pot += pow_sigma(s, params.sigma) * s;
        const cplx g = params.forcing_at(n);
        g_dot_u += std::real(g * std::conj(u.site(n)));
        im_ug += std::imag(std::conj(u.site(n)) * g);
    }
    const double eps = params.epsilon;
    const double sig = params.sigma;
    const double J = norm_l21_sq(u) - eps * (pot / (sig + 1.0) - 2.0 * g_dot_u);
    const double Lambda = eps * params.delta * (sig / (sig + 1.0) * pot + g_dot_u) + im_ug;
    return {J, Lambda};
}

struct FunctionalReport {
    double charge = 0.0;
    double energy = 0.0;
    double l21_norm_sq = 0.0;
    double J = 0.0;
    double Lambda = 0.0;
};

inline FunctionalReport compute_functionals(const LatticeState& u, const ModelParams& params) {
    FunctionalReport r;
    r.charge = charge(u);
    r.energy = hamiltonian_energy(u, params);
    r.l21_norm_sq = norm_l21_sq(u);
    std::tie(r.J, r.Lambda) = j_lambda(u, params);
    return r;
}

// ---------------------------------------------------------------------------
// Small state algebra used throughout
// ---------------------------------------------------------------------------

inline LatticeState scaled(const LatticeState& u, cplx factor) {
    LatticeState out = u;
    for (auto& z : out.amplitudes) z *= factor;
    return out;
}

inline LatticeState axpy(cplx alpha, const LatticeState& x, const LatticeState& y) {
    LatticeState out = y;
    for (std::size_t i = 0; i < out.amplitudes.size(); ++i) out.amplitudes[i] += alpha * x.amplitudes[i];
    return out;
}

inline double distance_l2(const LatticeState& u, const LatticeState& v) {
    const int m = std::max(u.half_width, v.half_width);
    double s = 0.0;
    for (int n = -m; n <= m; ++n) s += std::norm(u.value_at(n) - v.value_at(n));
    return std::sqrt(s);
}

}  // namespace dnls
