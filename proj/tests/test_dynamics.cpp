#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dnls/dynamics.hpp"

#include "test_helpers.hpp"

using namespace dnls;
using testing_support::random_state;
using testing_support::random_state_with_norm;
using Catch::Approx;

namespace {

constexpr std::uint64_t kSeed = 77001;

ModelParams conservative_params(int m, double sigma = 1.0, double epsilon = 1.0) {
    ModelParams p;
    p.half_width = m;
    p.epsilon = epsilon;
    p.sigma = sigma;
    return p;
}

}  // namespace

TEST_CASE("vector field: hand values") {
    SECTION("damped single site") {
        ModelParams p = conservative_params(3);
        p.delta = 0.5;
        const LatticeState f = vector_field(single_site_state(3, 0, 1.0), p);
        // i(Au)_0 + i|u|^2 u - delta u = i(-2) + i - 0.5 = -0.5 - i
        CHECK(f.site(0).real() == Approx(-0.5));
        CHECK(f.site(0).imag() == Approx(-1.0));
    }
    SECTION("zero state is a fixed point without forcing") {
        const ModelParams p = conservative_params(4);
        CHECK(norm_l2(vector_field(zero_state(4), p)) == 0.0);
    }
    SECTION("conservative field is charge-neutral") {
        const ModelParams p = conservative_params(8, 2.0);
        for (int k = 0; k < 100; ++k) {
            const LatticeState u = random_state(8, kSeed, k);
            CHECK(std::abs(inner(vector_field(u, p), u)) <= 1e-12 * charge(u));
        }
    }
    SECTION("matches the composition of lattice operators") {
        ModelParams p = conservative_params(6, 2.0, 0.7);
        p.delta = 0.31;
        p.forcing.assign(13, cplx{0.0, 0.0});
        p.forcing[6] = cplx{0.2, -0.1};
        const LatticeState u = random_state(6, kSeed, 12345);
        const LatticeState fused = vector_field(u, p);
        // i (1/eps) A u - delta u + i |u|^{2s} u - i g, assembled per operator
        LatticeState ref(6, u.time);
        const LatticeState au = apply_operator(DiffOp::A, u);
        const LatticeState nl = apply_nonlinearity(u, p.sigma);
        for (int n = -6; n <= 6; ++n) {
            const cplx i{0.0, 1.0};
            ref.site(n) = i / p.epsilon * au.value_at(n) - p.delta * u.site(n) +
                          i * nl.site(n) - i * p.forcing_at(n);
        }
        CHECK(distance_l2(fused, ref) <= 1e-14 * norm_l2(ref));
    }
}

TEST_CASE("implicit midpoint step") {
    IntegratorConfig cfg;
    cfg.dt = 0.01;

    SECTION("zero state with no forcing stays zero") {
        const ModelParams p = conservative_params(5);
        const LatticeState u1 = step(zero_state(5), p, cfg);
        CHECK(norm_l2(u1) == 0.0);
        CHECK(u1.time == Approx(cfg.dt));
    }
    SECTION("one conservative step changes charge by at most 10 solver_tol") {
        const ModelParams p = conservative_params(20, 1.0);
        const LatticeState u0 = gaussian_state(20, 0.0, 3.0, 4.0);
        const LatticeState u1 = step(u0, p, cfg);
        CHECK(std::abs(charge(u1) - charge(u0)) <= 10.0 * cfg.solver_tol);
    }
    SECTION("dissipative step strictly decreases charge") {
        ModelParams p = conservative_params(20, 1.0);
        p.delta = 0.25;
        const LatticeState u0 = gaussian_state(20, 0.0, 3.0, 4.0);
        CHECK(charge(step(u0, p, cfg)) < charge(u0));
    }
    SECTION("invalid config is rejected") {
        IntegratorConfig bad;
        bad.solver_tol = 1e-3;
        CHECK_THROWS_AS(step(zero_state(3), conservative_params(3), bad), ValidationError);
    }
}

TEST_CASE("integrate: exact dissipation law") {
    // With g = 0 the charge obeys d/dt ||u||^2 = -2 delta ||u||^2 exactly.
    ModelParams p = conservative_params(30, 1.0);
    p.delta = 0.1;
    IntegratorConfig cfg;
    cfg.dt = 0.001;
    cfg.record_stride = 100;
    const LatticeState u0 = gaussian_state(30, 0.0, 4.0, 1.0);
    const Trajectory traj = integrate(u0, p, cfg, 10.0);
    CHECK(traj.rows.back().t == Approx(10.0));
    for (const auto& row : traj.rows) {
        const double expected = charge(u0) * std::exp(-2.0 * p.delta * row.t);
        CHECK(std::abs(row.charge - expected) <= 1e-6 * charge(u0));
    }
    // final charge / initial charge = e^{-2} at T = 10, delta = 0.1
    CHECK(traj.rows.back().charge / traj.rows.front().charge ==
          Approx(std::exp(-2.0)).epsilon(1e-6));
}

TEST_CASE("integrate: conservative charge and energy conservation (short run)") {
    // The focusing sigma = 3 run develops faster local oscillations, so it
    // gets a finer dt for the same energy tolerance; the charge is conserved
    // by the scheme at solver tolerance regardless of dt.
    for (const auto& [sigma, dt] :
         {std::pair{1.0, 0.01}, std::pair{2.0, 0.002}, std::pair{3.0, 0.002}}) {
        const ModelParams p = conservative_params(40, sigma);
        IntegratorConfig cfg;
        cfg.dt = dt;
        const LatticeState u0 = gaussian_state(40, 0.0, 2.0, 4.0);
        const Trajectory traj = integrate(u0, p, cfg, 5.0);
        const double q0 = traj.rows.front().charge;
        const double e0 = traj.rows.front().energy;
        for (const auto& row : traj.rows) {
            CHECK(std::abs(row.charge - q0) <= 1e-9 * q0);
            CHECK(std::abs(row.energy - e0) <= 1e-3 * std::abs(e0));
        }
    }
}

TEST_CASE("integrate: energy drift shrinks by ~4 when dt is halved") {
    const ModelParams p = conservative_params(40, 1.0);
    const LatticeState u0 = gaussian_state(40, 0.0, 2.0, 4.0);
    auto max_drift = [&](double dt) {
        IntegratorConfig cfg;
        cfg.dt = dt;
        cfg.record_stride = 10;
        const Trajectory traj = integrate(u0, p, cfg, 2.0);
        const double e0 = traj.rows.front().energy;
        double worst = 0.0;
        for (const auto& row : traj.rows) worst = std::max(worst, std::abs(row.energy - e0));
        return worst;
    };
    const double coarse = max_drift(0.02);
    const double fine = max_drift(0.01);
    CHECK(coarse / fine == Approx(4.0).margin(0.6));
}

TEST_CASE("integrate: midpoint and rk4 agree on smooth runs") {
    const ModelParams p = conservative_params(20, 1.0);
    const LatticeState u0 = gaussian_state(20, 0.0, 3.0, 1.0);
    IntegratorConfig mid;
    mid.dt = 1e-3;
    mid.record_stride = 1000;
    IntegratorConfig rk = mid;
    rk.scheme = Scheme::rk4;
    const Trajectory a = integrate(u0, p, mid, 1.0);
    const Trajectory b = integrate(u0, p, rk, 1.0);
    CHECK(distance_l2(a.snapshots.back(), b.snapshots.back()) < 1e-8);
}

TEST_CASE("integrate: T = 0 yields the single initial row") {
    const ModelParams p = conservative_params(5);
    const Trajectory traj = integrate(single_site_state(5, 0, 1.0), p, IntegratorConfig{}, 0.0);
    CHECK(traj.rows.size() == 1);
    CHECK(traj.rows.front().t == 0.0);
}

TEST_CASE("integrate: stiff focusing data falls back to Newton and completes") {
    // sigma = 3 with concentrated mass makes the fixed-point iteration diverge
    // at this dt; the Newton fallback must carry the step.
    const ModelParams p = conservative_params(30, 3.0);
    const LatticeState u0 = gaussian_state(30, 0.0, 1.0, 10.0);
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    cfg.record_stride = 10;
    const Trajectory traj = integrate(u0, p, cfg, 1.0);
    const double q0 = traj.rows.front().charge;
    for (const auto& row : traj.rows) CHECK(std::abs(row.charge - q0) <= 1e-8 * q0);
}

TEST_CASE("absorbing prediction") {
    SECTION("worked constants") {
        const AbsorbingReport rep = absorbing_prediction(0.1, 0.5, 0.3, 1.0);
        CHECK(rep.rho == Approx(0.2));
        CHECK(rep.t0_predicted == Approx(2.0 * std::log(20.0)).epsilon(1e-12));
    }
    SECTION("R = rho1 with no forcing enters immediately") {
        const AbsorbingReport rep = absorbing_prediction(0.0, 0.5, 0.3, 0.3);
        CHECK(rep.t0_predicted == Approx(0.0).margin(1e-15));
    }
    SECTION("rho1 <= rho is rejected") {
        CHECK_THROWS_AS(absorbing_prediction(0.1, 0.5, 0.15, 1.0), ValidationError);
        CHECK_THROWS_AS(absorbing_prediction(0.1, 0.0, 0.3, 1.0), ValidationError);
    }
    SECTION("l^2_1 radius per the energy-balance estimate") {
        ModelParams p = conservative_params(10, 1.0);
        p.delta = 0.5;
        p.forcing.assign(21, cplx{0.0, 0.0});
        p.forcing[10] = 0.1;
        const AbsorbingReport rep = absorbing_prediction(p, 0.3, 1.0);
        const double expected = 1.0 * std::pow(0.3, 4.0) + 3.0 * 0.1 * 0.3 + 0.1 * 0.3 / 0.5;
        CHECK(rep.rho2 * rep.rho2 == Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("gronwall envelope holds along dissipative trajectories") {
    ModelParams p = conservative_params(30, 1.0);
    p.delta = 0.5;
    p.forcing.assign(61, cplx{0.0, 0.0});
    for (int n = -5; n <= 5; ++n) p.forcing[static_cast<std::size_t>(n + 30)] = 0.1 / std::sqrt(11.0);
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    const LatticeState u0 = random_state_with_norm(30, kSeed, 424242, 1.0);
    const Trajectory traj = integrate(u0, p, cfg, 20.0);

    const DecayReport audit = decay_audit(traj);
    CHECK(audit.passed);
    CHECK(audit.gronwall_checked);
    CHECK(audit.gronwall_min_margin >= 0.0);

    const auto entry = observe_absorbing_entry(traj, 0.3);
    REQUIRE(entry.has_value());
    CHECK(*entry <= absorbing_prediction(p, 0.3, 1.0).t0_predicted);
}

TEST_CASE("decay audit: conservative growth bound and J balance") {
    const ModelParams p = conservative_params(30, 2.0);
    IntegratorConfig cfg;
    cfg.dt = 0.005;
    cfg.record_stride = 4;
    const LatticeState u0 = gaussian_state(30, 0.0, 3.0, 2.0);
    const Trajectory traj = integrate(u0, p, cfg, 3.0);
    const DecayReport audit = decay_audit(traj);
    CHECK(audit.passed);
    CHECK(audit.growth_checked);
    CHECK(audit.growth_min_margin >= 0.0);
    CHECK_FALSE(audit.gronwall_checked);
}

TEST_CASE("J balance residual is O(dt^2) in the sample spacing") {
    ModelParams p = conservative_params(25, 1.0);
    p.delta = 0.2;
    p.forcing.assign(51, cplx{0.0, 0.0});
    p.forcing[25] = cplx{0.15, 0.1};
    const LatticeState u0 = gaussian_state(25, 0.0, 3.0, 1.0);

    auto residual_at = [&](int stride) {
        IntegratorConfig cfg;
        cfg.dt = 0.004;
        cfg.record_stride = stride;
        return decay_audit(integrate(u0, p, cfg, 2.0)).jbalance_max_residual;
    };
    // Halving the sample spacing shrinks the centered-difference residual ~4x.
    const double coarse = residual_at(10);  // spacing 0.04
    const double fine = residual_at(5);     // spacing 0.02
    CHECK(coarse / fine == Approx(4.0).margin(1.0));
    CHECK(fine < 1e-3);
}

TEST_CASE("zero trajectory trivially satisfies every audit") {
    ModelParams p = conservative_params(10);
    p.delta = 0.3;
    const Trajectory traj = integrate(zero_state(10), p, IntegratorConfig{}, 1.0);
    const DecayReport audit = decay_audit(traj);
    CHECK(audit.passed);
}

TEST_CASE("blow-up guard reports a numerical error instead of a physics claim") {
    ModelParams p = conservative_params(2, 3.0);
    LatticeState u0 = single_site_state(2, 0, 1e60);
    IntegratorConfig cfg;
    cfg.scheme = Scheme::rk4;  // explicit scheme overflows immediately at this amplitude
    cfg.dt = 1.0;
    CHECK_THROWS_AS(integrate(u0, p, cfg, 2.0), NumericalError);
}
