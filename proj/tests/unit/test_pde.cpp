#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "kinhydro/checks.hpp"
#include "kinhydro/pde.hpp"

using namespace kinhydro;

namespace {

Grid line(std::size_t n, double h, Boundary b = Boundary::Periodic) {
    Grid g;
    g.n = {n, 1, 1};
    g.h = h;
    g.boundary = b;
    return g;
}

Grid square(std::size_t n, double h) {
    Grid g;
    g.dims = 2;
    g.n = {n, n, 1};
    g.h = h;
    return g;
}

/// Smooth periodic state with every field varying, on a grid of side L.
HydroState wavy_state(const Grid& g, const ModelParams& p, double L, bool at_rest = false) {
    const double tau = 2 * std::numbers::pi / L, c = p.sound_speed(), rho0 = 0.3 * p.rho_max();
    return make_state(
        g, p,
        [&](const Vec3& x) { return rho0 * (1 + 0.1 * std::sin(tau * x[0]) + 0.05 * std::cos(tau * x[1])); },
        [&](const Vec3& x) {
            if (at_rest) return Vec3{};
            return Vec3{0.1 * c * std::cos(tau * x[1]), 0.05 * c * std::sin(tau * x[0]), 0.02 * c};
        },
        [&](const Vec3& x) { return p.Theta0 * (1 + 0.1 * std::cos(tau * (x[0] + x[1]))); });
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

TEST(Grid, ValidationAndNeighbours) {
    EXPECT_THROW(line(3, 1.0).validate(), DomainError);
    EXPECT_THROW(line(8, 0.0).validate(), DomainError);
    const Grid g = line(8, 1.0, Boundary::Reflecting);
    EXPECT_FALSE(g.neighbor(0, 0, -1));
    EXPECT_EQ(*line(8, 1.0).neighbor(0, 0, -1), 7u);
}

TEST(PrimitiveRecovery, TemperatureFromSpecificEnergy) {
    const ModelParams p;
    const Grid g = line(4, 1e-7);
    HydroState s(g);
    const double phi = 2e-14;
    s.rho[0] = 10.0;
    s.rhoe[0] = 10.0 * phi / p.m;
    EXPECT_NEAR(primitive_recovery(s, 0, phi, p).Theta, 0.0, 1e-10);
    s.rhoe[0] = 10.0 * (phi / p.m + 1.5 * p.k_B * 300.0 / p.m);
    EXPECT_NEAR(primitive_recovery(s, 0, phi, p).Theta, 300.0, 1e-12);
}

TEST(PrimitiveRecovery, RoundTripAndErrors) {
    const ModelParams p;
    const Grid g = line(4, 1e-7);
    HydroState s(g);
    const HydroSite h = make_hydro_site(12.5, {3e3, -2e3, 1e2}, 287.0, 1e-14, p);
    store_primitive(s, 2, h);
    const HydroSite r = primitive_recovery(s, 2, 1e-14, p);
    EXPECT_NEAR(r.Theta, h.Theta, 1e-14 * h.Theta);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r.u[j], h.u[j], 1e-14 * std::abs(h.u[j]));
    EXPECT_NEAR(r.P, h.P, 1e-14 * h.P);

    s.rhoe[2] = -1.0;
    try {
        primitive_recovery(s, 2, 0.0, p);
        FAIL();
    } catch (const RecoveryError& e) {
        EXPECT_EQ(e.cell(), 2u);
    }
    EXPECT_THROW(primitive_recovery(s, 1, 0.0, p), RecoveryError);  // rho = 0
}

TEST(Rhs, UniformStateIsStationary) {
    const ModelParams p;
    const Grid g = square(8, 1e-7);
    const HydroState s = make_state(
        g, p, [&](const Vec3&) { return 20.0; }, [](const Vec3&) { return Vec3{}; },
        [](const Vec3&) { return 300.0; });
    const Derivative d = rhs(s, p, {}, 0.0);
    for (std::size_t c = 0; c < g.cells(); ++c) {
        EXPECT_EQ(d.rho[c], 0.0);
        EXPECT_EQ(d.rhoe[c], 0.0);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(d.mom[j][c], 0.0);
    }
    HydroState t = s;
    step(t, p, {});
    EXPECT_EQ(t.rho, s.rho);
    EXPECT_EQ(t.rhoe, s.rhoe);
}

TEST(Rhs, FieldFreeReductionIsBitIdentical) {
    const ModelParams p;  // zero potential
    const Grid g = square(16, 1e-7);
    const HydroState s = wavy_state(g, p, 16 * 1e-7);
    for (const auto flux : {FluxScheme::Central, FluxScheme::UpwindAdvective}) {
        SolverConfig cfg;
        cfg.flux = flux;
        const Derivative a = rhs(s, p, cfg, 0.0);
        const Derivative b = rhs_field_free(s, p, cfg);
        EXPECT_TRUE(bitwise_equal(a.rho, b.rho));
        EXPECT_TRUE(bitwise_equal(a.rhoe, b.rhoe));
        for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(bitwise_equal(a.mom[j], b.mom[j]));
    }
}

TEST(Rhs, RestStateMassEquationIsSmoluchowski) {
    const double L = 16 * 1e-7;
    const ModelParams p = checks::periodic_argon(L, 0.3);
    const Grid g = square(16, 1e-7);
    const HydroState s = wavy_state(g, p, L, true);
    for (const auto mode : {LambdaMode::Constant, LambdaMode::MeanFreePath}) {
        SolverConfig cfg;
        cfg.lambda_mode = mode;
        const auto phi = cell_potential(g, p, 0.0);
        const auto prim = detail::primitives(s, phi, p);
        const Derivative full = rhs(s, p, cfg, 0.0);
        const auto smol = smoluchowski_rhs(g, prim.rho, prim.Theta, phi, cfg, p);
        EXPECT_TRUE(bitwise_equal(full.rho, smol));
    }
}

TEST(Rhs, BarometricResidualIsSecondOrder) {
    const auto r = checks::barometric_order(32, 0.5);
    EXPECT_NEAR(r.order, 2.0, 0.2);
    EXPECT_NEAR(r.momentum_order, 2.0, 0.2);
}

TEST(Rhs, ShearWaveViscousDecayRate) {
    // u = (U sin(k y), 0, 0), uniform rho and Theta: d_t(rho u_x) = -(6 lambda/5) Theta^(1/2) k^2 u_x.
    const ModelParams p;
    for (std::size_t n : {32, 64}) {
        const double h = 1e-7, L = h * static_cast<double>(n), k = 2 * std::numbers::pi / L;
        const double U = 0.01 * p.sound_speed(), rho = 20.0, Theta = 300.0;
        const Grid g = square(n, h);
        const HydroState s = make_state(
            g, p, [&](const Vec3&) { return rho; }, [&](const Vec3& x) { return Vec3{U * std::sin(k * x[1]), 0, 0}; },
            [&](const Vec3&) { return Theta; });
        const Derivative d = rhs(s, p, {}, 0.0);
        double err = 0.0, scale = 0.0;
        for (std::size_t c = 0; c < g.cells(); ++c) {
            // Two-point normal differences see k_h^2 = (2 sin(kh/2)/h)^2.
            const double kh = 2 * std::sin(k * h / 2) / h;
            const double expected = -1.2 * p.lambda() * std::sqrt(Theta) * kh * kh * U * std::sin(k * g.center(c)[1]);
            err = std::max(err, std::abs(d.mom[0][c] - expected));
            scale = std::max(scale, std::abs(expected));
        }
        EXPECT_LE(err, 1e-9 * scale) << n;
    }
}

TEST(Step, PeriodicConservationOverManySteps) {
    const auto r = checks::pde_conservation(128, 1000);
    EXPECT_LE(r.mass_drift, 1e-12);
    EXPECT_LE(r.energy_drift, 1e-12);
    EXPECT_LE(r.momentum_residual, 1e-10);
}

TEST(Step, ReflectingBoxConservesMass) {
    const ModelParams p;
    const Grid g = line(64, 1e-7, Boundary::Reflecting);
    const double L = 64e-7;
    HydroState s = make_state(
        g, p, [&](const Vec3& x) { return 20.0 * (1 + 0.3 * std::exp(-std::pow((x[0] - 0.3 * L) / (0.05 * L), 2))); },
        [&](const Vec3&) { return Vec3{}; }, [](const Vec3&) { return 300.0; });
    const auto t0 = totals(s);
    for (int i = 0; i < 500; ++i) step(s, p, {});
    const auto t1 = totals(s);
    EXPECT_NEAR(t1.mass / t0.mass, 1.0, 1e-13);
    EXPECT_NEAR(t1.energy / t0.energy, 1.0, 1e-13);
    for (double r : s.rho) EXPECT_GT(r, 0.0);
}

TEST(Step, GaussianBumpSpreads) {
    const ModelParams p;
    const double h = 1e-7, L = 128 * h;
    const Grid g = line(128, h);
    HydroState s = make_state(
        g, p, [&](const Vec3& x) { return 20.0 * (1 + 0.2 * std::exp(-std::pow((x[0] - 0.5 * L) / (0.05 * L), 2))); },
        [&](const Vec3&) { return Vec3{}; }, [](const Vec3&) { return 300.0; });
    const auto peak = [&] { return *std::max_element(s.rho.begin(), s.rho.end()); };
    const double p0 = peak(), m0 = totals(s).mass;
    for (int i = 0; i < 400; ++i) step(s, p, {});
    EXPECT_LT(peak(), p0);
    EXPECT_NEAR(totals(s).mass / m0, 1.0, 1e-12);
    for (double r : s.rho) EXPECT_GT(r, 0.0);
}

TEST(Step, EulerAndThreadedRunsAreReproducible) {
    const double L = 16e-7;
    const ModelParams p = checks::periodic_argon(L, 0.2);
    const Grid g = square(16, 1e-7);
    HydroState a = wavy_state(g, p, L), b = a;
    SolverConfig serial, threaded;
    threaded.threads = 4;
    serial.time = threaded.time = TimeScheme::Euler;
    for (int i = 0; i < 5; ++i) {
        step(a, p, serial);
        step(b, p, threaded);
    }
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_EQ(a.rhoe, b.rhoe);
    EXPECT_EQ(a.mom[0], b.mom[0]);
}

TEST(Step, RejectsStepAboveCflBeforeMutation) {
    const ModelParams p;
    const Grid g = line(32, 1e-7);
    HydroState s = wavy_state(g, p, 32e-7);
    const HydroState before = s;
    SolverConfig cfg;
    cfg.dt = 10.0 * cfl_bound(s, p, cfg, 0.0);
    EXPECT_THROW(step(s, p, cfg), StepSizeError);
    EXPECT_EQ(s.rho, before.rho);
    EXPECT_EQ(s.time, before.time);
}

TEST(Smoluchowski, BarometricInputIsNearlyStationary) {
    const double L = 64e-7;
    const ModelParams p = checks::periodic_argon(L, 0.5);
    for (std::size_t n : {32, 64}) {
        const Grid g = line(n, L / static_cast<double>(n));
        const auto phi = cell_potential(g, p, 0.0);
        std::vector<double> rho(n);
        for (std::size_t c = 0; c < n; ++c) rho[c] = 20.0 * std::exp(-phi[c] / (p.k_B * 300.0));
        const auto out = smoluchowski_reference(rho, p, 300.0, 1e-11, g);
        double err = 0.0;
        for (std::size_t c = 0; c < n; ++c) err = std::max(err, std::abs(out[c] - rho[c]) / rho[c]);
        EXPECT_LE(err, n == 32 ? 2e-3 : 5e-4) << n;
    }
}

TEST(Smoluchowski, HarmonicFreeEnergyDecreasesMonotonically) {
    ModelParams p;
    const double h = 1e-7, L = 64 * h, A = 4.0 * p.k_B * 300.0 / (L * L / 4);
    p.potential = [A, L](const Vec3& x, double) { return A * std::pow(x[0] - 0.5 * L, 2); };
    const Grid g = line(64, h, Boundary::Reflecting);
    std::vector<double> rho(64);
    for (std::size_t c = 0; c < 64; ++c) rho[c] = 20.0 * (1 + 0.5 * std::sin(3 * std::numbers::pi * g.center(c)[0] / L));
    const auto phi = cell_potential(g, p, 0.0);
    double F = free_energy(rho, 300.0, phi, g, p);
    const double F0 = F;
    for (int i = 0; i < 40; ++i) {
        rho = smoluchowski_reference(rho, p, 300.0, 5e-12, g);
        const double next = free_energy(rho, 300.0, phi, g, p);
        EXPECT_LE(next, F) << i;
        F = next;
    }
    EXPECT_LT(F, F0);
}

TEST(Step, RestingGasInReflectingBoxIsStationary) {
    const ModelParams p;
    Grid g = square(8, 1e-7);
    g.boundary = Boundary::Reflecting;
    HydroState s = make_state(
        g, p, [](const Vec3&) { return 20.0; }, [](const Vec3&) { return Vec3{}; }, [](const Vec3&) { return 300.0; });
    const Derivative d = rhs(s, p, {}, 0.0);
    for (std::size_t c = 0; c < g.cells(); ++c)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(d.mom[j][c], 0.0);
}
