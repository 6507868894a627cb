#include <cmath>

#include <gtest/gtest.h>

#include "kinhydro/currents.hpp"
#include "kinhydro/rng.hpp"

using namespace kinhydro;

namespace {

ModelParams oracle_params() {
    ModelParams p;
    p.m = 1.3;
    p.k_B = 0.9;
    p.a = 1.0;
    p.eps = 1.0;
    p.Theta0 = 1.0;
    return p;
}

constexpr double kLambda = 0.7;

// Fields rho = 1 + sin(x)/5 + cos(y)/10 + z/20, Theta = 2 + 3 cos(x+y)/10 + z/10,
// u = (sin(y)/10, cos(x)/5, xz/20), Phi = 2x/5 + y^2/10 - z/5 at (0.3, -0.2, 0.5);
// currents from symbolic differentiation at 20 digits.
struct OraclePoint {
    HydroSite site;
    HydroGradients grad;
    Vec3 grad_phi;
    double phi;
};

OraclePoint oracle_point(const ModelParams& p) {
    OraclePoint o;
    o.site.rho = 1.1821106991163920781;
    o.site.Theta = 2.3485012495834077298;
    o.site.e = 2.4572897591827695656;
    o.site.u = {-0.019866933079506121546, 0.19106729782512120393, 0.0075};
    o.site.P = o.site.rho * p.k_B * o.site.Theta / p.m;
    o.grad.rho = {0.19106729782512120393, 0.019866933079506121546, 0.05};
    o.grad.Theta = {-0.029950024994048445692, -0.029950024994048445692, 0.1};
    o.grad.u = {{{0.0, -0.059104041332267915021, 0.025},
                 {0.098006657784124163112, 0.0, 0.0},
                 {0.0, 0.0, 0.015}}};
    o.grad_phi = {0.4, -0.04, -0.2};
    o.phi = 0.018461538461538461538;
    return o;
}

void expect_parts_sum(const MassCurrentParts& c) {
    EXPECT_EQ(c.total, c.advective + c.diffusive + c.drift);
    EXPECT_EQ(c.diffusive, c.fick + c.soret);
}

}  // namespace

TEST(MassCurrent, MatchesSymbolicOracle) {
    const auto p = oracle_params();
    const auto o = oracle_point(p);
    const auto c = mass_current(o.site, o.grad, o.grad_phi, kLambda, p);
    const Vec3 ref{-0.39304500034785606576, 0.23497526835592485357, 0.042158878227935378706};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(c.total[i], ref[i], 1e-14);
    expect_parts_sum(c);
}

TEST(EnergyCurrent, MatchesSymbolicOracle) {
    const auto p = oracle_params();
    const auto o = oracle_point(p);
    const auto c = energy_current(o.site, o.grad, o.grad_phi, kLambda, o.phi, p);
    const Vec3 ref{-1.2599547908154915620, 0.99652283248672878495, -0.0034561300689329810351};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(c.total[i], ref[i], 1e-14);
    EXPECT_EQ(c.total, c.advective + c.potential_drift + c.pressure_drift + c.diffusive);
}

TEST(EnergyCurrent, RestStateUniformTemperatureOracle) {
    // rho = 1 + sin(x)/5, Theta = 2, Phi = 2x/5, u = 0 at x = 0.3.
    const auto p = oracle_params();
    HydroSite s;
    s.rho = 1.0591040413322679150;
    s.Theta = 2.0;
    s.e = 0.4 * 0.3 / p.m + 1.5 * p.k_B * 2.0 / p.m;
    s.P = s.rho * p.k_B * s.Theta / p.m;
    HydroGradients g;
    g.rho = {0.19106729782512120393, 0, 0};
    const auto c = energy_current(s, g, {0.4, 0, 0}, kLambda, 0.4 * 0.3 / p.m, p);
    EXPECT_NEAR(c.total[0], -1.1405527782492377154, 1e-14);
    EXPECT_EQ(c.advective, Vec3{});
}

TEST(MomentumFlux, MatchesSymbolicOracle) {
    const auto p = oracle_params();
    const auto o = oracle_point(p);
    const auto f = momentum_flux(o.site, o.grad, o.grad_phi, kLambda, p);
    const double ref[3][3] = {
        {1.9317705093785912689, -0.047343963037382630459, -0.034837713987371035044},
        {-0.11815384132790387715, 1.9655900514660603774, -0.0034677457624135637023},
        {-0.011793553523211764153, 0.0054149785571072471392, 1.8962401584569640148}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_NEAR(f.total[i][j], ref[i][j], 1e-14) << i << j;
            EXPECT_EQ(f.total[i][j], f.advective[i][j] + f.pressure[i][j] + f.drift[i][j] - f.viscous[i][j]);
        }
}

TEST(MassCurrent, HomogeneousFieldFreeIsPureAdvection) {
    const ModelParams p;
    const HydroSite s = make_hydro_site(10.0, {3.0, -2.0, 1.0}, 300.0, 0.0, p);
    const auto c = mass_current(s, {}, {}, p.lambda(), p);
    EXPECT_EQ(c.total, s.u * s.rho);
    EXPECT_EQ(c.drift, Vec3{});
    EXPECT_EQ(c.diffusive, Vec3{});
    const auto e = energy_current(s, {}, {}, p.lambda(), 0.0, p);
    EXPECT_EQ(e.total, s.u * (s.rho * s.e + s.P));
}

TEST(MassCurrent, FickPlusSoretIsDiffusionCurrent) {
    const ModelParams p;
    CounterRng rng(4, 0);
    for (int i = 0; i < 100; ++i) {
        const HydroSite s = make_hydro_site(50.0 * (0.1 + rng.uniform()), {}, 100.0 + 500.0 * rng.uniform(), 0.0, p);
        HydroGradients g;
        for (std::size_t k = 0; k < 3; ++k) {
            g.rho[k] = 1e7 * rng.normal();
            g.Theta[k] = 1e9 * rng.normal();
        }
        const auto c = mass_current(s, g, {}, p.lambda(), p);
        // J_d = -(lambda/rho) grad(Theta^(1/2) rho) by the product rule.
        const double sq = std::sqrt(s.Theta);
        for (std::size_t k = 0; k < 3; ++k) {
            const double direct = -(p.lambda() / s.rho) * (sq * g.rho[k] + s.rho * g.Theta[k] / (2 * sq));
            EXPECT_NEAR(c.diffusive[k], direct, 1e-13 * std::abs(direct));
        }
        expect_parts_sum(c);
    }
}

TEST(MassCurrent, BarometricProfileHasZeroFlux) {
    const ModelParams p;
    CounterRng rng(5, 0);
    for (int i = 0; i < 50; ++i) {
        const double Theta = 100.0 + 500.0 * rng.uniform();
        const double rho = 30.0 * rng.uniform() + 1.0;
        const Vec3 gphi{1e-8 * rng.normal(), 1e-8 * rng.normal(), 1e-8 * rng.normal()};
        HydroGradients g;
        g.rho = gphi * (-rho / (p.k_B * Theta));
        const auto c = mass_current(make_hydro_site(rho, {}, Theta, 0.0, p), g, gphi, p.lambda(), p);
        const double scale = norm(c.drift);
        EXPECT_LE(norm(c.total), 1e-15 * scale);
    }
}

TEST(Currents, FieldFreeReductionIsTermByTerm) {
    const auto p = oracle_params();
    const auto o = oracle_point(p);
    const auto a = mass_current_impl<true>(o.site, o.grad, {}, kLambda, p);
    const auto b = mass_current_impl<false>(o.site, o.grad, {}, kLambda, p);
    EXPECT_EQ(a.total, b.total);
    EXPECT_EQ(a.drift, Vec3{});
    const auto ea = energy_current_impl<true>(o.site, o.grad, {}, kLambda, 0.0, p);
    const auto eb = energy_current_impl<false>(o.site, o.grad, {}, kLambda, 0.0, p);
    EXPECT_EQ(ea.total, eb.total);
    EXPECT_EQ(ea.potential_drift, Vec3{});
    EXPECT_EQ(ea.pressure_drift, Vec3{});
    const auto fa = momentum_flux_impl<true>(o.site, o.grad, {}, kLambda, p);
    const auto fb = momentum_flux_impl<false>(o.site, o.grad, {}, kLambda, p);
    EXPECT_EQ(fa.total, fb.total);
}

TEST(MomentumFlux, RestStateIsPurePressure) {
    const ModelParams p;
    const HydroSite s = make_hydro_site(20.0, {}, 300.0, 0.0, p);
    HydroGradients g;
    g.rho = {1e5, 0, 0};
    g.Theta = {0, 2e6, 0};
    const auto f = momentum_flux(s, g, {1e-9, 0, 0}, p.lambda(), p);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f.total[i][j], i == j ? s.P : 0.0);
}

TEST(MomentumFlux, ShearViscosityCoefficient) {
    // u = (sin y, 0, 0) with uniform rho and Theta: d_y Pi_yx = -(6 lambda/5) Theta^(1/2) f''(y).
    const ModelParams p;
    const double rho = 20.0, Theta = 300.0, lam = p.lambda(), y = 0.4, h = 1e-4;
    const auto Pi_yx = [&](double yy) {
        HydroGradients g;
        g.u[1][0] = std::cos(yy);
        const auto f = momentum_flux(make_hydro_site(rho, {std::sin(yy), 0, 0}, Theta, 0.0, p), g, {}, lam, p);
        return f.viscous[1][0];
    };
    const double div = (Pi_yx(y + h) - Pi_yx(y - h)) / (2 * h);
    const double expected = 1.2 * lam * std::sqrt(Theta) * (-std::sin(y));
    EXPECT_NEAR(div, expected, 1e-7 * std::abs(expected));
    // The transposed entry carries the weight 1 of the 3:1 structure.
    HydroGradients g;
    g.u[1][0] = 1.0;
    const auto f = momentum_flux(make_hydro_site(rho, {}, Theta, 0.0, p), g, {}, lam, p);
    EXPECT_DOUBLE_EQ(f.viscous[1][0], 3.0 * f.viscous[0][1]);
}

TEST(BodyForce, DefinitionOfForcePerMass) {
    const ModelParams p;
    HydroSite s;
    s.rho = 1.0;
    const double g = 981.0;
    const Vec3 f = body_force_density(s, {g * p.m, 0, 0}, p);
    EXPECT_DOUBLE_EQ(f[0], -g);
    EXPECT_EQ(body_force_density(s, {}, p), Vec3{});
}

TEST(Currents, RejectSubFloorAndColdSites) {
    const ModelParams p;
    HydroSite s = make_hydro_site(0.0, {}, 300.0, 0.0, p);
    EXPECT_THROW(mass_current(s, {}, {}, p.lambda(), p), DomainError);
    s = make_hydro_site(10.0, {}, 0.0, 0.0, p);
    EXPECT_THROW(momentum_flux(s, {}, {}, p.lambda(), p), DomainError);
    EXPECT_THROW(energy_current(s, {}, {}, p.lambda(), 0.0, p), DomainError);
}
