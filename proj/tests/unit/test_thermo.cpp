#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <gtest/gtest.h>

#include "kinhydro/rng.hpp"
#include "kinhydro/thermo.hpp"

using namespace kinhydro;

namespace {

ModelParams unit_params() {
    ModelParams p;
    p.m = 1.0;
    p.a = 1.0;
    p.eps = 1.0;
    p.k_B = 1.0;
    p.Theta0 = 1.0;
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Random valid argon state: N in (0.01, 0.9), Theta in (30, 3000) K, |u| below the sound speed.
MixtureSite random_state(CounterRng& rng, const ModelParams& p, double phi) {
    const double N = 0.01 + 0.89 * rng.uniform();
    const double Theta = 30.0 * std::pow(100.0, rng.uniform());
    const double c = std::sqrt(p.k_B * Theta / p.m);
    const Vec3 u{0.3 * c * (2 * rng.uniform() - 1), 0.3 * c * (2 * rng.uniform() - 1),
                 0.3 * c * (2 * rng.uniform() - 1)};
    return mixture_from_fields(N, Theta, u, phi, p);
}

}  // namespace

TEST(PartitionSingleAxis, ZeroZetaClosedForm) {
    const ModelParams p;
    const double beta = 1.0 / (p.k_B * 300.0);
    EXPECT_LE(rel(partition_single_axis(beta, 0.0, p),
                  std::sqrt(2.0 * p.m * std::numbers::pi / beta) / p.eps), 1e-14);
}

TEST(PartitionSingleAxis, DoublingBetaScalesByInverseRootTwo) {
    const ModelParams p;
    const double beta = 2.4e13;
    EXPECT_NEAR(partition_single_axis(2 * beta, 0.0, p) / partition_single_axis(beta, 0.0, p),
                1.0 / std::sqrt(2.0), 1e-15);
}

TEST(PartitionSingleAxis, MatchesQuadratureOfDefiningIntegral) {
    const auto p = unit_params();
    boost::math::quadrature::sinh_sinh<double> integrator;
    const double q = integrator.integrate([](double k) { return std::exp(-0.5 * k * k - 0.1 * k); });
    EXPECT_LE(rel(partition_single_axis(1.0, 0.1, p), q), 1e-10);
}

TEST(PartitionSingleAxis, RejectsNonpositiveBeta) {
    const ModelParams p;
    EXPECT_THROW(partition_single_axis(0.0, 0.0, p), DomainError);
    EXPECT_THROW(partition_single_axis(-1.0, 0.0, p), DomainError);
}

TEST(GrandPartition, EmptySiteLimit) {
    const auto p = unit_params();
    EXPECT_DOUBLE_EQ(grand_partition(800.0, 1.0, {}, 0.0, p), 1.0);
}

TEST(GrandPartition, ProductOfAxisFunctions) {
    const ModelParams p;
    const double beta = 1.0 / (p.k_B * 300.0), xi = 30.0;
    const double z = std::sqrt(2.0 * p.m * std::numbers::pi / beta) / p.eps;
    EXPECT_LE(rel(grand_partition(xi, beta, {}, 0.0, p), 1.0 + std::exp(-xi) * z * z * z), 1e-13);
}

TEST(GrandPartition, PotentialShiftEqualsFugacityShift) {
    const auto p = unit_params();
    const double beta = 0.7, dphi = 0.3;
    EXPECT_NEAR(grand_partition(1.0, beta, {0.1, 0, 0}, dphi, p),
                grand_partition(1.0 + beta * dphi, beta, {0.1, 0, 0}, 0.0, p), 1e-14);
}

TEST(GrandPartition, OverflowCarriesDiagnostic) {
    const auto p = unit_params();
    try {
        grand_partition(-1000.0, 1.0, {}, 0.0, p);
        FAIL() << "expected overflow";
    } catch (const OverflowError& e) {
        EXPECT_GT(e.log_value(), 700.0);
    }
    EXPECT_NO_THROW(log_grand_partition(-1000.0, 1.0, {}, 0.0, p));
}

TEST(CanonicalToMixture, ZeroZetaGivesZeroMomentum) {
    const ModelParams p;
    const auto s = canonical_to_mixture({20.0, 2.4e13, {}, false}, 0.0, p);
    EXPECT_EQ(s.w, Vec3{});
}

TEST(CanonicalToMixture, EnergyDecomposition) {
    const ModelParams p;
    CounterRng rng(7, 0);
    for (int i = 0; i < 200; ++i) {
        const double phi = 1e-14 * rng.uniform();
        const auto c = mixture_to_canonical(random_state(rng, p, phi), phi, p);
        const auto s = canonical_to_mixture(c, phi, p);
        const Vec3 u = s.w / (p.m * s.N);
        const double thermal = s.E - s.N * phi - 0.5 * s.N * p.m * dot(u, u);
        EXPECT_LE(rel(thermal, 1.5 * s.N * p.k_B * temperature(c, p)), 1e-12);
    }
}

TEST(CanonicalToMixture, FiniteDifferenceOfLogXiGivesOccupation) {
    const auto p = unit_params();
    const double h = 1e-5;
    const double fd = (log_grand_partition(1.0 + h, 1.0, {}, 0.0, p) -
                       log_grand_partition(1.0 - h, 1.0, {}, 0.0, p)) / (2 * h);
    EXPECT_LE(rel(-fd, canonical_to_mixture({1.0, 1.0, {}, false}, 0.0, p).N), 1e-8);
}

TEST(MixtureToCanonical, RestStateHasZeroZeta) {
    const ModelParams p;
    const double Theta = 300.0, phi = 2e-15, N = 0.2;
    const auto c = mixture_to_canonical({N, N * (phi + 1.5 * p.k_B * Theta), {}}, phi, p);
    EXPECT_EQ(c.zeta, Vec3{});
    EXPECT_LE(rel(c.beta, 1.0 / (p.k_B * Theta)), 1e-14);
}

TEST(MixtureToCanonical, ZetaIsMinusBetaU) {
    const ModelParams p;
    const auto s = mixture_from_fields(0.1, 300.0, {10.0, 0, 0}, 0.0, p);
    const auto c = mixture_to_canonical(s, 0.0, p);
    EXPECT_LE(rel(c.zeta[0], -10.0 / (p.k_B * 300.0)), 1e-12);
}

TEST(MixtureToCanonical, RoundTripOnRandomStates) {
    const ModelParams p;
    CounterRng rng(11, 0);
    for (int i = 0; i < 2000; ++i) {
        const double phi = 1e-14 * (2 * rng.uniform() - 1);
        const auto s = random_state(rng, p, phi);
        const auto back = canonical_to_mixture(mixture_to_canonical(s, phi, p), phi, p);
        EXPECT_LE(rel(back.N, s.N), 1e-10);
        EXPECT_LE(rel(back.E, s.E), 1e-10);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(std::abs(back.w[k] - s.w[k]), 1e-10 * norm(s.w));
    }
}

TEST(MixtureToCanonical, VacuumAndErrors) {
    const ModelParams p;
    EXPECT_TRUE(mixture_to_canonical({}, 0.0, p).vacuum);
    EXPECT_EQ(canonical_to_mixture(CanonicalSite::vacuum_site(), 0.0, p), MixtureSite{});
    EXPECT_THROW(mixture_to_canonical({0.1, -1.0, {}}, 0.0, p), UnphysicalStateError);
    EXPECT_THROW(mixture_to_canonical({-0.1, 1.0, {}}, 0.0, p), DomainError);
    EXPECT_THROW(mixture_to_canonical({1.0, 1.0, {}}, 0.0, p), UnphysicalStateError);
}

TEST(Entropy, EmptySiteContributesNothing) {
    const auto p = unit_params();
    const CanonicalSite c{60.0, 1.0, {}, false};
    const ThermalSite s{c, canonical_to_mixture(c, 0.0, p)};
    EXPECT_NEAR(site_entropy_nats(s, 0.0, p), 0.0, 1e-20);
}

TEST(Entropy, MatchesBruteForceSummation) {
    // Fine eps grid: sums over (eps Z)^3 agree with the integral approximation.
    auto p = unit_params();
    p.eps = 0.02;
    const CanonicalSite c{-3.0, 1.3, {0.2, -0.1, 0.05}, false};
    const double phi = 0.4;
    const ThermalSite s{c, canonical_to_mixture(c, phi, p)};
    const double log_xi = log_grand_partition(c.xi, c.beta, c.zeta, phi, p);
    // The occupied weight factorises over axes, so -sum p log p splits into 1D sums.
    double S = 0.0;
    const double p_hole = std::exp(-log_xi);
    S -= p_hole * std::log(p_hole);
    double occupied_total = 0.0;
    std::vector<std::vector<double>> axis(3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (int j = -2000; j <= 2000; ++j) {
            const double k = j * p.eps;
            axis[i].push_back(-c.beta * k * k / (2 * p.m) - c.zeta[i] * k);
        }
    }
    // log p(k) = -xi - beta Phi - log Xi + sum_i axis_i(k_i)
    double sum_w[3] = {0, 0, 0}, sum_wl[3] = {0, 0, 0};
    for (std::size_t i = 0; i < 3; ++i)
        for (double l : axis[i]) {
            sum_w[i] += std::exp(l);
            sum_wl[i] += std::exp(l) * l;
        }
    const double base = -c.xi - c.beta * phi - log_xi;
    const double W = sum_w[0] * sum_w[1] * sum_w[2];
    occupied_total = std::exp(base) * W;
    double mean_log = base * occupied_total;
    for (std::size_t i = 0; i < 3; ++i)
        mean_log += std::exp(base) * W / sum_w[i] * sum_wl[i];
    S -= mean_log;
    EXPECT_NEAR(p_hole + occupied_total, 1.0, 1e-10);
    EXPECT_LE(rel(site_entropy_nats(s, phi, p), S), 1e-6);
    const std::vector<ThermalSite> field{s, s};
    const std::vector<double> phis{phi, phi};
    EXPECT_LE(rel(entropy(field, phis, p), 2 * p.k_B * S), 1e-6);
}

TEST(Pressure, BothFormsVanishWithOccupation) {
    const ModelParams p;
    const auto pr = pressure({0.0, 0.0, {}}, 300.0, 1.0, p);
    EXPECT_EQ(pr.from_log_xi, 0.0);
    EXPECT_EQ(pr.ideal, 0.0);
}

TEST(Pressure, FormsAgreeToFirstOrderInN) {
    const ModelParams p;
    const double Theta = 300.0;
    for (double N : {0.01, 0.02, 0.04}) {
        const auto s = mixture_from_fields(N, Theta, {}, 0.0, p);
        const auto c = mixture_to_canonical(s, 0.0, p);
        const double Xi = grand_partition(c.xi, c.beta, c.zeta, 0.0, p);
        const auto pr = pressure(s, Theta, Xi, p);
        const double d = std::abs(pr.from_log_xi - pr.ideal) / pr.ideal;
        // log Xi = -log(1-N) = N + N^2/2 + ..., so the relative gap is N/2 + O(N^2).
        EXPECT_NEAR(d, N / 2, N * N);
    }
}

TEST(HydroSite, PerfectGasClosure) {
    const ModelParams p;
    const auto h = make_hydro_site(0.3, {1, 2, 3}, 250.0, 1e-15, p);
    EXPECT_DOUBLE_EQ(h.P, h.rho * p.k_B * h.Theta / p.m);
    EXPECT_DOUBLE_EQ(h.e, 1e-15 / p.m + 1.5 * p.k_B * 250.0 / p.m);
}

TEST(ModelParams, DerivedConstants) {
    const ModelParams p;
    EXPECT_GT(p.sound_speed(), 0.0);
    EXPECT_NEAR(p.lambda(), std::sqrt(p.m * p.k_B / (2 * std::numbers::pi)) / (p.a * p.a),
                1e-12 * p.lambda());
    ModelParams bad;
    bad.eps = 0.0;
    EXPECT_THROW(bad.validate(), DomainError);
}

TEST(MeanFreePath, NearestIntegerRule) {
    const ModelParams p;
    EXPECT_DOUBLE_EQ(mean_free_path(p.rho_max(), p), p.a);
    EXPECT_DOUBLE_EQ(mean_free_path(p.rho_max() / 10, p), 10 * p.a);
    EXPECT_DOUBLE_EQ(mean_free_path(p.rho_max() / 10.4, p), 10 * p.a);
    EXPECT_DOUBLE_EQ(mean_free_path(p.rho_max() * 5, p), p.a);
}
