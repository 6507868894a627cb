#pragma once
/// @file moments.hpp
/// @brief Truncated Gaussian moments M_n(zeta) = int_lower^inf k^n exp(-beta k^2/2m - zeta k) dk,
/// their low-order expansions, and the remainder integrals B1..B8 that bound
/// the error of those expansions in the continuum limit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kinhydro/errors.hpp"

namespace kinhydro {

struct MomentSpec {
    int n = 0;
    double beta = 1.0;
    double zeta = 0.0;
    double m = 1.0;
    double lower = 0.0;  ///< may be -infinity
};

namespace detail {

inline void validate_moment_spec(const MomentSpec& s) {
    if (s.n < 0 || s.n > 3) throw DomainError("moment order must be in {0,1,2,3}");
    if (!(s.beta > 0.0) || !std::isfinite(s.beta)) throw DomainError("moment: beta must be positive");
    if (!(s.m > 0.0)) throw DomainError("moment: m must be positive");
    if (std::isnan(s.lower) || s.lower == std::numeric_limits<double>::infinity())
        throw DomainError("moment: lower limit must be finite or -inf");
}

/// Scaled complementary error function exp(x^2) erfc(x).
inline double erfcx(double x) {
    if (x < 0.0) {
        if (x < -26.0) throw OverflowError("erfcx argument too negative", x * x);
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x < 5.0) return std::exp(x * x) * std::erfc(x);
    // Continued fraction 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz.
    const double tiny = 1e-300;
    double f = x, c = x, d = 0.0;
    for (int j = 1; j < 500; ++j) {
        const double aj = 0.5 * j;
        d = x + aj * d;
        if (d == 0.0) d = tiny;
        c = x + aj / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 / (f * std::sqrt(std::numbers::pi));
}

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

/// Adaptive Gauss-Kronrod over consecutive breakpoints.
inline QuadResult integrate_pieces(const std::function<double(double)>& f,
                                   const std::vector<double>& pts, double tol = 1e-13) {
    QuadResult r;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!(pts[i + 1] > pts[i])) continue;
        double err = 0.0, l1 = 0.0;
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, pts[i], pts[i + 1], 12, tol, &err, &l1);
        if (!std::isfinite(v)) throw NumericError("quadrature produced a non-finite value");
        r.value += v;
        r.error += err;
    }
    return r;
}

/// Breakpoints lower, lower+x0, lower+10 x0, ... clipped to [lower, upper].
/// Resolves features of width x0 near the lower end.
inline std::vector<double> geometric_breaks(double lower, double upper, double x0) {
    std::vector<double> pts{lower};
    if (x0 > 0.0) {
        for (double s = x0; lower + s < upper; s *= 10.0) pts.push_back(lower + s);
    }
    pts.push_back(upper);
    return pts;
}

/// int_lower^inf f with f sub-Gaussian of width `scale`; the analytic tail
/// |f(U)| * scale beyond U = lower + 40 scale is added to the error estimate.
inline QuadResult integrate_half_line(const std::function<double(double)>& f, double lower,
                                      double scale, double feature = 0.0, double tol = 1e-11) {
    const double upper = lower + 40.0 * scale;
    QuadResult r = integrate_pieces(f, geometric_breaks(lower, upper, feature), tol);
    r.error += std::abs(f(upper)) * scale;
    return r;
}

/// e^{b c^2} J_j(T) for j = 0..3, with J_j(T) = int_T^inf t^j e^{-b t^2} dt and
/// G = e^{b c^2 - b T^2}. T = -inf selects the full line.
inline std::array<double, 4> shifted_gaussian_tails(double b, double c, double T) {
    std::array<double, 4> J{};
    const double sqb = std::sqrt(b);
    const double half_root = 0.5 * std::sqrt(std::numbers::pi / b);
    if (std::isinf(T)) {
        const double eb = std::exp(b * c * c);
        J[0] = 2.0 * half_root * eb;
        J[1] = 0.0;
        J[2] = J[0] / (2.0 * b);
        J[3] = 0.0;
        return J;
    }
    const double G = std::exp(b * c * c - b * T * T);
    const double x = sqb * T;
    J[0] = x >= 0.0 ? half_root * G * erfcx(x)
                    : half_root * std::exp(b * c * c) * (2.0 - std::erfc(-x));
    J[1] = G / (2.0 * b);
    J[2] = T * G / (2.0 * b) + J[0] / (2.0 * b);
    J[3] = (T * T + 1.0 / b) * G / (2.0 * b);
    return J;
}

}  // namespace detail

/// Low-order expansions at lower = 0: M0, M1 to zeroth order, M2 to first order in zeta.
inline double moment_closed(const MomentSpec& s) {
    detail::validate_moment_spec(s);
    if (s.lower != 0.0) throw DomainError("moment_closed requires lower = 0");
    const double t = s.m / s.beta;
    switch (s.n) {
        case 0: return std::sqrt(std::numbers::pi * t / 2.0);
        case 1: return t;
        case 2: return std::sqrt(std::numbers::pi / 2.0) * std::pow(t, 1.5) - 2.0 * t * t * s.zeta;
        default: throw DomainError("moment_closed has no expansion for n = " + std::to_string(s.n));
    }
}

/// Quadrature evaluation of the defining integral.
inline double moment_quadrature(const MomentSpec& s) {
    detail::validate_moment_spec(s);
    const double scale = std::sqrt(s.m / s.beta);
    const auto f = [&](double k) {
        return std::pow(k, s.n) * std::exp(-s.beta * k * k / (2.0 * s.m) - s.zeta * k);
    };
    // Integrand peaks near k = -m zeta / beta; start far enough left for lower = -inf.
    const double peak = -s.m * s.zeta / s.beta;
    const double lo = std::isinf(s.lower) ? peak - 40.0 * scale : s.lower;
    const double hi = std::max(lo, peak) + 40.0 * scale;
    std::vector<double> pts{lo};
    if (peak > lo && peak < hi) pts.push_back(peak);
    pts.push_back(hi);
    const auto r = detail::integrate_pieces(f, pts, 1e-14);
    const double ref = std::max(std::abs(r.value), 1e-300);
    if (r.error > 1e-10 * ref + 1e-300)
        throw NumericError("moment quadrature did not converge: error estimate " +
                           std::to_string(r.error) + " for value " + std::to_string(r.value));
    return r.value;
}

/// Exact value through the erfc closed form; falls back to quadrature when the
/// binomial expansion loses digits (|zeta| far outside the thermal range).
inline double moment_exact(const MomentSpec& s) {
    detail::validate_moment_spec(s);
    const double b = s.beta / (2.0 * s.m);
    const double c = s.zeta / (2.0 * b);
    if (std::sqrt(b) * std::abs(c) > 4.0) return moment_quadrature(s);
    const double T = std::isinf(s.lower) ? s.lower : s.lower + c;
    const auto J = detail::shifted_gaussian_tails(b, c, T);
    static constexpr int binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    double sum = 0.0;
    for (int j = 0; j <= s.n; ++j)
        sum += binom[s.n][j] * std::pow(-c, s.n - j) * J[static_cast<std::size_t>(j)];
    return sum;
}

// ---------------------------------------------------------------------------
// Remainder integrals

enum class BoundKind { B1 = 1, B2, B3, B4, B5, B6, B7, B8 };

inline const char* to_string(BoundKind k) {
    static constexpr const char* names[] = {"B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8"};
    return names[static_cast<int>(k) - 1];
}

/// Parameters of one remainder integral. kappa is derived, kappa^2 = 2 ell m dPhi.
struct BoundCase {
    BoundKind which = BoundKind::B1;
    double ell = 1.0;
    double m = 1.0;
    double beta = 1.0;
    double zeta = 0.0;
    double grad_phi = 0.0;       ///< forward-difference dPhi along the hop axis
    double phi_arrival = 0.0;    ///< Phi(x') for B3, B4
    double phi_departure = 0.0;  ///< Phi(x) for B5
    double N_over_Zeps = 1.0;    ///< prefactor N_x / (Z_x^i eps)
    double kappa = 0.0;

    static BoundCase make(BoundKind which, double ell, double m, double beta, double zeta,
                          double grad_phi, double phi_arrival = 0.0, double phi_departure = 0.0,
                          double N_over_Zeps = 1.0) {
        if (!(ell > 0.0)) throw DomainError("bound case: ell must be positive");
        if (!(m > 0.0) || !(beta > 0.0)) throw DomainError("bound case: m and beta must be positive");
        if (grad_phi < 0.0) throw DomainError("bound case: dPhi must be nonnegative");
        BoundCase c;
        c.which = which;
        c.ell = ell;
        c.m = m;
        c.beta = beta;
        c.zeta = zeta;
        c.grad_phi = grad_phi;
        c.phi_arrival = phi_arrival;
        c.phi_departure = phi_departure;
        c.N_over_Zeps = N_over_Zeps;
        c.kappa = std::sqrt(2.0 * ell * m * grad_phi);
        return c;
    }
};

namespace detail {

inline double bound_weight(const BoundCase& c, double k, double zeta) {
    return std::exp(-c.beta * k * k / (2.0 * c.m) - zeta * k);
}

/// (sqrt(k^2 + kappa^2) - |k|) / 2m without cancellation.
inline double threshold_gap(double k, double kappa, double m) {
    const double ak = std::abs(k);
    return kappa * kappa / (2.0 * m * (ak + std::hypot(k, kappa)));
}

inline double bound_quad(const BoundCase& c, const std::function<double(double)>& f) {
    const double scale = std::sqrt(c.m / c.beta);
    return integrate_half_line(f, 0.0, scale, c.kappa).value;
}

}  // namespace detail

/// Numeric value of the named remainder integral.
inline double bound_value(const BoundCase& c) {
    if (c.kappa == 0.0) return 0.0;
    const double P = c.N_over_Zeps;
    const double m = c.m;
    const double T23 = 1.0 / c.beta;  // transverse kinetic energy, zero transverse zeta
    using detail::bound_weight;
    using detail::threshold_gap;
    switch (c.which) {
        case BoundKind::B1:
        case BoundKind::B2: {
            const double z = c.which == BoundKind::B1 ? c.zeta : -c.zeta;
            return P * detail::bound_quad(c, [&](double k) {
                return threshold_gap(k, c.kappa, m) * bound_weight(c, k, z);
            });
        }
        case BoundKind::B3:
            return P * detail::bound_quad(c, [&](double k) {
                return threshold_gap(k, c.kappa, m) *
                       (k * k / (2.0 * m) + T23 + c.phi_arrival) * bound_weight(c, k, c.zeta);
            });
        case BoundKind::B4: {
            const double M0 = moment_exact({0, c.beta, c.zeta, m, 0.0});
            const double M2 = moment_exact({2, c.beta, c.zeta, m, 0.0});
            return P * c.kappa * c.kappa / (2.0 * m) *
                   (M2 / (2.0 * m) + (T23 + c.phi_arrival) * M0);
        }
        case BoundKind::B5:
            // Negative-k half line, mirrored onto k >= 0.
            return P * detail::bound_quad(c, [&](double k) {
                return threshold_gap(k, c.kappa, m) *
                       (k * k / (2.0 * m) + T23 + c.phi_departure) * bound_weight(c, k, -c.zeta);
            });
        case BoundKind::B6: {
            // Residual of the limit N dPhi, bounded by the two error sources:
            // moving the lower limit from kappa to 0, and M0 to zeroth order in zeta.
            const double M0p = moment_exact({0, c.beta, c.zeta, m, 0.0});
            const double M0m = moment_exact({0, c.beta, -c.zeta, m, 0.0});
            const double tail = moment_exact({0, c.beta, c.zeta, m, c.kappa});
            const double M0z = std::sqrt(std::numbers::pi * m / (2.0 * c.beta));
            return P * c.grad_phi * (std::abs(M0p - tail) + std::abs(M0p + M0m - 2.0 * M0z));
        }
        case BoundKind::B7:
        case BoundKind::B8: {
            const double z = c.which == BoundKind::B7 ? c.zeta : -c.zeta;
            return std::abs(P * detail::bound_quad(c, [&](double k) {
                return threshold_gap(k, c.kappa, m) * k * bound_weight(c, k, z);
            }));
        }
    }
    throw DomainError("unknown bound kind");
}

/// C = int_1^inf exp(-y^2/2) / y dy, computed once.
inline double b1_log_constant() {
    static const double value = [] {
        const auto f = [](double y) { return std::exp(-0.5 * y * y) / y; };
        return detail::integrate_pieces(f, {1.0, 2.0, 5.0, 40.0}, 1e-15).value;
    }();
    return value;
}

/// Explicit majorant of B1 with the logarithmic term; valid for zeta >= 0
/// and kappa (beta/m)^(1/2) < 1.
inline double b1_majorant(const BoundCase& c) {
    if (c.zeta < 0.0) throw DomainError("majorant requires zeta >= 0");
    const double k2 = c.kappa * c.kappa;
    const double delta = std::sqrt(c.beta / c.m) * c.kappa;
    if (!(delta < 1.0)) throw DomainError("majorant requires kappa (beta/m)^(1/2) < 1");
    if (k2 == 0.0) return 0.0;
    return c.N_over_Zeps / (2.0 * c.m) * (k2 - k2 * std::log(delta) + k2 * b1_log_constant());
}

/// Path through parameter space along which ell -> 0.
/// The continuum path keeps ell c fixed, so m = k_B Theta0 ell^2 / (ell c)^2.
struct ScalingPath {
    bool continuum = true;
    double ell_c = 1.0;
    double kT0 = 1.0;      ///< k_B Theta0
    double m_fixed = 1.0;  ///< mass on the fixed-mass path
    double beta = 1.0;
    double zeta = 0.1;
    double grad_phi = 1.0;
    double phi_arrival = 1.0;
    double phi_departure = 1.0;
    double N_over_Zeps = 1.0;

    BoundCase at(BoundKind which, double ell) const {
        const double m = continuum ? kT0 * ell * ell / (ell_c * ell_c) : m_fixed;
        // zeta = -beta u with u a fixed fraction of the thermal speed.
        const double z = zeta * std::sqrt(beta / m);
        return BoundCase::make(which, ell, m, beta, z, grad_phi, phi_arrival, phi_departure,
                               N_over_Zeps);
    }
};

struct ScalingFit {
    double slope_power = 0.0;  ///< fit of log B = s log ell + c
    double rss_power = 0.0;
    double slope_log = 0.0;    ///< fit of log B - log log(1/ell) = s log ell + c
    double rss_log = 0.0;
    bool log_preferred = false;
    /// Slope of the preferred model.
    double slope() const { return log_preferred ? slope_log : slope_power; }
};

namespace detail {

inline std::pair<double, double> least_squares(const std::vector<double>& x,
                                               const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (!(std::abs(den) > 0.0)) throw NumericError("least squares: singular design");
    const double s = (n * sxy - sx * sy) / den;
    const double c = (sy - s * sx) / n;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - s * x[i] - c, 2);
    return {s, rss};
}

}  // namespace detail

/// Least-squares exponent of B(ell) with and without a log(1/ell) factor.
inline ScalingFit bound_scaling_fit(BoundKind which, const std::vector<double>& ell_grid,
                                    const ScalingPath& path = {}) {
    if (ell_grid.size() < 3) throw DomainError("scaling fit needs at least 3 grid points");
    const auto [lo, hi] = std::minmax_element(ell_grid.begin(), ell_grid.end());
    if (!(*lo > 0.0) || !(*hi < 1.0)) throw DomainError("scaling fit needs 0 < ell < 1");
    if (std::log10(*hi / *lo) < 3.0 - 1e-9) throw DomainError("scaling grid must span 3 decades");
    std::vector<double> x, y, ylog;
    for (double ell : ell_grid) {
        const double b = bound_value(path.at(which, ell));
        if (!(b > 0.0) || !std::isfinite(b))
            throw NumericError(std::string("nonpositive ") + to_string(which) + " on scaling grid");
        x.push_back(std::log(ell));
        y.push_back(std::log(b));
        ylog.push_back(std::log(b) - std::log(std::log(1.0 / ell)));
    }
    ScalingFit fit;
    std::tie(fit.slope_power, fit.rss_power) = detail::least_squares(x, y);
    std::tie(fit.slope_log, fit.rss_log) = detail::least_squares(x, ylog);
    fit.log_preferred = fit.rss_log < fit.rss_power;
    return fit;
}

/// Logarithmically spaced grid from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

}  // namespace kinhydro
