#pragma once
/// @file units.hpp
/// @brief Quantities with unit suffixes, converted to c.g.s.
///
/// A quantity is "<number> <unit expression>", e.g. "2.5e-14 s", "300 K",
/// "1.380649e-16 erg/K", "6.6e-19 g*cm/s", "1e-3 erg/cm^2". Unit expressions
/// are products and quotients of named units with optional integer powers.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace kinhydro::units {

/// Exponents of (g, cm, s, K).
using Dim = std::array<int, 4>;

inline constexpr Dim dimensionless{0, 0, 0, 0};
inline constexpr Dim mass{1, 0, 0, 0};
inline constexpr Dim length{0, 1, 0, 0};
inline constexpr Dim time{0, 0, 1, 0};
inline constexpr Dim temperature{0, 0, 0, 1};
inline constexpr Dim energy{1, 2, -2, 0};
inline constexpr Dim momentum{1, 1, -1, 0};
inline constexpr Dim velocity{0, 1, -1, 0};
inline constexpr Dim density{1, -3, 0, 0};
inline constexpr Dim force{1, 1, -2, 0};             ///< energy per length
inline constexpr Dim stiffness{1, 0, -2, 0};         ///< energy per length squared
inline constexpr Dim heat_capacity{1, 2, -2, -1};    ///< energy per kelvin

struct Quantity {
    double value = 0.0;  ///< in c.g.s.
    Dim dim{};
};

namespace detail {

struct NamedUnit {
    std::string_view name;
    double scale;
    Dim dim;
};

inline constexpr NamedUnit table[] = {
    {"g", 1.0, mass},           {"kg", 1e3, mass},         {"mg", 1e-3, mass},
    {"amu", 1.66053906660e-24, mass},
    {"cm", 1.0, length},        {"m", 1e2, length},        {"mm", 1e-1, length},
    {"um", 1e-4, length},       {"nm", 1e-7, length},      {"A", 1e-8, length},
    {"s", 1.0, time},           {"ms", 1e-3, time},        {"us", 1e-6, time},
    {"ns", 1e-9, time},         {"ps", 1e-12, time},       {"fs", 1e-15, time},
    {"K", 1.0, temperature},
    {"erg", 1.0, energy},       {"J", 1e7, energy},        {"eV", 1.602176634e-12, energy},
    {"dyn", 1.0, force},
};

inline std::optional<NamedUnit> lookup(std::string_view name) {
    for (const auto& u : table)
        if (u.name == name) return u;
    return std::nullopt;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Scale and dimension of a unit expression; nullopt if it does not parse.
inline std::optional<Quantity> parse_unit(std::string_view expr) {
    expr = detail::trim(expr);
    Quantity q{1.0, dimensionless};
    if (expr.empty() || expr == "1") return q;
    int sign = +1;
    while (!expr.empty()) {
        const std::size_t cut = expr.find_first_of("*/");
        std::string_view token = detail::trim(expr.substr(0, cut));
        int power = 1;
        if (const auto caret = token.find('^'); caret != std::string_view::npos) {
            const auto digits = detail::trim(token.substr(caret + 1));
            const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), power);
            if (ec != std::errc{} || end != digits.data() + digits.size()) return std::nullopt;
            token = detail::trim(token.substr(0, caret));
        }
        const auto u = detail::lookup(token);
        if (!u) return std::nullopt;
        q.value *= std::pow(u->scale, sign * power);
        for (std::size_t i = 0; i < 4; ++i) q.dim[i] += sign * power * u->dim[i];
        if (cut == std::string_view::npos) break;
        sign = expr[cut] == '/' ? -1 : +1;
        expr = expr.substr(cut + 1);
        if (detail::trim(expr).empty()) return std::nullopt;
    }
    return q;
}

/// Parses "<number> [unit]". A bare number is dimensionless.
inline std::optional<Quantity> parse_quantity(std::string_view text) {
    text = detail::trim(text);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || !std::isfinite(v)) return std::nullopt;
    const auto u = parse_unit(text.substr(static_cast<std::size_t>(end - text.data())));
    if (!u) return std::nullopt;
    return Quantity{v * u->value, u->dim};
}

inline std::string dim_name(const Dim& d) {
    static constexpr const char* base[] = {"g", "cm", "s", "K"};
    std::string out;
    for (std::size_t i = 0; i < 4; ++i) {
        if (d[i] == 0) continue;
        if (!out.empty()) out += "*";
        out += base[i];
        if (d[i] != 1) out += "^" + std::to_string(d[i]);
    }
    return out.empty() ? "dimensionless" : out;
}

}  // namespace kinhydro::units
