#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace kinhydro {

/// Small fixed 3-vector used for momenta, velocities and gradients.
struct Vec3 {
    std::array<double, 3> v{0.0, 0.0, 0.0};

    constexpr Vec3() = default;
    constexpr Vec3(double x, double y, double z) : v{x, y, z} {}

    constexpr double& operator[](std::size_t i) { return v[i]; }
    constexpr double operator[](std::size_t i) const { return v[i]; }

    constexpr Vec3& operator+=(const Vec3& o) {
        for (std::size_t i = 0; i < 3; ++i) v[i] += o.v[i];
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        for (std::size_t i = 0; i < 3; ++i) v[i] -= o.v[i];
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        for (auto& x : v) x *= s;
        return *this;
    }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
    friend constexpr Vec3 operator-(Vec3 a) { return a *= -1.0; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Row-major 3x3 tensor, `t[i][j]` is row i column j.
using Tensor3 = std::array<std::array<double, 3>, 3>;

}  // namespace kinhydro
