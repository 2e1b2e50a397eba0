#pragma once

#include <cmath>

namespace ctwin::rt {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    bool operator==(const Vec3 &) const = default;

    double dot(const Vec3 &o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3 &o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
    }
};

inline Vec3 operator*(double s, const Vec3 &v) { return v * s; }

inline double distance(const Vec3 &a, const Vec3 &b) { return (a - b).norm(); }

/// Mirror of point p across the plane through `origin` with unit normal `n`.
inline Vec3 mirror_point(const Vec3 &p, const Vec3 &origin, const Vec3 &n) {
    return p - 2.0 * (p - origin).dot(n) * n;
}

/// Specular reflection of direction d at unit normal n.
inline Vec3 reflect_dir(const Vec3 &d, const Vec3 &n) { return d - 2.0 * d.dot(n) * n; }

/// Distance from point p to the segment [a, b], plus the parameter s in [0,1]
/// of the closest point.
inline double point_segment_distance(const Vec3 &p, const Vec3 &a, const Vec3 &b, double &s_out) {
    const Vec3 ab = b - a;
    const double len2 = ab.norm2();
    double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    s = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
    s_out = s;
    return (p - (a + s * ab)).norm();
}

} // namespace ctwin::rt
