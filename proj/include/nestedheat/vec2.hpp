#pragma once

#include <cmath>

namespace nh {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

inline double dist(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// 2x2 real matrix, used for the common isometry part of the similitudes.
struct Mat2 {
    double a = 1.0, b = 0.0;   // row 1
    double c = 0.0, d = 1.0;   // row 2

    Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 mul(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    double det() const { return a * d - b * c; }
    Mat2 transpose() const { return {a, c, b, d}; }

    static Mat2 rotation(double angle) {
        const double ca = std::cos(angle), sa = std::sin(angle);
        return {ca, -sa, sa, ca};
    }
    static Mat2 reflection_x() { return {1.0, 0.0, 0.0, -1.0}; }
    static Mat2 identity() { return {}; }
};

// Rotate p by `angle` about `center`.
inline Vec2 rotate_about(const Vec2& p, const Vec2& center, double angle) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const Vec2 d = p - center;
    return {center.x + ca * d.x - sa * d.y, center.y + sa * d.x + ca * d.y};
}

}  // namespace nh
