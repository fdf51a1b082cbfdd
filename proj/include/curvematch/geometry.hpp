#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace curvematch {

/// 2-vector with value semantics. Used for positions, momenta and
/// mesh vector samples alike.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Vec2& a) { return dot(a, a); }
inline double norm_inf(const Vec2& a) { return std::max(std::abs(a.x), std::abs(a.y)); }

/// Rotate by -90 degrees: (x, y) -> (y, -x).
constexpr Vec2 rotate_cw(const Vec2& a) { return {a.y, -a.x}; }

/// 2x2 matrix, row-major: (M v)_i = sum_j M_ij v_j.
struct Mat2 {
    double xx = 0.0, xy = 0.0;
    double yx = 0.0, yy = 0.0;

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    constexpr Mat2& operator+=(const Mat2& o) {
        xx += o.xx; xy += o.xy; yx += o.yx; yy += o.yy;
        return *this;
    }
    constexpr Mat2& operator*=(double s) {
        xx *= s; xy *= s; yx *= s; yy *= s;
        return *this;
    }
};

constexpr Mat2 operator+(Mat2 a, const Mat2& b) { return a += b; }
constexpr Mat2 operator*(double s, Mat2 a) { return a *= s; }
constexpr Mat2 operator-(Mat2 a, const Mat2& b) { return a += -1.0 * b; }

constexpr Vec2 apply(const Mat2& m, const Vec2& v) {
    return {m.xx * v.x + m.xy * v.y, m.yx * v.x + m.yy * v.y};
}

/// Transpose-apply: returns M^T v.
constexpr Vec2 apply_transpose(const Mat2& m, const Vec2& v) {
    return {m.xx * v.x + m.yx * v.y, m.xy * v.x + m.yy * v.y};
}

constexpr Mat2 matmul(const Mat2& a, const Mat2& b) {
    return {a.xx * b.xx + a.xy * b.yx, a.xx * b.xy + a.xy * b.yy,
            a.yx * b.xx + a.yy * b.yx, a.yx * b.xy + a.yy * b.yy};
}

constexpr double det(const Mat2& m) { return m.xx * m.yy - m.xy * m.yx; }

/// Solve M z = v for z. Caller must check det(M) != 0.
constexpr Vec2 solve(const Mat2& m, const Vec2& v) {
    const double d = det(m);
    return {(m.yy * v.x - m.xy * v.y) / d, (m.xx * v.y - m.yx * v.x) / d};
}

inline double norm_inf(const Mat2& m) {
    return std::max(std::max(std::abs(m.xx), std::abs(m.xy)),
                    std::max(std::abs(m.yx), std::abs(m.yy)));
}

using PointList = std::vector<Vec2>;
using VectorList = std::vector<Vec2>;

/// Wrap a coordinate into [0, length).
inline double wrap_periodic(double x, double length) {
    double r = std::fmod(x, length);
    if (r < 0.0) r += length;
    if (r >= length) r = 0.0;  // fmod can round up to length
    return r;
}

} // namespace curvematch
