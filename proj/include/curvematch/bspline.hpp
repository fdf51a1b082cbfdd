#pragma once

#include <cmath>

namespace curvematch {

/// Cardinal cubic B-spline in grid units. Support |r| < 2, partition of
/// unity over integer shifts, C^2 continuous.
inline double bspline_weight(double r) {
    const double a = std::abs(r);
    if (a >= 2.0) return 0.0;
    if (a <= 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
    const double t = 2.0 - a;
    return t * t * t / 6.0;
}

/// Exact derivative of bspline_weight with respect to r.
inline double bspline_weight_deriv(double r) {
    const double a = std::abs(r);
    if (a >= 2.0) return 0.0;
    double d;
    if (a <= 1.0) {
        d = -2.0 * a + 1.5 * a * a;
    } else {
        const double t = 2.0 - a;
        d = -0.5 * t * t;
    }
    return r < 0.0 ? -d : d;
}

/// Second derivative of bspline_weight (piecewise linear, continuous).
inline double bspline_weight_second_deriv(double r) {
    const double a = std::abs(r);
    if (a >= 2.0) return 0.0;
    if (a <= 1.0) return -2.0 + 3.0 * a;
    return 2.0 - a;
}

} // namespace curvematch
