#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvematch/geometry.hpp"
#include "curvematch/mesh.hpp"

namespace curvematch {

/// Closed planar curve sampled by an ordered cyclic list of particles.
/// Index beta - 1 wraps to n_p - 1 at beta = 0. Generators produce
/// counterclockwise orientation; loaded curves may have either.
struct ParticleCurve {
    PointList points;

    size_t size() const { return points.size(); }
    const Vec2& operator[](size_t i) const { return points[i]; }
    Vec2& operator[](size_t i) { return points[i]; }
};

inline void validate_curve(const ParticleCurve& curve) {
    if (curve.size() < 3)
        throw std::invalid_argument("curve must have at least 3 particles, got " +
                                    std::to_string(curve.size()));
    for (size_t i = 0; i < curve.size(); ++i)
        if (!std::isfinite(curve[i].x) || !std::isfinite(curve[i].y))
            throw std::invalid_argument("curve has non-finite coordinate at particle " +
                                        std::to_string(i));
}

/// Cyclic backward differences dQ_beta = Q_beta - Q_{beta-1}. Sums to
/// zero around the loop.
using EdgeVectors = std::vector<Vec2>;

inline EdgeVectors edge_vectors(const ParticleCurve& curve) {
    validate_curve(curve);
    const size_t n = curve.size();
    EdgeVectors edges(n);
    for (size_t b = 0; b < n; ++b) edges[b] = curve[b] - curve[(b + n - 1) % n];
    return edges;
}

inline Vec2 centroid(const ParticleCurve& curve) {
    Vec2 c;
    for (const Vec2& p : curve.points) c += p;
    return (1.0 / static_cast<double>(curve.size())) * c;
}

/// Per-particle outward unit normal: the centered difference
/// Q_{beta+1} - Q_{beta-1} rotated by -90 degrees, normalized, and
/// flipped if it points toward the centroid.
inline VectorList outward_normals(const ParticleCurve& curve) {
    validate_curve(curve);
    const size_t n = curve.size();
    const Vec2 c = centroid(curve);
    VectorList normals(n);
    for (size_t b = 0; b < n; ++b) {
        const Vec2 tangent = curve[(b + 1) % n] - curve[(b + n - 1) % n];
        const double len = norm(tangent);
        if (len < 1e-12 * (1.0 + norm(curve[b])))
            throw std::runtime_error("degenerate centered difference at particle " +
                                     std::to_string(b));
        Vec2 nrm = (1.0 / len) * rotate_cw(tangent);
        if (dot(nrm, curve[b] - c) < 0.0) nrm = -nrm;
        normals[b] = nrm;
    }
    return normals;
}

enum class ShapeKind { Circle, Ellipse, RoundedRectangle };

/// Analytic shape parameters. Circle uses radius; ellipse uses the two
/// semi-axes; rounded rectangle uses full width/height and a corner radius.
struct ShapeParams {
    double radius = 1.0;
    double semi_axis_x = 1.0;
    double semi_axis_y = 1.0;
    double width = 2.0;
    double height = 1.0;
    double corner_radius = 0.2;
};

namespace detail {

inline ParticleCurve sample_circle(double r, int n_p, const Vec2& center) {
    ParticleCurve curve;
    curve.points.reserve(static_cast<size_t>(n_p));
    for (int i = 0; i < n_p; ++i) {
        const double th = 2.0 * M_PI * i / n_p;
        curve.points.push_back(center + Vec2{r * std::cos(th), r * std::sin(th)});
    }
    return curve;
}

inline ParticleCurve sample_ellipse(double a, double b, int n_p, const Vec2& center) {
    ParticleCurve curve;
    curve.points.reserve(static_cast<size_t>(n_p));
    for (int i = 0; i < n_p; ++i) {
        const double th = 2.0 * M_PI * i / n_p;
        curve.points.push_back(center + Vec2{a * std::cos(th), b * std::sin(th)});
    }
    return curve;
}

/// Counterclockwise rounded rectangle sampled at equal arc length.
inline ParticleCurve sample_rounded_rectangle(double width, double height, double rc,
                                              int n_p, const Vec2& center) {
    const double hw = 0.5 * width, hh = 0.5 * height;
    if (rc > std::min(hw, hh))
        throw std::invalid_argument("rounded rectangle: corner radius exceeds half extent");
    const double sx = 2.0 * (hw - rc);   // straight span along x
    const double sy = 2.0 * (hh - rc);   // straight span along y
    const double arc = 0.5 * M_PI * rc;  // one quarter-corner
    const double perim = 2.0 * sx + 2.0 * sy + 4.0 * arc;

    // Piecewise arc-length parameterization starting at the middle of the
    // bottom edge, walking counterclockwise.
    auto eval = [&](double s) -> Vec2 {
        s = std::fmod(s, perim);
        if (s < 0.0) s += perim;
        double seg;
        // bottom half-edge rightward
        seg = 0.5 * sx;
        if (s < seg) return {s, -hh};
        s -= seg;
        // bottom-right corner
        if (s < arc) {
            const double a = -0.5 * M_PI + s / rc;
            return {hw - rc + rc * std::cos(a), -hh + rc + rc * std::sin(a)};
        }
        s -= arc;
        // right edge upward
        if (s < sy) return {hw, -hh + rc + s};
        s -= sy;
        // top-right corner
        if (s < arc) {
            const double a = s / rc;
            return {hw - rc + rc * std::cos(a), hh - rc + rc * std::sin(a)};
        }
        s -= arc;
        // top edge leftward
        if (s < sx) return {hw - rc - s, hh};
        s -= sx;
        // top-left corner
        if (s < arc) {
            const double a = 0.5 * M_PI + s / rc;
            return {-hw + rc + rc * std::cos(a), hh - rc + rc * std::sin(a)};
        }
        s -= arc;
        // left edge downward
        if (s < sy) return {-hw, hh - rc - s};
        s -= sy;
        // bottom-left corner
        if (s < arc) {
            const double a = M_PI + s / rc;
            return {-hw + rc + rc * std::cos(a), -hh + rc + rc * std::sin(a)};
        }
        s -= arc;
        // bottom half-edge back to start
        return {-hw + rc + s, -hh};
    };

    ParticleCurve curve;
    curve.points.reserve(static_cast<size_t>(n_p));
    for (int i = 0; i < n_p; ++i)
        curve.points.push_back(center + eval(perim * i / n_p));
    return curve;
}

} // namespace detail

/// Equal-parameter sampling of an analytic test shape, counterclockwise.
inline ParticleCurve make_shape(ShapeKind kind, const ShapeParams& params, int n_p,
                                const Vec2& center) {
    if (n_p < 3) throw std::invalid_argument("make_shape: need at least 3 particles");
    ParticleCurve curve;
    switch (kind) {
        case ShapeKind::Circle:
            if (!(params.radius > 0.0))
                throw std::invalid_argument("make_shape: radius must be positive");
            curve = detail::sample_circle(params.radius, n_p, center);
            break;
        case ShapeKind::Ellipse:
            if (!(params.semi_axis_x > 0.0) || !(params.semi_axis_y > 0.0))
                throw std::invalid_argument("make_shape: semi-axes must be positive");
            curve = detail::sample_ellipse(params.semi_axis_x, params.semi_axis_y, n_p, center);
            break;
        case ShapeKind::RoundedRectangle:
            if (!(params.width > 0.0) || !(params.height > 0.0) || !(params.corner_radius > 0.0))
                throw std::invalid_argument("make_shape: rectangle dimensions must be positive");
            curve = detail::sample_rounded_rectangle(params.width, params.height,
                                                     params.corner_radius, n_p, center);
            break;
    }
    validate_curve(curve);
    return curve;
}

/// The Green's functions decay over the scale alpha, so a curve must keep
/// a margin from the periodic boundary for the boundary not to matter.
inline void check_domain_margin(const ParticleCurve& curve, const MeshConfig& cfg,
                                double margin) {
    for (size_t i = 0; i < curve.size(); ++i) {
        const Vec2& p = curve[i];
        if (p.x < margin || p.x > cfg.lx - margin || p.y < margin || p.y > cfg.ly - margin)
            throw std::invalid_argument(
                "shape too close to boundary: particle " + std::to_string(i) + " at (" +
                std::to_string(p.x) + ", " + std::to_string(p.y) + ") violates margin " +
                std::to_string(margin));
    }
}

/// Generate and validate against the mesh with margin 4 * alpha.
inline ParticleCurve make_shape(ShapeKind kind, const ShapeParams& params, int n_p,
                                const Vec2& center, const MeshConfig& cfg, double alpha) {
    ParticleCurve curve = make_shape(kind, params, n_p, center);
    check_domain_margin(curve, cfg, 4.0 * alpha);
    return curve;
}

} // namespace curvematch
