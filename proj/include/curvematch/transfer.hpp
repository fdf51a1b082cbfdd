#pragma once

#include <cmath>
#include <vector>

#include "curvematch/bspline.hpp"
#include "curvematch/geometry.hpp"
#include "curvematch/mesh.hpp"

namespace curvematch {

/// Tensor-product B-spline stencil at one point: the 4x4 block of mesh
/// nodes with nonzero weight, plus per-axis weights and derivatives in
/// grid units. Node indices are already wrapped.
struct BsplineStencil {
    int ix[4], iy[4];
    double wx[4], wy[4];
    double dwx[4], dwy[4];
    double d2wx[4], d2wy[4];
};

inline BsplineStencil make_stencil(const MeshConfig& cfg, const Vec2& p) {
    BsplineStencil st;
    const double gx = wrap_periodic(p.x, cfg.lx) / cfg.dx();
    const double gy = wrap_periodic(p.y, cfg.ly) / cfg.dy();
    const int bx = static_cast<int>(std::floor(gx)) - 1;
    const int by = static_cast<int>(std::floor(gy)) - 1;
    for (int t = 0; t < 4; ++t) {
        const double rx = gx - (bx + t);
        const double ry = gy - (by + t);
        st.ix[t] = (bx + t + cfg.mx) % cfg.mx;
        st.iy[t] = (by + t + cfg.my) % cfg.my;
        st.wx[t] = bspline_weight(rx);
        st.wy[t] = bspline_weight(ry);
        st.dwx[t] = bspline_weight_deriv(rx);
        st.dwy[t] = bspline_weight_deriv(ry);
        st.d2wx[t] = bspline_weight_second_deriv(rx);
        st.d2wy[t] = bspline_weight_second_deriv(ry);
    }
    return st;
}

/// sum_k u_k psi_k(x) for one point.
inline Vec2 interp_one(const MeshField& field, const BsplineStencil& st) {
    Vec2 out;
    for (int b = 0; b < 4; ++b) {
        for (int a = 0; a < 4; ++a) {
            const double w = st.wx[a] * st.wy[b];
            out += w * field.at(st.ix[a], st.iy[b]);
        }
    }
    return out;
}

/// sum_k u_k (grad psi_k)(x) as a 2x2 matrix B with B_ab = d u_a / d x_b,
/// derivatives in physical units.
inline Mat2 interp_gradient_one(const MeshField& field, const BsplineStencil& st) {
    const double inv_dx = 1.0 / field.config().dx();
    const double inv_dy = 1.0 / field.config().dy();
    Mat2 g;
    for (int b = 0; b < 4; ++b) {
        for (int a = 0; a < 4; ++a) {
            const Vec2 u = field.at(st.ix[a], st.iy[b]);
            const double px = st.dwx[a] * st.wy[b] * inv_dx;
            const double py = st.wx[a] * st.dwy[b] * inv_dy;
            g.xx += u.x * px; g.xy += u.x * py;
            g.yx += u.y * px; g.yy += u.y * py;
        }
    }
    return g;
}

/// Weighted Hessian sum_k (u_k . r) (grad grad psi_k)(x), symmetric 2x2.
inline Mat2 interp_hessian_weighted(const MeshField& field, const BsplineStencil& st,
                                    const Vec2& r) {
    const double inv_dx = 1.0 / field.config().dx();
    const double inv_dy = 1.0 / field.config().dy();
    double hxx = 0.0, hxy = 0.0, hyy = 0.0;
    for (int b = 0; b < 4; ++b) {
        for (int a = 0; a < 4; ++a) {
            const double s = dot(field.at(st.ix[a], st.iy[b]), r);
            hxx += s * st.d2wx[a] * st.wy[b] * inv_dx * inv_dx;
            hxy += s * st.dwx[a] * st.dwy[b] * inv_dx * inv_dy;
            hyy += s * st.wx[a] * st.d2wy[b] * inv_dy * inv_dy;
        }
    }
    return {hxx, hxy, hxy, hyy};
}

/// Evaluate a mesh field at a list of points (4x4 stencil each).
inline VectorList interp_to_points(const MeshField& field, const PointList& points) {
    VectorList out;
    out.reserve(points.size());
    for (const Vec2& p : points)
        out.push_back(interp_one(field, make_stencil(field.config(), p)));
    return out;
}

/// m_k = sum_beta P_beta psi_k(Q_beta). Exact transpose of
/// interp_to_points under the unweighted nodewise inner product.
/// Accumulation runs in particle index order so serial results are
/// bitwise reproducible.
inline MeshField spread_to_mesh(const VectorList& momenta, const PointList& points,
                                const MeshConfig& cfg) {
    if (momenta.size() != points.size())
        throw std::invalid_argument("spread_to_mesh: momenta/points length mismatch");
    MeshField m(cfg);
    for (size_t beta = 0; beta < points.size(); ++beta) {
        const BsplineStencil st = make_stencil(cfg, points[beta]);
        const Vec2 p = momenta[beta];
        for (int b = 0; b < 4; ++b) {
            for (int a = 0; a < 4; ++a) {
                m.add(st.ix[a], st.iy[b], (st.wx[a] * st.wy[b]) * p);
            }
        }
    }
    return m;
}

/// Gradient-weighted spread: node value sum_beta r_beta (grad psi_k(Q_beta) . w_beta).
/// This is the transpose of U -> [B(U, Q_beta)^T r_beta]_beta, used by the
/// adjoint of the momentum update.
inline MeshField spread_dot_gradient(const VectorList& r, const VectorList& w,
                                     const PointList& points, const MeshConfig& cfg) {
    if (r.size() != points.size() || w.size() != points.size())
        throw std::invalid_argument("spread_dot_gradient: length mismatch");
    const double inv_dx = 1.0 / cfg.dx();
    const double inv_dy = 1.0 / cfg.dy();
    MeshField m(cfg);
    for (size_t beta = 0; beta < points.size(); ++beta) {
        const BsplineStencil st = make_stencil(cfg, points[beta]);
        for (int b = 0; b < 4; ++b) {
            for (int a = 0; a < 4; ++a) {
                const double gpsi_dot_w = st.dwx[a] * st.wy[b] * inv_dx * w[beta].x +
                                          st.wx[a] * st.dwy[b] * inv_dy * w[beta].y;
                m.add(st.ix[a], st.iy[b], gpsi_dot_w * r[beta]);
            }
        }
    }
    return m;
}

} // namespace curvematch
