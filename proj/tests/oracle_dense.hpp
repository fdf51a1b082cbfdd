#pragma once

// Independent reference implementations used only by the tests. Nothing
// here shares code paths with the library: B-spline values come from the
// De Boor recursion instead of closed-form piecewise polynomials, the
// spectral operators are materialized as dense circulant matrices via
// direct mode sums and solved with an LU factorization, and the flow is
// advanced by a plain Picard iteration on dense-algebra residuals.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "curvematch/geometry.hpp"
#include "curvematch/mesh.hpp"
#include "curvematch/shape.hpp"

namespace oracle {

using curvematch::MeshConfig;
using curvematch::MeshField;
using curvematch::ParticleCurve;
using curvematch::PointList;
using curvematch::Vec2;
using curvematch::VectorList;

// ---------------------------------------------------------------------
// Cardinal B-splines by the De Boor recursion. order_k(x) is the order-k
// (degree k-1) uniform B-spline supported on [0, k).

inline double deboor(int order, double x) {
    if (order == 1) return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
    const double k = static_cast<double>(order);
    return (x * deboor(order - 1, x) + (k - x) * deboor(order - 1, x - 1.0)) / (k - 1.0);
}

/// Centered cubic weight with support (-2, 2); matches the library's
/// grid-unit convention.
inline double weight(double r) { return deboor(4, r + 2.0); }

inline double weight_deriv(double r) { return deboor(3, r + 2.0) - deboor(3, r + 1.0); }

inline double weight_second_deriv(double r) {
    return deboor(2, r + 2.0) - 2.0 * deboor(2, r + 1.0) + deboor(2, r);
}

// ---------------------------------------------------------------------
// Direct tensor-product basis evaluation against every node, using
// minimum-image periodic distances. No stencil enumeration.

/// Grid-unit offset of x from node index i along an axis of m nodes,
/// wrapped into (-m/2, m/2].
inline double grid_offset(double x, int i, double spacing, int m) {
    return std::remainder(x / spacing - i, static_cast<double>(m));
}

inline double basis_value(const MeshConfig& cfg, int i, int j, const Vec2& p) {
    return weight(grid_offset(p.x, i, cfg.dx(), cfg.mx)) *
           weight(grid_offset(p.y, j, cfg.dy(), cfg.my));
}

inline Vec2 basis_gradient(const MeshConfig& cfg, int i, int j, const Vec2& p) {
    const double rx = grid_offset(p.x, i, cfg.dx(), cfg.mx);
    const double ry = grid_offset(p.y, j, cfg.dy(), cfg.my);
    return {weight_deriv(rx) * weight(ry) / cfg.dx(),
            weight(rx) * weight_deriv(ry) / cfg.dy()};
}

inline MeshField spread(const VectorList& momenta, const PointList& points,
                        const MeshConfig& cfg) {
    MeshField out(cfg);
    for (int j = 0; j < cfg.my; ++j)
        for (int i = 0; i < cfg.mx; ++i)
            for (size_t b = 0; b < points.size(); ++b)
                out.add(i, j, basis_value(cfg, i, j, points[b]) * momenta[b]);
    return out;
}

inline Vec2 interp(const MeshField& field, const Vec2& p) {
    const MeshConfig& cfg = field.config();
    Vec2 out;
    for (int j = 0; j < cfg.my; ++j)
        for (int i = 0; i < cfg.mx; ++i)
            out += basis_value(cfg, i, j, p) * field.at(i, j);
    return out;
}

/// B_ab(x) = sum_k u_{k,a} d_b psi_k(x), summed over every node.
inline curvematch::Mat2 velocity_gradient(const MeshField& field, const Vec2& p) {
    const MeshConfig& cfg = field.config();
    curvematch::Mat2 B;
    for (int j = 0; j < cfg.my; ++j) {
        for (int i = 0; i < cfg.mx; ++i) {
            const Vec2 g = basis_gradient(cfg, i, j, p);
            const Vec2 u = field.at(i, j);
            B.xx += u.x * g.x; B.xy += u.x * g.y;
            B.yx += u.y * g.x; B.yy += u.y * g.y;
        }
    }
    return B;
}

// ---------------------------------------------------------------------
// Dense circulant matrices of the nodewise spectral operators, built by
// summing every Fourier mode explicitly:
//   A[(i,j),(i',j')] = (1/M) sum_modes mult(|k|^2) cos(k . (x_ij - x_i'j')).

inline int signed_freq(int i, int m) { return i <= m / 2 ? i : i - m; }

inline Eigen::MatrixXd dense_operator(const MeshConfig& cfg,
                                      const std::function<double(double)>& mult) {
    const int mx = cfg.mx, my = cfg.my;
    const int M = mx * my;
    Eigen::MatrixXd stencil(mx, my);
    for (int dj = 0; dj < my; ++dj) {
        for (int di = 0; di < mx; ++di) {
            double s = 0.0;
            for (int q = 0; q < my; ++q) {
                const double ky = 2.0 * M_PI / cfg.ly * signed_freq(q, my);
                for (int p = 0; p < mx; ++p) {
                    const double kx = 2.0 * M_PI / cfg.lx * signed_freq(p, mx);
                    s += mult(kx * kx + ky * ky) *
                         std::cos(kx * di * cfg.dx() + ky * dj * cfg.dy());
                }
            }
            stencil(di, dj) = s / M;
        }
    }
    Eigen::MatrixXd A(M, M);
    for (int j = 0; j < my; ++j)
        for (int i = 0; i < mx; ++i)
            for (int jp = 0; jp < my; ++jp)
                for (int ip = 0; ip < mx; ++ip)
                    A(j * mx + i, jp * mx + ip) =
                        stencil((i - ip + mx) % mx, (j - jp + my) % my);
    return A;
}

inline Eigen::VectorXd plane_to_vector(const std::vector<double>& plane) {
    return Eigen::Map<const Eigen::VectorXd>(plane.data(),
                                             static_cast<Eigen::Index>(plane.size()));
}

/// Apply a dense operator matrix componentwise to a mesh field.
inline MeshField apply_dense(const Eigen::MatrixXd& A, const MeshField& f) {
    MeshField out(f.config());
    Eigen::Map<Eigen::VectorXd>(out.x_plane().data(), A.rows()) =
        A * plane_to_vector(f.x_plane());
    Eigen::Map<Eigen::VectorXd>(out.y_plane().data(), A.rows()) =
        A * plane_to_vector(f.y_plane());
    return out;
}

inline MeshField solve_dense(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                             const MeshField& f) {
    MeshField out(f.config());
    Eigen::Map<Eigen::VectorXd>(out.x_plane().data(), lu.rows()) =
        lu.solve(plane_to_vector(f.x_plane()));
    Eigen::Map<Eigen::VectorXd>(out.y_plane().data(), lu.rows()) =
        lu.solve(plane_to_vector(f.y_plane()));
    return out;
}

// ---------------------------------------------------------------------
// Brute-force current mismatch with dense kernel algebra.

inline MeshField current(const ParticleCurve& curve, const MeshConfig& cfg) {
    const size_t n = curve.size();
    VectorList edges(n);
    for (size_t b = 0; b < n; ++b) edges[b] = curve[b] - curve[(b + n - 1) % n];
    return spread(edges, curve.points, cfg);
}

inline double mismatch(const ParticleCurve& a, const ParticleCurve& b,
                       const Eigen::MatrixXd& kernel_matrix, const MeshConfig& cfg) {
    const MeshField d = current(a, cfg) - current(b, cfg);
    const MeshField kd = apply_dense(kernel_matrix, d);
    return cfg.cell_area() * curvematch::dot_nodewise(d, kd);
}

// ---------------------------------------------------------------------
// Dense-algebra integrator: the same implicit step equations, solved by
// plain Picard iteration on the momentum with a dense LU velocity solve.

struct DenseFlow {
    MeshConfig cfg;
    Eigen::PartialPivLU<Eigen::MatrixXd> metric_lu;

    DenseFlow(const MeshConfig& cfg_, const std::function<double(double)>& norm_mult)
        : cfg(cfg_), metric_lu(dense_operator(cfg_, norm_mult)) {}

    MeshField velocity(const VectorList& P, const PointList& Q) const {
        MeshField rhs = spread(P, Q, cfg);
        rhs *= 1.0 / cfg.cell_area();
        return solve_dense(metric_lu, rhs);
    }

    struct Step {
        PointList Q;
        VectorList P;
        std::vector<curvematch::Mat2> J;
        MeshField u;
    };

    Step step(const PointList& Q, const VectorList& P,
              const std::vector<curvematch::Mat2>& J, double dt) const {
        const size_t n = Q.size();
        double pscale = 1.0;
        for (const Vec2& p : P) pscale = std::max(pscale, curvematch::norm_inf(p));

        VectorList Pn = P;
        MeshField u = velocity(Pn, Q);
        for (int iter = 0; iter < 20000; ++iter) {
            VectorList Pnext(n);
            double delta = 0.0;
            for (size_t b = 0; b < n; ++b) {
                const curvematch::Mat2 B = velocity_gradient(u, Q[b]);
                Pnext[b] = P[b] - dt * curvematch::apply_transpose(B, Pn[b]);
                delta = std::max(delta, curvematch::norm_inf(Pnext[b] - Pn[b]));
            }
            Pn = std::move(Pnext);
            u = velocity(Pn, Q);
            if (delta <= 1e-14 * pscale) break;
        }

        Step out{Q, Pn, J, u};
        for (size_t b = 0; b < n; ++b) {
            const curvematch::Mat2 B = velocity_gradient(u, Q[b]);
            out.Q[b] = Q[b] + dt * interp(u, Q[b]);
            const curvematch::Mat2 growth{1.0 + dt * B.xx, dt * B.xy,
                                          dt * B.yx, 1.0 + dt * B.yy};
            out.J[b] = curvematch::matmul(growth, J[b]);
        }
        return out;
    }
};

} // namespace oracle
