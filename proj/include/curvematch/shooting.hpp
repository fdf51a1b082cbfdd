#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "curvematch/current.hpp"
#include "curvematch/flow.hpp"
#include "curvematch/geometry.hpp"
#include "curvematch/mesh.hpp"
#include "curvematch/shape.hpp"
#include "curvematch/spectral.hpp"
#include "curvematch/transfer.hpp"

namespace curvematch {

/// Scalar normal-momentum magnitudes: the control parameterizes
/// P^0_beta = p_beta n_beta with n the outward source normals, which keeps
/// the initial momentum normal to the curve as the optimal flow requires.
struct ControlVector {
    std::vector<double> p;

    size_t size() const { return p.size(); }
    static ControlVector zeros(size_t n) { return {std::vector<double>(n, 0.0)}; }
};

enum class OptimMethod { NonlinearCG, NewtonCG };

/// One shooting problem: match the source curve onto the target's current.
/// The target enters only through its mesh current, so its particle count
/// is independent of the source's.
struct ShootingProblem {
    ParticleCurve source;
    ParticleCurve target;
    MeshConfig mesh;
    NormOperator norm_op;
    KernelOperator kernel;
    TimeGrid grid;
    StepOptions step_opts;

    OptimMethod method = OptimMethod::NonlinearCG;
    int max_iters = 200;
    double grad_tol = 1e-8;
    /// If set, the objective becomes sum_n dt ||u^{n+1}||^2 + f / sigma^2
    /// instead of the plain terminal mismatch f.
    std::optional<double> sigma;

    /// Control directions: outward unit perpendiculars of the initial
    /// edge vectors. Momenta built from these start the conserved
    /// pairing P_beta . (J_beta dQ0_beta) at exactly zero, so the flow
    /// keeps the momentum normal to the curve to round-off.
    VectorList source_normals() const {
        const EdgeVectors edges = edge_vectors(source);
        const Vec2 c = centroid(source);
        VectorList normals(edges.size());
        for (size_t b = 0; b < edges.size(); ++b) {
            const double len = norm(edges[b]);
            if (len < 1e-12 * (1.0 + norm(source[b])))
                throw std::invalid_argument("degenerate edge at particle " +
                                            std::to_string(b));
            Vec2 nrm = (1.0 / len) * rotate_cw(edges[b]);
            if (dot(nrm, source[b] - c) < 0.0) nrm = -nrm;
            normals[b] = nrm;
        }
        return normals;
    }
};

inline VectorList momentum_from_control(const ControlVector& control,
                                        const VectorList& normals) {
    if (control.size() != normals.size())
        throw std::invalid_argument("control length does not match particle count");
    VectorList P(normals.size());
    for (size_t b = 0; b < normals.size(); ++b) P[b] = control.p[b] * normals[b];
    return P;
}

/// Shooting objective. Integrates the flow from the control's initial
/// momenta and measures the terminal current mismatch (plus the penalized
/// path energy when sigma is set). Returns the trajectory alongside the
/// value so callers can reuse it.
inline std::pair<double, Trajectory> objective(const ControlVector& control,
                                               const ShootingProblem& prob) {
    const VectorList P0 = momentum_from_control(control, prob.source_normals());
    Trajectory traj = integrate(prob.source.points, P0, prob.grid, prob.norm_op, prob.mesh,
                                prob.step_opts);
    const ParticleCurve final_curve{traj.final_state().Q};
    double value = mismatch(final_curve, prob.target, prob.kernel, prob.mesh);
    if (prob.sigma) {
        value /= (*prob.sigma) * (*prob.sigma);
        const double dt = prob.grid.dt();
        for (const MeshField& u : traj.velocities)
            value += dt * norm_squared(u, prob.norm_op);
    }
    return {value, std::move(traj)};
}

namespace detail {

/// Adjoint of one converged implicit step, by implicit-function
/// differentiation of the step equations (not by unrolling the forward
/// fixed-point iterations). Given cotangents (lam_Q, lam_P) for
/// (Q^{n+1}, P^{n+1}) plus any direct cotangent on u^{n+1}, produces the
/// cotangents for (Q^n, P^n).
///
/// With c = dx dy, B = B(u^{n+1}, Q^n), R = P^{n+1}, the multipliers solve
///   mu1 = -(dt/c) A^{-1}[ spread(lam_Q) + spread_dot_gradient(R, mu2) ] - (1/c) A^{-1} g_u
///   mu2_b = -(Id + dt B_b)^{-1} (lam_P_b - mu1(Q^n_b))
/// and the input cotangents are
///   lam_P^n = -mu2
///   lam_Q^n_b = (Id + dt B_b)^T lam_Q_b - B(mu1)_b^T R_b + dt H_b(u, R) mu2_b.
struct StepAdjointWorkspace {
    VectorList lam_Q;  // cotangent wrt Q^{n+1} on entry, wrt Q^n on exit
    VectorList lam_P;  // cotangent wrt P^{n+1} on entry, wrt P^n on exit
};

inline void step_adjoint(StepAdjointWorkspace& ws, const PointList& Q,
                         const VectorList& R, const MeshField& u, double dt,
                         const NormOperator& op, const MeshConfig& cfg,
                         const MeshField* direct_u_cotangent, const StepOptions& opts) {
    const size_t n = Q.size();
    const double inv_c = 1.0 / cfg.cell_area();

    std::vector<BsplineStencil> stencils;
    stencils.reserve(n);
    for (size_t b = 0; b < n; ++b) stencils.push_back(make_stencil(cfg, Q[b]));

    std::vector<Mat2> B(n);
    for (size_t b = 0; b < n; ++b) B[b] = interp_gradient_one(u, stencils[b]);

    // Fixed part of the mu1 right-hand side, independent of mu2.
    MeshField rhs_fixed = spread_to_mesh(ws.lam_Q, Q, cfg);
    rhs_fixed *= dt;
    MeshField mu1_fixed = invert_metric(rhs_fixed, op);
    mu1_fixed *= -inv_c;
    if (direct_u_cotangent) {
        MeshField extra = invert_metric(*direct_u_cotangent, op);
        extra *= -inv_c;
        mu1_fixed += extra;
    }

    VectorList mu2(n, Vec2{});
    MeshField mu1 = mu1_fixed;
    double scale = 0.0;
    for (const Vec2& v : ws.lam_P) scale = std::max(scale, norm_inf(v));
    for (const Vec2& v : ws.lam_Q) scale = std::max(scale, norm_inf(v));
    const double tol = opts.tol_fp * std::max(1.0, scale);

    int iter = 0;
    double delta = 0.0;
    for (;; ++iter) {
        if (iter >= opts.max_iter)
            throw FixedPointError("adjoint step did not converge (residual " +
                                      std::to_string(delta) + ")",
                                  delta);
        delta = 0.0;
        for (size_t b = 0; b < n; ++b) {
            const Vec2 rhs = ws.lam_P[b] - interp_one(mu1, stencils[b]);
            const Mat2 M{1.0 + dt * B[b].xx, dt * B[b].xy,
                         dt * B[b].yx, 1.0 + dt * B[b].yy};
            const Vec2 next = -1.0 * solve(M, rhs);
            delta = std::max(delta, norm_inf(next - mu2[b]));
            mu2[b] = next;
        }
        MeshField coupling = invert_metric(spread_dot_gradient(R, mu2, Q, cfg), op);
        coupling *= -dt * inv_c;
        mu1 = mu1_fixed + coupling;
        if (delta <= tol) break;
    }

    VectorList lam_Q_prev(n), lam_P_prev(n);
    for (size_t b = 0; b < n; ++b) {
        lam_P_prev[b] = -mu2[b];
        const Mat2 Bmu1 = interp_gradient_one(mu1, stencils[b]);
        const Mat2 H = interp_hessian_weighted(u, stencils[b], R[b]);
        lam_Q_prev[b] = ws.lam_Q[b] + dt * apply_transpose(B[b], ws.lam_Q[b]) -
                        apply_transpose(Bmu1, R[b]) + dt * apply(H, mu2[b]);
    }
    ws.lam_Q = std::move(lam_Q_prev);
    ws.lam_P = std::move(lam_P_prev);
}

} // namespace detail

/// Exact gradient of the shooting objective with respect to the control,
/// by reverse-mode differentiation of the discrete composite map
/// control -> P^0 -> (steps 1..N) -> objective. Also returns the value
/// and forward trajectory.
struct GradientResult {
    double value = 0.0;
    ControlVector gradient;
    Trajectory trajectory;
};

inline GradientResult objective_gradient(const ControlVector& control,
                                         const ShootingProblem& prob) {
    const VectorList normals = prob.source_normals();
    const VectorList P0 = momentum_from_control(control, normals);
    Trajectory traj = integrate(prob.source.points, P0, prob.grid, prob.norm_op, prob.mesh,
                                prob.step_opts);
    const int N = traj.steps();
    const double dt = prob.grid.dt();
    const size_t n = control.size();

    const ParticleCurve final_curve{traj.final_state().Q};
    double value = mismatch(final_curve, prob.target, prob.kernel, prob.mesh);

    // Terminal cotangents from the mismatch term.
    detail::StepAdjointWorkspace ws;
    ws.lam_Q = mismatch_gradient(final_curve, prob.target, prob.kernel, prob.mesh);
    ws.lam_P.assign(n, Vec2{});

    double weight = 1.0;
    if (prob.sigma) {
        weight = 1.0 / ((*prob.sigma) * (*prob.sigma));
        value *= weight;
        for (const MeshField& u : traj.velocities) value += dt * norm_squared(u, prob.norm_op);
    }
    for (Vec2& g : ws.lam_Q) g *= weight;

    for (int s = N - 1; s >= 0; --s) {
        MeshField direct;  // d/d u of dt ||u||^2 = 2 dt c A u
        const MeshField* direct_ptr = nullptr;
        if (prob.sigma) {
            direct = apply_metric(traj.velocities[static_cast<size_t>(s)], prob.norm_op);
            direct *= 2.0 * dt * prob.mesh.cell_area();
            direct_ptr = &direct;
        }
        detail::step_adjoint(ws, traj.states[static_cast<size_t>(s)].Q,
                             traj.states[static_cast<size_t>(s) + 1].P,
                             traj.velocities[static_cast<size_t>(s)], dt, prob.norm_op,
                             prob.mesh, direct_ptr, prob.step_opts);
    }

    // Project the P^0 cotangent onto the normal directions.
    ControlVector grad;
    grad.p.resize(n);
    for (size_t b = 0; b < n; ++b) grad.p[b] = dot(ws.lam_P[b], normals[b]);
    return {value, std::move(grad), std::move(traj)};
}

inline ControlVector gradient(const ControlVector& control, const ShootingProblem& prob) {
    return objective_gradient(control, prob).gradient;
}

/// Shooting optimization result. The objective history is non-increasing
/// across accepted line-search steps; conservation diagnostics come from
/// the final trajectory.
struct OptimResult {
    ControlVector control;
    std::vector<double> objective_history;
    std::vector<double> grad_norm_history;
    Trajectory trajectory;
    ConservationReport conservation;
    bool converged = false;
    int iterations = 0;
    std::string message;
};

namespace detail {

inline double norm_inf(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct LineSearchResult {
    bool ok = false;
    double alpha = 0.0;
    double value = 0.0;
    Trajectory trajectory;
    ControlVector point;
};

/// Backtracking line search with the Armijo sufficient-decrease test.
inline LineSearchResult backtracking_search(const ShootingProblem& prob,
                                            const ControlVector& x, double fx,
                                            const std::vector<double>& direction,
                                            double directional_deriv, double alpha0) {
    constexpr double c1 = 1e-4;
    constexpr int max_backtracks = 60;
    double alpha = alpha0;
    LineSearchResult res;
    for (int k = 0; k < max_backtracks; ++k, alpha *= 0.5) {
        ControlVector trial = x;
        for (size_t i = 0; i < trial.size(); ++i) trial.p[i] += alpha * direction[i];
        double f_trial;
        Trajectory traj;
        try {
            std::tie(f_trial, traj) = objective(trial, prob);
        } catch (const FixedPointError&) {
            continue;  // step took the flow outside the contraction regime; shrink
        }
        if (f_trial <= fx + c1 * alpha * directional_deriv) {
            res.ok = true;
            res.alpha = alpha;
            res.value = f_trial;
            res.trajectory = std::move(traj);
            res.point = std::move(trial);
            return res;
        }
    }
    return res;
}

/// Truncated-CG solve of H d = -g with Hessian-vector products obtained by
/// central finite differences of the gradient.
inline std::vector<double> newton_cg_direction(const ShootingProblem& prob,
                                               const ControlVector& x,
                                               const std::vector<double>& g) {
    const size_t n = g.size();
    const double gnorm = std::sqrt(dot(g, g));
    std::vector<double> d(n, 0.0), r(n), p(n);
    for (size_t i = 0; i < n; ++i) r[i] = -g[i];
    p = r;
    double rr = dot(r, r);
    const double forcing = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    const int max_cg = static_cast<int>(std::min<size_t>(2 * n, 60));

    auto hessian_vec = [&](const std::vector<double>& v) {
        const double vnorm = std::sqrt(dot(v, v));
        const double eps = 1e-6 * std::max(1.0, norm_inf(x.p)) / std::max(vnorm, 1e-30);
        ControlVector xp = x, xm = x;
        for (size_t i = 0; i < n; ++i) {
            xp.p[i] += eps * v[i];
            xm.p[i] -= eps * v[i];
        }
        const ControlVector gp = gradient(xp, prob);
        const ControlVector gm = gradient(xm, prob);
        std::vector<double> hv(n);
        for (size_t i = 0; i < n; ++i) hv[i] = (gp.p[i] - gm.p[i]) / (2.0 * eps);
        return hv;
    };

    for (int k = 0; k < max_cg; ++k) {
        if (std::sqrt(rr) <= forcing) break;
        const std::vector<double> hp = hessian_vec(p);
        const double php = dot(p, hp);
        if (php <= 0.0) {
            if (k == 0) return r;  // steepest descent on negative curvature
            break;
        }
        const double alpha = rr / php;
        for (size_t i = 0; i < n; ++i) {
            d[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    if (dot(d, d) == 0.0) for (size_t i = 0; i < n; ++i) d[i] = -g[i];
    return d;
}

} // namespace detail

/// Minimize the shooting objective from the given initial control.
/// Nonlinear CG uses Polak-Ribiere with automatic restart; Newton-CG
/// mirrors a finite-difference-Hessian Newton conjugate gradient solver.
/// A line-search failure returns the best point so far, flagged
/// non-converged.
inline OptimResult minimize(const ShootingProblem& prob, const ControlVector& initial) {
    OptimResult res;
    GradientResult cur = objective_gradient(initial, prob);
    res.control = initial;
    res.objective_history.push_back(cur.value);
    res.grad_norm_history.push_back(detail::norm_inf(cur.gradient.p));

    std::vector<double> g = cur.gradient.p;
    std::vector<double> g_old;
    std::vector<double> d(g.size());
    for (size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
    double alpha_prev = 0.0;

    int iter = 0;
    for (; iter < prob.max_iters; ++iter) {
        const double gnorm = detail::norm_inf(g);
        if (gnorm <= prob.grad_tol) {
            res.converged = true;
            res.message = "gradient tolerance reached";
            break;
        }

        if (prob.method == OptimMethod::NewtonCG) {
            d = detail::newton_cg_direction(prob, res.control, g);
        } else if (iter > 0) {
            // Polak-Ribiere+ with restart on loss of descent
            double beta = 0.0;
            double gg_old = detail::dot(g_old, g_old);
            if (gg_old > 0.0) {
                double num = 0.0;
                for (size_t i = 0; i < g.size(); ++i) num += g[i] * (g[i] - g_old[i]);
                beta = std::max(0.0, num / gg_old);
            }
            for (size_t i = 0; i < g.size(); ++i) d[i] = -g[i] + beta * d[i];
        }
        double dd = detail::dot(d, g);
        if (dd >= 0.0) {  // not a descent direction; restart with steepest descent
            for (size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
            dd = detail::dot(d, g);
        }

        const double dinf = detail::norm_inf(d);
        double alpha0;
        if (prob.method == OptimMethod::NewtonCG) {
            alpha0 = 1.0;
        } else if (alpha_prev > 0.0) {
            alpha0 = 2.0 * alpha_prev;
        } else {
            alpha0 = 1.0 / std::max(1.0, dinf);
        }

        detail::LineSearchResult ls = detail::backtracking_search(
            prob, res.control, res.objective_history.back(), d, dd, alpha0);
        if (!ls.ok) {
            res.message = "line search failed; returning best point so far";
            break;
        }
        alpha_prev = ls.alpha;
        res.control = std::move(ls.point);

        GradientResult gr = objective_gradient(res.control, prob);
        g_old = std::move(g);
        g = gr.gradient.p;
        cur = std::move(gr);
        res.objective_history.push_back(cur.value);
        res.grad_norm_history.push_back(detail::norm_inf(g));
    }
    if (!res.converged && iter == prob.max_iters) res.message = "iteration limit reached";

    res.iterations = iter;
    res.trajectory = std::move(cur.trajectory);
    res.conservation = conservation_report(res.trajectory, edge_vectors(prob.source));
    return res;
}

} // namespace curvematch
