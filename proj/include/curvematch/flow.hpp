#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvematch/geometry.hpp"
#include "curvematch/mesh.hpp"
#include "curvematch/shape.hpp"
#include "curvematch/spectral.hpp"
#include "curvematch/transfer.hpp"

namespace curvematch {

/// Per-particle phase-space data at one time level: positions Q, momentum
/// covectors P, and flow-map Jacobians J (J = Id at t = 0).
struct PhaseState {
    PointList Q;
    VectorList P;
    std::vector<Mat2> J;

    size_t size() const { return Q.size(); }
};

inline PhaseState make_initial_state(const PointList& Q0, const VectorList& P0) {
    if (Q0.size() != P0.size())
        throw std::invalid_argument("initial state: Q/P length mismatch");
    return {Q0, P0, std::vector<Mat2>(Q0.size(), Mat2::identity())};
}

/// Uniform time grid over [0, 1]: N steps of size 1/N.
struct TimeGrid {
    int steps = 20;

    TimeGrid() = default;
    explicit TimeGrid(int n) : steps(n) {
        if (n < 1) throw std::invalid_argument("TimeGrid: need at least 1 step");
    }
    double dt() const { return 1.0 / steps; }
};

/// Raised when the implicit step's fixed-point iteration fails to reach
/// tolerance; usually means the time step is too large for the data.
struct FixedPointError : std::runtime_error {
    double residual;
    explicit FixedPointError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

/// Fixed-point solve controls for the implicit symplectic Euler step.
struct StepOptions {
    double tol_fp = 1e-13;  // max-norm momentum update
    int max_iter = 500;
};

/// Mesh velocity from particle momenta: solves
///   (dx dy) A u = sum_beta P_beta psi_k(Q_beta)
/// with A the metric operator, i.e. u = A^{-1} spread(P, Q) / (dx dy).
/// The quadrature weight of the mesh norm is folded in here so the
/// momentum-map equation and the norm use one consistent convention.
inline MeshField velocity_from_momentum(const VectorList& P, const PointList& Q,
                                        const NormOperator& op, const MeshConfig& cfg) {
    MeshField u = invert_metric(spread_to_mesh(P, Q, cfg), op);
    u *= 1.0 / cfg.cell_area();
    return u;
}

/// H(P, Q) = half the squared metric norm of the velocity field induced
/// by the momenta.
inline double hamiltonian(const VectorList& P, const PointList& Q, const NormOperator& op,
                          const MeshConfig& cfg) {
    return 0.5 * norm_squared(velocity_from_momentum(P, Q, op, cfg), op);
}

/// J update matching the linearization of the Q update:
///   J^{n+1} = (Id + dt B_beta) J^n,  B_beta = sum_k u_k (grad psi_k)(Q^n_beta).
inline std::vector<Mat2> evolve_jacobian(const std::vector<Mat2>& J, const PointList& Q,
                                         const MeshField& u, double dt) {
    if (J.size() != Q.size())
        throw std::invalid_argument("evolve_jacobian: J/Q length mismatch");
    std::vector<Mat2> out(J.size());
    for (size_t b = 0; b < J.size(); ++b) {
        const Mat2 B = interp_gradient_one(u, make_stencil(u.config(), Q[b]));
        out[b] = J[b] + dt * matmul(B, J[b]);
    }
    return out;
}

struct StepResult {
    PhaseState state;
    MeshField velocity;  // u^{n+1}
    int iterations = 0;
    double update_norm = 0.0;  // final fixed-point momentum update
};

/// One implicit symplectic Euler step. Solves the coupled system
///   u^{n+1}   = velocity_from_momentum(P^{n+1}, Q^n)
///   P^{n+1}_b = P^n_b - dt B_b(u^{n+1})^T P^{n+1}_b
///   Q^{n+1}_b = Q^n_b + dt sum_k u^{n+1}_k psi_k(Q^n_b)
/// by fixed-point iteration on (P^{n+1}, u^{n+1}); each sweep solves the
/// per-particle 2x2 momentum equation exactly for the current velocity.
inline StepResult step(const PhaseState& state, double dt, const NormOperator& op,
                       const MeshConfig& cfg, const StepOptions& opts = {}) {
    const size_t n = state.size();
    VectorList P = state.P;  // iterate for P^{n+1}
    MeshField u = velocity_from_momentum(P, state.Q, op, cfg);

    std::vector<BsplineStencil> stencils;
    stencils.reserve(n);
    for (size_t b = 0; b < n; ++b) stencils.push_back(make_stencil(cfg, state.Q[b]));

    int iter = 0;
    double delta = 0.0;
    for (;; ++iter) {
        if (iter >= opts.max_iter)
            throw FixedPointError("implicit step did not converge in " +
                                      std::to_string(opts.max_iter) +
                                      " iterations (residual " + std::to_string(delta) +
                                      "); time step too large",
                                  delta);
        delta = 0.0;
        for (size_t b = 0; b < n; ++b) {
            const Mat2 B = interp_gradient_one(u, stencils[b]);
            // (Id + dt B^T) P_new = P^n, solved exactly per particle
            const Mat2 M{1.0 + dt * B.xx, dt * B.yx, dt * B.xy, 1.0 + dt * B.yy};
            if (std::abs(det(M)) < 1e-14)
                throw FixedPointError("singular momentum update matrix; time step too large",
                                      delta);
            const Vec2 next = solve(M, state.P[b]);
            delta = std::max(delta, norm_inf(next - P[b]));
            P[b] = next;
        }
        u = velocity_from_momentum(P, state.Q, op, cfg);
        if (delta <= opts.tol_fp) break;
    }

    PhaseState out;
    out.P = P;
    out.Q.resize(n);
    for (size_t b = 0; b < n; ++b)
        out.Q[b] = state.Q[b] + dt * interp_one(u, stencils[b]);
    out.J = evolve_jacobian(state.J, state.Q, u, dt);
    return {std::move(out), std::move(u), iter + 1, delta};
}

/// Noether momentum of the particle-relabelling symmetry: J^T_beta P_beta,
/// conserved exactly by the discrete flow.
inline VectorList relabelling_momentum(const PhaseState& state) {
    VectorList out(state.size());
    for (size_t b = 0; b < state.size(); ++b)
        out[b] = apply_transpose(state.J[b], state.P[b]);
    return out;
}

/// Tangential momentum component P_beta . (J_beta dQ0_beta); stays at
/// round-off level for all time when each initial momentum is
/// perpendicular to its own initial edge vector.
inline std::vector<double> tangential_component(const PhaseState& state,
                                                const EdgeVectors& dQ0) {
    if (dQ0.size() != state.size())
        throw std::invalid_argument("tangential_component: edge count mismatch");
    std::vector<double> out(state.size());
    for (size_t b = 0; b < state.size(); ++b)
        out[b] = dot(state.P[b], apply(state.J[b], dQ0[b]));
    return out;
}

/// Full time series of one geodesic flow: N+1 states, N velocity fields
/// (u^{n+1} for n = 0..N-1), N+1 Hamiltonian samples. H^{n+1} is recorded
/// from the scheme's staggered pair (P^{n+1}, Q^n), the energy the
/// integrator actually propagates.
struct Trajectory {
    std::vector<PhaseState> states;
    std::vector<MeshField> velocities;
    std::vector<double> hamiltonians;

    const PhaseState& initial() const { return states.front(); }
    const PhaseState& final_state() const { return states.back(); }
    int steps() const { return static_cast<int>(velocities.size()); }
};

inline Trajectory integrate(const PointList& Q0, const VectorList& P0, const TimeGrid& grid,
                            const NormOperator& op, const MeshConfig& cfg,
                            const StepOptions& opts = {}) {
    Trajectory traj;
    traj.states.reserve(static_cast<size_t>(grid.steps) + 1);
    traj.velocities.reserve(static_cast<size_t>(grid.steps));
    traj.hamiltonians.reserve(static_cast<size_t>(grid.steps) + 1);

    traj.states.push_back(make_initial_state(Q0, P0));
    traj.hamiltonians.push_back(hamiltonian(P0, Q0, op, cfg));
    for (int n = 0; n < grid.steps; ++n) {
        StepResult r;
        try {
            r = step(traj.states.back(), grid.dt(), op, cfg, opts);
        } catch (const FixedPointError& e) {
            throw FixedPointError("step " + std::to_string(n) + ": " + e.what(), e.residual);
        }
        // duality form of H(P^{n+1}, Q^n); equals half the squared norm of u^{n+1}
        traj.hamiltonians.push_back(
            0.5 * dot_nodewise(r.velocity,
                               spread_to_mesh(r.state.P, traj.states.back().Q, cfg)));
        traj.states.push_back(std::move(r.state));
        traj.velocities.push_back(std::move(r.velocity));
    }
    return traj;
}

/// Advect auxiliary points through the stored velocity fields with the
/// same explicit update the particles use. Returns one time series per
/// point; does not feed back into the dynamics.
inline std::vector<PointList> transport_points(const PointList& aux, const Trajectory& traj) {
    std::vector<PointList> series(aux.size());
    for (size_t i = 0; i < aux.size(); ++i) {
        series[i].reserve(traj.velocities.size() + 1);
        series[i].push_back(aux[i]);
    }
    PointList current = aux;
    for (const MeshField& u : traj.velocities) {
        const double dt = 1.0 / static_cast<double>(traj.velocities.size());
        for (size_t i = 0; i < current.size(); ++i) {
            current[i] += dt * interp_one(u, make_stencil(u.config(), current[i]));
            series[i].push_back(current[i]);
        }
    }
    return series;
}

/// Conservation diagnostics over a trajectory, normalized as the tests
/// and the CLI report them.
struct ConservationReport {
    double relabel_drift = 0.0;     // max |J^T P - P^0| / max |P^0|
    double tangential_max = 0.0;    // max |P . J dQ0| / max(|P^0| |dQ0|)
    double hamiltonian_drift = 0.0; // max |H^n - H^0| / max(H^0, eps)
};

inline ConservationReport conservation_report(const Trajectory& traj, const EdgeVectors& dQ0) {
    ConservationReport rep;
    const VectorList ref = relabelling_momentum(traj.initial());
    double pscale = 0.0, tscale = 0.0;
    for (size_t b = 0; b < ref.size(); ++b) {
        pscale = std::max(pscale, norm(traj.initial().P[b]));
        tscale = std::max(tscale, norm(traj.initial().P[b]) * norm(dQ0[b]));
    }
    if (pscale == 0.0) pscale = 1.0;
    if (tscale == 0.0) tscale = 1.0;
    for (const PhaseState& s : traj.states) {
        const VectorList rel = relabelling_momentum(s);
        const std::vector<double> tan = tangential_component(s, dQ0);
        for (size_t b = 0; b < rel.size(); ++b) {
            rep.relabel_drift = std::max(rep.relabel_drift, norm_inf(rel[b] - ref[b]) / pscale);
            rep.tangential_max = std::max(rep.tangential_max, std::abs(tan[b]) / tscale);
        }
    }
    const double h0 = traj.hamiltonians.front();
    for (double h : traj.hamiltonians)
        rep.hamiltonian_drift =
            std::max(rep.hamiltonian_drift, std::abs(h - h0) / std::max(h0, 1e-300));
    return rep;
}

} // namespace curvematch
