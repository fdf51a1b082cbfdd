#pragma once

#include <vector>

#include "curvematch/mesh.hpp"
#include "curvematch/shape.hpp"
#include "curvematch/spectral.hpp"
#include "curvematch/transfer.hpp"

namespace curvematch {

/// Geometric current of a closed curve on the mesh:
///   v_k = sum_beta (Q_beta - Q_{beta-1}) psi_k(Q_beta).
/// Invariant under cyclic relabelling, negated by orientation reversal.
inline MeshField singular_current(const ParticleCurve& curve, const MeshConfig& cfg) {
    return spread_to_mesh(edge_vectors(curve), curve.points, cfg);
}

/// Kernel-weighted current mismatch
///   f = dx dy <d, K d>,  d = current(A) - current(B).
/// Nonnegative; zero iff the two currents coincide on the mesh. The
/// discretized functional of two distinct curves generally has a positive
/// minimum, so solvers aim to reduce it, not to zero it.
inline double mismatch(const ParticleCurve& a, const ParticleCurve& b,
                       const KernelOperator& kernel, const MeshConfig& cfg) {
    const MeshField d = singular_current(a, cfg) - singular_current(b, cfg);
    return cfg.cell_area() * dot_nodewise(d, apply_kernel(d, kernel));
}

/// Exact gradient of mismatch with respect to the particles of curve A,
/// through both the edge vectors (terms beta and beta+1) and the basis
/// weights psi_k(Q_beta):
///   g_beta = w(Q_beta) - w(Q_{beta+1}) + B(w, Q_beta)^T dQ_beta,
/// with w = 2 dx dy K d.
inline VectorList mismatch_gradient(const ParticleCurve& a, const ParticleCurve& b,
                                    const KernelOperator& kernel, const MeshConfig& cfg) {
    const MeshField d = singular_current(a, cfg) - singular_current(b, cfg);
    MeshField w = apply_kernel(d, kernel);
    w *= 2.0 * cfg.cell_area();

    const size_t n = a.size();
    const EdgeVectors edges = edge_vectors(a);
    std::vector<BsplineStencil> stencils;
    stencils.reserve(n);
    for (size_t beta = 0; beta < n; ++beta) stencils.push_back(make_stencil(cfg, a[beta]));

    VectorList grad(n);
    for (size_t beta = 0; beta < n; ++beta) {
        const Vec2 w_here = interp_one(w, stencils[beta]);
        const Vec2 w_next = interp_one(w, stencils[(beta + 1) % n]);
        const Mat2 Bw = interp_gradient_one(w, stencils[beta]);
        grad[beta] = w_here - w_next + apply_transpose(Bw, edges[beta]);
    }
    return grad;
}

} // namespace curvematch
