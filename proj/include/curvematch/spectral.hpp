#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "curvematch/mesh.hpp"

namespace curvematch {

/// Sobolev metric operator (1 - alpha^2 laplacian)^power, applied
/// spectrally. The Fourier multiplier (1 + alpha^2 |k|^2)^power is >= 1
/// for every mode, so both the operator and its inverse are positive
/// definite.
struct NormOperator {
    double alpha = 0.4;
    int power = 2;

    NormOperator() = default;
    NormOperator(double alpha_, int power_) : alpha(alpha_), power(power_) {
        if (!(alpha > 0.0)) throw std::invalid_argument("NormOperator: alpha must be > 0");
        if (power < 1) throw std::invalid_argument("NormOperator: power must be >= 1");
    }

    double multiplier(double k2) const { return std::pow(1.0 + alpha * alpha * k2, power); }
};

/// Smoothing kernel for current matching: the Green's function of
/// (1 - alpha^2 laplacian)^power, i.e. multiplier (1 + alpha^2 |k|^2)^-power.
struct KernelOperator {
    double alpha = 0.4;
    int power = 2;

    KernelOperator() = default;
    KernelOperator(double alpha_, int power_) : alpha(alpha_), power(power_) {
        if (!(alpha > 0.0)) throw std::invalid_argument("KernelOperator: alpha must be > 0");
        if (power < 1) throw std::invalid_argument("KernelOperator: power must be >= 1");
    }

    double multiplier(double k2) const { return std::pow(1.0 + alpha * alpha * k2, -power); }
};

namespace detail {

/// Cached FFTW plans for one grid size. Plans are created with
/// FFTW_UNALIGNED so they can execute on any caller-provided buffers via
/// the new-array interface, which is the only thread-safe part of FFTW;
/// plan creation itself is serialized by a mutex.
struct FftPlans {
    int mx = 0, my = 0;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    FftPlans(int mx_, int my_) : mx(mx_), my(my_) {
        const int nc = my * (mx / 2 + 1);
        std::vector<double> real(static_cast<size_t>(my) * mx);
        std::vector<std::complex<double>> cplx(static_cast<size_t>(nc));
        auto* cp = reinterpret_cast<fftw_complex*>(cplx.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fwd = fftw_plan_dft_r2c_2d(my, mx, real.data(), cp, flags);
        bwd = fftw_plan_dft_c2r_2d(my, mx, cp, real.data(), flags);
        if (!fwd || !bwd) throw std::runtime_error("FFTW plan creation failed");
    }
    ~FftPlans() {
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;
};

inline std::shared_ptr<const FftPlans> fft_plans(int mx, int my) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const FftPlans>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& entry = cache[{mx, my}];
    if (!entry) entry = std::make_shared<const FftPlans>(mx, my);
    return entry;
}

/// Signed integer frequency for index i on an axis of m nodes.
inline int signed_frequency(int i, int m) { return i <= m / 2 ? i : i - m; }

/// Apply a diagonal Fourier multiplier to both components of a field.
template <typename MultiplierFn>
MeshField spectral_scale(const MeshField& field, MultiplierFn&& mult) {
    const MeshConfig& cfg = field.config();
    const int mx = cfg.mx, my = cfg.my;
    const int nxc = mx / 2 + 1;
    auto plans = fft_plans(mx, my);

    // Per-mode multipliers depend only on |k|^2; precompute per row/column.
    std::vector<double> kx2(static_cast<size_t>(nxc));
    for (int i = 0; i < nxc; ++i) {
        const double kx = 2.0 * M_PI / cfg.lx * i;
        kx2[static_cast<size_t>(i)] = kx * kx;
    }

    MeshField out(cfg);
    std::vector<double> real(static_cast<size_t>(my) * mx);
    std::vector<std::complex<double>> cplx(static_cast<size_t>(my) * nxc);
    auto* cp = reinterpret_cast<fftw_complex*>(cplx.data());
    const double norm = 1.0 / (static_cast<double>(mx) * my);

    const std::vector<double>* planes[2] = {&field.x_plane(), &field.y_plane()};
    std::vector<double>* out_planes[2] = {&out.x_plane(), &out.y_plane()};
    for (int c = 0; c < 2; ++c) {
        std::copy(planes[c]->begin(), planes[c]->end(), real.begin());
        fftw_execute_dft_r2c(plans->fwd, real.data(), cp);
        for (int j = 0; j < my; ++j) {
            const double ky = 2.0 * M_PI / cfg.ly * signed_frequency(j, my);
            const double ky2 = ky * ky;
            for (int i = 0; i < nxc; ++i) {
                cplx[static_cast<size_t>(j) * nxc + i] *=
                    mult(kx2[static_cast<size_t>(i)] + ky2) * norm;
            }
        }
        fftw_execute_dft_c2r(plans->bwd, cp, real.data());
        std::copy(real.begin(), real.end(), out_planes[c]->begin());
    }
    return out;
}

} // namespace detail

/// (1 - alpha^2 laplacian)^n via DFT diagonalization.
inline MeshField apply_metric(const MeshField& field, const NormOperator& op) {
    return detail::spectral_scale(field, [&](double k2) { return op.multiplier(k2); });
}

/// Inverse of apply_metric; exact to round-off (the multiplier never vanishes).
inline MeshField invert_metric(const MeshField& field, const NormOperator& op) {
    return detail::spectral_scale(field, [&](double k2) { return 1.0 / op.multiplier(k2); });
}

/// Kernel smoothing K * v, multiplier (1 + alpha^2 |k|^2)^-power.
inline MeshField apply_kernel(const MeshField& field, const KernelOperator& op) {
    return detail::spectral_scale(field, [&](double k2) { return op.multiplier(k2); });
}

/// Squared metric norm dx dy sum_k u_k . (A u)_k with a Riemann-sum
/// quadrature weight. Zero iff the field is zero.
inline double norm_squared(const MeshField& field, const NormOperator& op) {
    return field.config().cell_area() * dot_nodewise(field, apply_metric(field, op));
}

} // namespace curvematch
