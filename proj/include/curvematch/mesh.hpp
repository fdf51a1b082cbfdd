#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvematch/geometry.hpp"

namespace curvematch {

/// Equispaced periodic rectangular mesh. Node (i, j) sits at
/// (i * dx, j * dy); indices wrap periodically in both directions.
struct MeshConfig {
    int mx = 128;
    int my = 128;
    double lx = 2.0 * M_PI;
    double ly = 2.0 * M_PI;

    MeshConfig() = default;
    MeshConfig(int mx_, int my_, double lx_, double ly_)
        : mx(mx_), my(my_), lx(lx_), ly(ly_) {
        if (mx < 8 || my < 8)
            throw std::invalid_argument("MeshConfig: grid must be at least 8x8, got " +
                                        std::to_string(mx) + "x" + std::to_string(my));
        if (!(lx > 0.0) || !(ly > 0.0))
            throw std::invalid_argument("MeshConfig: domain lengths must be positive");
    }

    /// Square mesh over a square domain.
    static MeshConfig square(int m, double length) { return {m, m, length, length}; }

    double dx() const { return lx / mx; }
    double dy() const { return ly / my; }
    /// Riemann-sum quadrature weight per node.
    double cell_area() const { return dx() * dy(); }
    int num_nodes() const { return mx * my; }

    Vec2 node_position(int i, int j) const { return {i * dx(), j * dy()}; }

    bool operator==(const MeshConfig& o) const {
        return mx == o.mx && my == o.my && lx == o.lx && ly == o.ly;
    }
};

/// 2-component vector field sampled on a periodic mesh. Stored as two
/// planes (x then y component), row index j slow, column index i fast,
/// which matches the FFT layout used by the spectral operators.
class MeshField {
public:
    MeshField() = default;
    explicit MeshField(const MeshConfig& cfg)
        : cfg_(cfg), ux_(static_cast<size_t>(cfg.num_nodes()), 0.0),
          uy_(static_cast<size_t>(cfg.num_nodes()), 0.0) {}

    const MeshConfig& config() const { return cfg_; }
    int mx() const { return cfg_.mx; }
    int my() const { return cfg_.my; }
    int num_nodes() const { return cfg_.num_nodes(); }

    size_t index(int i, int j) const { return static_cast<size_t>(j) * cfg_.mx + i; }

    double& ux(int i, int j) { return ux_[index(i, j)]; }
    double& uy(int i, int j) { return uy_[index(i, j)]; }
    double ux(int i, int j) const { return ux_[index(i, j)]; }
    double uy(int i, int j) const { return uy_[index(i, j)]; }

    Vec2 at(int i, int j) const { return {ux_[index(i, j)], uy_[index(i, j)]}; }
    void set(int i, int j, const Vec2& v) {
        ux_[index(i, j)] = v.x;
        uy_[index(i, j)] = v.y;
    }
    void add(int i, int j, const Vec2& v) {
        ux_[index(i, j)] += v.x;
        uy_[index(i, j)] += v.y;
    }

    std::vector<double>& x_plane() { return ux_; }
    std::vector<double>& y_plane() { return uy_; }
    const std::vector<double>& x_plane() const { return ux_; }
    const std::vector<double>& y_plane() const { return uy_; }

    void fill(const Vec2& v) {
        std::fill(ux_.begin(), ux_.end(), v.x);
        std::fill(uy_.begin(), uy_.end(), v.y);
    }

    MeshField& operator+=(const MeshField& o) {
        check_same_mesh(o);
        for (size_t k = 0; k < ux_.size(); ++k) { ux_[k] += o.ux_[k]; uy_[k] += o.uy_[k]; }
        return *this;
    }
    MeshField& operator-=(const MeshField& o) {
        check_same_mesh(o);
        for (size_t k = 0; k < ux_.size(); ++k) { ux_[k] -= o.ux_[k]; uy_[k] -= o.uy_[k]; }
        return *this;
    }
    MeshField& operator*=(double s) {
        for (size_t k = 0; k < ux_.size(); ++k) { ux_[k] *= s; uy_[k] *= s; }
        return *this;
    }

    bool all_finite() const {
        for (size_t k = 0; k < ux_.size(); ++k)
            if (!std::isfinite(ux_[k]) || !std::isfinite(uy_[k])) return false;
        return true;
    }

private:
    void check_same_mesh(const MeshField& o) const {
        if (!(cfg_ == o.cfg_))
            throw std::invalid_argument("MeshField: mesh configurations differ");
    }

    MeshConfig cfg_;
    std::vector<double> ux_, uy_;
};

inline MeshField operator+(MeshField a, const MeshField& b) { return a += b; }
inline MeshField operator-(MeshField a, const MeshField& b) { return a -= b; }
inline MeshField operator*(double s, MeshField a) { return a *= s; }

/// Unweighted nodewise inner product sum_k a_k . b_k.
inline double dot_nodewise(const MeshField& a, const MeshField& b) {
    double s = 0.0;
    const auto& ax = a.x_plane(); const auto& ay = a.y_plane();
    const auto& bx = b.x_plane(); const auto& by = b.y_plane();
    for (size_t k = 0; k < ax.size(); ++k) s += ax[k] * bx[k] + ay[k] * by[k];
    return s;
}

inline double max_abs(const MeshField& f) {
    double m = 0.0;
    for (double v : f.x_plane()) m = std::max(m, std::abs(v));
    for (double v : f.y_plane()) m = std::max(m, std::abs(v));
    return m;
}

} // namespace curvematch
