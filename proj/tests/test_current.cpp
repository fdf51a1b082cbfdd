#include <algorithm>
#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "curvematch/current.hpp"
#include "oracle_dense.hpp"

using namespace curvematch;

namespace {

ParticleCurve random_blob(std::mt19937_64& rng, const Vec2& center, double scale,
                          size_t n) {
    std::uniform_real_distribution<double> radial(0.5 * scale, scale);
    ParticleCurve curve;
    for (size_t i = 0; i < n; ++i) {
        const double th = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
        const double r = radial(rng);
        curve.points.push_back(center + Vec2{r * std::cos(th), r * std::sin(th)});
    }
    return curve;
}

ParticleCurve rolled(const ParticleCurve& curve, size_t shift) {
    ParticleCurve out = curve;
    std::rotate(out.points.begin(),
                out.points.begin() + static_cast<std::ptrdiff_t>(shift),
                out.points.end());
    return out;
}

} // namespace

TEST_CASE("singular current is invariant under cyclic relabeling") {
    const MeshConfig cfg = MeshConfig::square(16, 2.0 * M_PI);
    std::mt19937_64 rng(1);
    const ParticleCurve curve = random_blob(rng, {M_PI, M_PI}, 1.0, 14);
    const MeshField base = singular_current(curve, cfg);
    const MeshField shifted = singular_current(rolled(curve, 5), cfg);
    const double scale = std::max(1.0, max_abs(base));
    for (int j = 0; j < cfg.my; ++j)
        for (int i = 0; i < cfg.mx; ++i)
            CHECK(norm_inf(shifted.at(i, j) - base.at(i, j)) <= 1e-13 * scale);
}

TEST_CASE("orientation reversal negates the forward-edge current") {
    // Reversing the point order turns the backward edge at particle i
    // into the negated forward edge of the original curve, weighted at
    // the same particle. The reversed current therefore equals minus
    // the forward-edge spread exactly, and the plain current only up to
    // the edge length.
    const MeshConfig cfg = MeshConfig::square(16, 2.0 * M_PI);
    std::mt19937_64 rng(2);
    const ParticleCurve curve = random_blob(rng, {M_PI, M_PI}, 1.0, 11);
    const size_t n = curve.size();
    ParticleCurve reversed;
    for (size_t i = 0; i < n; ++i) reversed.points.push_back(curve[(n - i) % n]);

    VectorList forward_edges(n);
    for (size_t b = 0; b < n; ++b) forward_edges[b] = curve[(b + 1) % n] - curve[b];
    const MeshField fwd = spread_to_mesh(forward_edges, curve.points, cfg);

    const MeshField rev = singular_current(reversed, cfg);
    const double scale = std::max(1.0, max_abs(fwd));
    for (int j = 0; j < cfg.my; ++j)
        for (int i = 0; i < cfg.mx; ++i)
            CHECK(norm_inf(rev.at(i, j) + fwd.at(i, j)) <= 1e-13 * scale);
}

TEST_CASE("self mismatch is exactly zero") {
    const MeshConfig cfg = MeshConfig::square(32, 2.0 * M_PI);
    const KernelOperator kernel(0.4, 2);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const ParticleCurve curve = random_blob(rng, {M_PI, M_PI}, 1.2, 20);
        CHECK(mismatch(curve, curve, kernel, cfg) == 0.0);
    }
}

TEST_CASE("mismatch is symmetric, nonnegative, and relabeling-invariant") {
    const MeshConfig cfg = MeshConfig::square(32, 2.0 * M_PI);
    const KernelOperator kernel(0.4, 2);
    std::mt19937_64 rng(4);

    // Reference scale for the absolute invariance bound.
    const ParticleCurve ra = random_blob(rng, {M_PI, M_PI}, 1.0, 16);
    const ParticleCurve rb = random_blob(rng, {M_PI, M_PI}, 1.0, 16);
    const double fscale = mismatch(ra, rb, kernel, cfg);

    for (int trial = 0; trial < 100; ++trial) {
        const ParticleCurve a = random_blob(rng, {M_PI, M_PI}, 1.2, 12 + trial % 9);
        const ParticleCurve b = random_blob(rng, {M_PI, M_PI}, 1.0, 10 + trial % 7);
        const double fab = mismatch(a, b, kernel, cfg);
        CHECK(fab >= 0.0);
        CHECK(std::abs(fab - mismatch(b, a, kernel, cfg)) <= 1e-12 * std::max(1.0, fab));
        const double fshift =
            mismatch(rolled(a, 1 + trial % (a.size() - 1)), b, kernel, cfg);
        CHECK(std::abs(fab - fshift) <= 1e-13 * std::max(fscale, fab));
    }
}

TEST_CASE("mismatch matches the dense kernel-matrix oracle") {
    const MeshConfig cfg = MeshConfig::square(16, 2.0 * M_PI);
    const KernelOperator kernel(0.4, 2);
    const Eigen::MatrixXd K =
        oracle::dense_operator(cfg, [&](double k2) { return kernel.multiplier(k2); });

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const ParticleCurve a = random_blob(rng, {M_PI, M_PI}, 1.2, 9);
        const ParticleCurve b = random_blob(rng, {M_PI - 0.3, M_PI + 0.2}, 0.9, 7);
        const double lib = mismatch(a, b, kernel, cfg);
        const double ref = oracle::mismatch(a, b, K, cfg);
        CAPTURE(trial, lib, ref);
        CHECK(std::abs(lib - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("mismatch gradient agrees with central finite differences") {
    const MeshConfig cfg = MeshConfig::square(24, 2.0 * M_PI);
    const KernelOperator kernel(0.4, 2);
    std::mt19937_64 rng(6);
    const ParticleCurve a = random_blob(rng, {M_PI, M_PI}, 1.1, 10);
    const ParticleCurve b = random_blob(rng, {M_PI + 0.2, M_PI - 0.1}, 0.9, 12);

    const VectorList grad = mismatch_gradient(a, b, kernel, cfg);
    REQUIRE(grad.size() == a.size());

    double gscale = 0.0;
    for (const Vec2& g : grad) gscale = std::max(gscale, norm_inf(g));

    const double h = 1e-6;
    for (size_t beta = 0; beta < a.size(); ++beta) {
        for (int comp = 0; comp < 2; ++comp) {
            ParticleCurve plus = a, minus = a;
            if (comp == 0) {
                plus.points[beta].x += h;
                minus.points[beta].x -= h;
            } else {
                plus.points[beta].y += h;
                minus.points[beta].y -= h;
            }
            const double fd =
                (mismatch(plus, b, kernel, cfg) - mismatch(minus, b, kernel, cfg)) /
                (2.0 * h);
            const double an = comp == 0 ? grad[beta].x : grad[beta].y;
            CAPTURE(beta, comp, an, fd);
            CHECK(std::abs(an - fd) <= 1e-6 * std::max(1.0, gscale));
        }
    }
}

TEST_CASE("gradient of the self mismatch vanishes") {
    const MeshConfig cfg = MeshConfig::square(16, 2.0 * M_PI);
    const KernelOperator kernel(0.4, 2);
    std::mt19937_64 rng(7);
    const ParticleCurve a = random_blob(rng, {M_PI, M_PI}, 1.0, 9);
    for (const Vec2& g : mismatch_gradient(a, a, kernel, cfg))
        CHECK(norm_inf(g) == 0.0);
}

TEST_CASE("distinct curves have positive mismatch") {
    const MeshConfig cfg = MeshConfig::square(32, 2.0 * M_PI);
    const KernelOperator kernel(0.4, 2);
    const ParticleCurve circle =
        make_shape(ShapeKind::Circle, ShapeParams{.radius = 0.8}, 30, {M_PI, M_PI});
    const ParticleCurve ellipse = make_shape(
        ShapeKind::Ellipse, ShapeParams{.semi_axis_x = 1.2, .semi_axis_y = 0.6}, 30,
        {M_PI, M_PI});
    CHECK(mismatch(circle, ellipse, kernel, cfg) > 1e-6);
}
