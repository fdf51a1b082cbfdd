// Command-line front end: match curves by geodesic shooting, replay
// forward flows, transport deformation grids, and self-check invariants.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curvematch/curve_io.hpp"
#include "curvematch/current.hpp"
#include "curvematch/field_io.hpp"
#include "curvematch/flow.hpp"
#include "curvematch/runconfig.hpp"
#include "curvematch/shooting.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace curvematch;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;        // config or input validation failures
constexpr int kNumerical = 2;    // solver blow-ups, non-finite data, IO during a run
constexpr int kNoConverge = 3;   // optimizer hit its limits; outputs are still written

std::string time_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", t);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Map a snapshot time in [0, 1] to the nearest stored state index.
int snapshot_index(double t, int steps) {
    return static_cast<int>(std::llround(t * steps));
}

void write_history_csv(const std::string& path, const std::vector<double>& objective,
                       const std::vector<double>& grad_norm) {
    std::string body = "iter,objective,grad_norm\n";
    for (size_t i = 0; i < objective.size(); ++i) {
        body += std::to_string(i) + "," + format_double(objective[i]) + "," +
                format_double(grad_norm[i]) + "\n";
    }
    detail::write_file_atomic(path, body);
}

void write_conservation_csv(const std::string& path, const Trajectory& traj,
                            const EdgeVectors& edges0) {
    const VectorList ref = relabelling_momentum(traj.initial());
    double pscale = 0.0, tscale = 0.0;
    for (size_t b = 0; b < ref.size(); ++b) {
        pscale = std::max(pscale, norm(traj.initial().P[b]));
        tscale = std::max(tscale, norm(traj.initial().P[b]) * norm(edges0[b]));
    }
    if (pscale == 0.0) pscale = 1.0;
    if (tscale == 0.0) tscale = 1.0;

    std::string body = "step,hamiltonian,relabel_drift,tangential_max\n";
    for (size_t n = 0; n < traj.states.size(); ++n) {
        const VectorList rel = relabelling_momentum(traj.states[n]);
        const std::vector<double> tan = tangential_component(traj.states[n], edges0);
        double drift = 0.0, tmax = 0.0;
        for (size_t b = 0; b < rel.size(); ++b) {
            drift = std::max(drift, norm_inf(rel[b] - ref[b]) / pscale);
            tmax = std::max(tmax, std::abs(tan[b]) / tscale);
        }
        body += std::to_string(n) + "," + format_double(traj.hamiltonians[n]) + "," +
                format_double(drift) + "," + format_double(tmax) + "\n";
    }
    detail::write_file_atomic(path, body);
}

/// Per-snapshot files: particle positions, momenta, and the transported
/// initial edge vectors J_b dQ0_b.
void write_snapshots(const fs::path& dir, const std::vector<double>& times,
                     const Trajectory& traj, const EdgeVectors& edges0) {
    for (double t : times) {
        const int idx = snapshot_index(t, traj.steps());
        const PhaseState& s = traj.states[static_cast<size_t>(idx)];
        const std::string label = time_label(t);
        write_curve(ParticleCurve{s.Q}, (dir / ("curve_t" + label + ".csv")).string());
        write_vectors(s.P, (dir / ("momentum_t" + label + ".csv")).string());
        VectorList dq(s.size());
        for (size_t b = 0; b < s.size(); ++b) dq[b] = apply(s.J[b], edges0[b]);
        write_vectors(dq, (dir / ("dQ_t" + label + ".csv")).string());
    }
}

void write_velocity_series(const fs::path& dir, const Trajectory& traj) {
    for (int n = 0; n < traj.steps(); ++n)
        write_field(traj.velocities[static_cast<size_t>(n)],
                    (dir / ("velocity_" + std::to_string(n) + ".field")).string());
}

json conservation_json(const ConservationReport& rep) {
    return json{{"relabel_drift", rep.relabel_drift},
                {"tangential_max", rep.tangential_max},
                {"hamiltonian_drift", rep.hamiltonian_drift}};
}

void write_summary(const fs::path& dir, const json& summary) {
    detail::write_file_atomic((dir / "summary.json").string(), summary.dump(2) + "\n");
}

int cmd_match(const std::string& config_path) {
    const RunConfig cfg = RunConfig::load(config_path);
    const ShootingProblem prob = cfg.make_problem();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    const OptimResult res = minimize(prob, ControlVector::zeros(prob.source.points.size()));

    const EdgeVectors edges0 = edge_vectors(prob.source);
    write_history_csv((dir / "history.csv").string(), res.objective_history,
                      res.grad_norm_history);
    write_snapshots(dir, cfg.snapshot_times, res.trajectory, edges0);
    write_conservation_csv((dir / "conservation.csv").string(), res.trajectory, edges0);
    write_velocity_series(dir, res.trajectory);

    json summary{{"command", "match"},
                 {"converged", res.converged},
                 {"iterations", res.iterations},
                 {"message", res.message},
                 {"objective_initial", res.objective_history.front()},
                 {"objective_final", res.objective_history.back()},
                 {"grad_norm_final", res.grad_norm_history.back()},
                 {"n_particles", prob.source.points.size()},
                 {"steps", prob.grid.steps},
                 {"conservation", conservation_json(res.conservation)}};
    if (res.objective_history.back() > 0.0)
        summary["reduction_factor"] =
            res.objective_history.front() / res.objective_history.back();
    write_summary(dir, summary);

    std::cout << "match: objective " << format_double(res.objective_history.front())
              << " -> " << format_double(res.objective_history.back()) << " in "
              << res.iterations << " iterations ("
              << (res.converged ? "converged" : res.message) << ")\n";
    return res.converged ? kOk : kNoConverge;
}

int cmd_forward(const std::string& config_path) {
    const RunConfig cfg = RunConfig::load(config_path);
    if (!cfg.momentum_path)
        throw ConfigError("forward requires forward.momentum (a CSV of initial momenta)");
    const ParticleCurve source = cfg.source.build(cfg.mesh, cfg.norm_op.alpha);
    const VectorList P0 = read_vectors(*cfg.momentum_path);
    if (P0.size() != source.points.size())
        throw ConfigError("momentum file " + *cfg.momentum_path + " has " +
                          std::to_string(P0.size()) + " rows but the curve has " +
                          std::to_string(source.points.size()) + " particles");

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    const Trajectory traj =
        integrate(source.points, P0, cfg.grid, cfg.norm_op, cfg.mesh, cfg.step_opts);

    const EdgeVectors edges0 = edge_vectors(source);
    write_snapshots(dir, cfg.snapshot_times, traj, edges0);
    write_conservation_csv((dir / "conservation.csv").string(), traj, edges0);
    write_velocity_series(dir, traj);

    const ConservationReport rep = conservation_report(traj, edges0);
    json summary{{"command", "forward"},
                 {"steps", traj.steps()},
                 {"n_particles", source.points.size()},
                 {"hamiltonian_initial", traj.hamiltonians.front()},
                 {"hamiltonian_final", traj.hamiltonians.back()},
                 {"conservation", conservation_json(rep)}};
    write_summary(dir, summary);

    std::cout << "forward: " << traj.steps() << " steps, Hamiltonian drift "
              << format_double(rep.hamiltonian_drift) << "\n";
    return kOk;
}

/// Sample points along equispaced vertical and horizontal grid lines,
/// one sample every half mesh cell.
PointList seed_gridlines(const MeshConfig& mesh, double spacing) {
    PointList pts;
    const int nv = 2 * mesh.my;
    const int nh = 2 * mesh.mx;
    for (double x = 0.0; x < mesh.lx - 1e-12; x += spacing)
        for (int j = 0; j < nv; ++j)
            pts.push_back({x, j * mesh.ly / nv});
    for (double y = 0.0; y < mesh.ly - 1e-12; y += spacing)
        for (int i = 0; i < nh; ++i)
            pts.push_back({i * mesh.lx / nh, y});
    return pts;
}

int cmd_deform_grid(const std::string& config_path, std::string trajectory_dir,
                    double spacing) {
    const RunConfig cfg = RunConfig::load(config_path);
    if (trajectory_dir.empty()) trajectory_dir = cfg.output_dir;
    if (spacing <= 0.0) spacing = cfg.mesh.lx / 8.0;
    if (spacing > std::min(cfg.mesh.lx, cfg.mesh.ly))
        throw ConfigError("grid-line spacing " + format_double(spacing) +
                          " exceeds the domain size");

    Trajectory traj;
    for (int n = 0;; ++n) {
        const fs::path f = fs::path(trajectory_dir) / ("velocity_" + std::to_string(n) +
                                                       ".field");
        if (!fs::exists(f)) break;
        traj.velocities.push_back(read_field(f.string()));
        if (!(traj.velocities.back().config() == cfg.mesh))
            throw ConfigError(f.string() + ": mesh does not match the config");
    }
    if (traj.velocities.empty())
        throw ConfigError("no velocity fields (velocity_0.field ...) found in " +
                          trajectory_dir);

    const PointList seeds = seed_gridlines(cfg.mesh, spacing);
    const std::vector<PointList> series = transport_points(seeds, traj);
    PointList finals(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i) finals[i] = series[i].back();

    const fs::path dir(trajectory_dir);
    write_vectors(seeds, (dir / "gridlines_initial.csv").string());
    write_vectors(finals, (dir / "gridlines_final.csv").string());
    std::cout << "deform-grid: transported " << seeds.size() << " points through "
              << traj.velocities.size() << " steps\n";
    return kOk;
}

/// Quick invariant suite on a tiny problem; prints one pass/fail line per
/// check so a fresh build can be sanity-checked without the test suite.
int cmd_check() {
    const MeshConfig mesh = MeshConfig::square(16, 2.0 * M_PI);
    const NormOperator norm_op(0.4, 2);
    const KernelOperator kernel(0.4, 2);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
    std::normal_distribution<double> gauss(0.0, 1.0);

    bool all_ok = true;
    const auto report = [&](const std::string& name, double err, double tol) {
        const bool ok = err <= tol && std::isfinite(err);
        all_ok = all_ok && ok;
        std::printf("%s %-34s max error %.3e (tol %.0e)\n", ok ? "PASS" : "FAIL",
                    name.c_str(), err, tol);
    };

    {
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            const double g = unif(rng);
            double wsum = 0.0, dsum = 0.0;
            const double base = std::floor(g) - 1.0;
            for (int t = 0; t < 4; ++t) {
                wsum += bspline_weight(g - (base + t));
                dsum += bspline_weight_deriv(g - (base + t));
            }
            worst = std::max(worst, std::abs(wsum - 1.0));
            worst = std::max(worst, std::abs(dsum));
        }
        report("b-spline partition of unity", worst, 1e-12);
    }
    {
        PointList Q(12);
        VectorList P(12);
        MeshField w(mesh);
        for (auto& q : Q) q = {unif(rng), unif(rng)};
        for (auto& p : P) p = {gauss(rng), gauss(rng)};
        for (int j = 0; j < mesh.my; ++j)
            for (int i = 0; i < mesh.mx; ++i)
                w.set(i, j, {gauss(rng), gauss(rng)});
        const MeshField spread = spread_to_mesh(P, Q, mesh);
        const VectorList interp = interp_to_points(w, Q);
        double lhs = dot_nodewise(spread, w), rhs = 0.0;
        for (size_t b = 0; b < Q.size(); ++b) rhs += dot(P[b], interp[b]);
        report("spread/interp adjointness", std::abs(lhs - rhs) / std::abs(rhs), 1e-12);
    }
    {
        MeshField f(mesh);
        for (int j = 0; j < mesh.my; ++j)
            for (int i = 0; i < mesh.mx; ++i)
                f.set(i, j, {gauss(rng), gauss(rng)});
        const MeshField round = invert_metric(apply_metric(f, norm_op), norm_op);
        double worst = 0.0;
        for (int j = 0; j < mesh.my; ++j)
            for (int i = 0; i < mesh.mx; ++i)
                worst = std::max(worst, norm_inf(round.at(i, j) - f.at(i, j)));
        report("metric roundtrip", worst / max_abs(f), 1e-12);
    }
    {
        const ParticleCurve a =
            make_shape(ShapeKind::Circle, ShapeParams{.radius = 0.8}, 24, {M_PI, M_PI});
        const double self = mismatch(a, a, kernel, mesh);
        ParticleCurve shifted = a;
        std::rotate(shifted.points.begin(), shifted.points.begin() + 7,
                    shifted.points.end());
        const ParticleCurve b = make_shape(
            ShapeKind::Ellipse, ShapeParams{.semi_axis_x = 1.1, .semi_axis_y = 0.7}, 24,
            {M_PI, M_PI});
        const double fab = mismatch(a, b, kernel, mesh);
        const double fshift = mismatch(shifted, b, kernel, mesh);
        const double err =
            std::max(std::abs(self), std::abs(fab - fshift) / std::max(fab, 1e-300));
        report("current mismatch invariances", err, 1e-13);
    }
    {
        const ParticleCurve c =
            make_shape(ShapeKind::Circle, ShapeParams{.radius = 0.9}, 10, {M_PI, M_PI});
        VectorList P0(c.points.size());
        for (auto& p : P0) p = {0.2 * gauss(rng), 0.2 * gauss(rng)};
        const Trajectory traj = integrate(c.points, P0, TimeGrid(5), norm_op, mesh);
        const ConservationReport rep = conservation_report(traj, edge_vectors(c));
        report("relabelling momentum drift", rep.relabel_drift, 1e-10);
    }
    {
        ShootingProblem prob;
        prob.source =
            make_shape(ShapeKind::Circle, ShapeParams{.radius = 0.8}, 6, {M_PI, M_PI});
        prob.target = make_shape(
            ShapeKind::Ellipse, ShapeParams{.semi_axis_x = 1.0, .semi_axis_y = 0.6}, 6,
            {M_PI, M_PI});
        prob.mesh = mesh;
        prob.norm_op = norm_op;
        prob.kernel = kernel;
        prob.grid = TimeGrid(2);
        ControlVector x = ControlVector::zeros(6);
        for (auto& v : x.p) v = 0.3 * gauss(rng);
        const ControlVector g = gradient(x, prob);
        double worst = 0.0;
        const double eps = 1e-6;
        for (size_t i = 0; i < x.size(); ++i) {
            ControlVector xp = x, xm = x;
            xp.p[i] += eps;
            xm.p[i] -= eps;
            const double fd =
                (objective(xp, prob).first - objective(xm, prob).first) / (2.0 * eps);
            worst = std::max(worst, std::abs(g.p[i] - fd));
        }
        double gscale = 0.0;
        for (double v : g.p) gscale = std::max(gscale, std::abs(v));
        report("shooting gradient vs FD", worst / std::max(gscale, 1e-300), 1e-6);
    }

    std::cout << (all_ok ? "check: all invariants hold\n"
                         : "check: at least one invariant FAILED\n");
    return all_ok ? kOk : kNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffeomorphic curve matching by geodesic particle shooting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string trajectory_dir;
    double spacing = 0.0;

    CLI::App* match = app.add_subcommand("match", "Optimize initial momenta to match curves");
    match->add_option("config", config_path, "run configuration file")->required();

    CLI::App* forward = app.add_subcommand("forward", "Integrate a flow from given momenta");
    forward->add_option("config", config_path, "run configuration file")->required();

    CLI::App* deform = app.add_subcommand(
        "deform-grid", "Transport grid lines through a stored trajectory");
    deform->add_option("config", config_path, "run configuration file")->required();
    deform->add_option("--trajectory", trajectory_dir,
                       "directory with stored velocity fields (default: output directory)");
    deform->add_option("--spacing", spacing, "grid-line spacing (default: L/8)");

    CLI::App* check = app.add_subcommand("check", "Run the invariant self-test suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (match->parsed()) return cmd_match(config_path);
        if (forward->parsed()) return cmd_forward(config_path);
        if (deform->parsed()) return cmd_deform_grid(config_path, trajectory_dir, spacing);
        if (check->parsed()) return cmd_check();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kUsage;
    } catch (const FixedPointError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}
