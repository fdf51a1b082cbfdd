#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvematch/curve_io.hpp"
#include "curvematch/mesh.hpp"
#include "curvematch/shape.hpp"
#include "curvematch/shooting.hpp"

namespace curvematch {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Sectioned key = value file. '#' and ';' start comments. Every key a
/// command reads is marked consumed; leftovers are reported as unknown
/// keys so typos fail loudly instead of silently using a default.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        KeyValueFile kv;
        kv.path_ = path;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            const auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = strip(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(path + ":" + std::to_string(lineno) +
                                      ": malformed section header");
                section = strip(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (kv.values_.count(full))
                throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key " +
                                  full);
            kv.values_[full] = {value, lineno};
        }
        return kv;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.first;
    }

    std::optional<std::string> get_optional(const std::string& key) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second.first;
    }

    double get_double(const std::string& key, double fallback) {
        const auto raw = get_optional(key);
        if (!raw) return fallback;
        try {
            size_t used = 0;
            const double v = std::stod(*raw, &used);
            if (used != raw->size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected a number for " + key + ", got \"" +
                              *raw + "\"");
        }
    }

    int get_int(const std::string& key, int fallback) {
        const auto raw = get_optional(key);
        if (!raw) return fallback;
        try {
            size_t used = 0;
            const int v = std::stoi(*raw, &used);
            if (used != raw->size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected an integer for " + key + ", got \"" +
                              *raw + "\"");
        }
    }

    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) {
        const auto raw = get_optional(key);
        if (!raw) return fallback;
        std::vector<double> out;
        std::istringstream ss(*raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError(where(key) + ": expected comma-separated numbers for " + key);
            }
        }
        if (out.empty()) throw ConfigError(where(key) + ": empty list for " + key);
        return out;
    }

    /// Fail on any key that was present but never consumed.
    void finish() const {
        for (const auto& [key, value] : values_) {
            if (!consumed_.count(key))
                throw ConfigError(path_ + ":" + std::to_string(value.second) +
                                  ": unknown key " + key);
        }
    }

private:
    std::string where(const std::string& key) const {
        const auto it = values_.find(key);
        return path_ + ":" + (it == values_.end() ? "?" : std::to_string(it->second.second));
    }

    std::string path_;
    std::map<std::string, std::pair<std::string, int>> values_;
    std::set<std::string> consumed_;
};

} // namespace detail

/// One curve endpoint of a run: either an analytic generator or a CSV file.
struct CurveSpec {
    std::string kind = "circle";
    ShapeParams params;
    int n_points = 420;
    std::optional<Vec2> center;  // defaults to the domain center
    std::string path;            // kind == "file"

    ParticleCurve build(const MeshConfig& mesh, double alpha) const {
        const Vec2 c = center.value_or(Vec2{0.5 * mesh.lx, 0.5 * mesh.ly});
        if (kind == "file") {
            ParticleCurve curve = read_curve(path);
            check_domain_margin(curve, mesh, 4.0 * alpha);
            return curve;
        }
        ShapeKind sk;
        if (kind == "circle") sk = ShapeKind::Circle;
        else if (kind == "ellipse") sk = ShapeKind::Ellipse;
        else if (kind == "rounded_rectangle") sk = ShapeKind::RoundedRectangle;
        else throw ConfigError("unknown curve kind \"" + kind + "\"");
        return make_shape(sk, params, n_points, c, mesh, alpha);
    }
};

/// Everything a run needs, validated before any computation starts.
/// Defaults follow the reference experiment setup: 128x128 mesh on a
/// 2 pi x 2 pi domain, H^2 norm with alpha = 0.4, kernel alpha = 0.4
/// with power 2.
struct RunConfig {
    MeshConfig mesh = MeshConfig::square(128, 2.0 * M_PI);
    NormOperator norm_op{0.4, 2};
    KernelOperator kernel{0.4, 2};
    TimeGrid grid{20};
    StepOptions step_opts;

    CurveSpec source;
    std::optional<CurveSpec> target;
    std::optional<std::string> momentum_path;

    OptimMethod method = OptimMethod::NonlinearCG;
    int max_iters = 200;
    double grad_tol = 1e-8;
    std::optional<double> sigma;

    std::string output_dir = "out";
    std::vector<double> snapshot_times = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

    static RunConfig load(const std::string& path) {
        detail::KeyValueFile kv = detail::KeyValueFile::parse(path);
        RunConfig cfg;

        const int m = kv.get_int("mesh.m", 128);
        const double L = kv.get_double("mesh.L", 2.0 * M_PI);
        cfg.mesh = MeshConfig::square(m, L);

        cfg.norm_op = NormOperator(kv.get_double("norm.alpha", 0.4),
                                   kv.get_int("norm.power", 2));
        cfg.kernel = KernelOperator(kv.get_double("kernel.alpha", 0.4),
                                    kv.get_int("kernel.power", 2));
        cfg.grid = TimeGrid(kv.get_int("time.steps", 20));

        cfg.source = read_curve_spec(kv, "source", cfg.mesh);
        if (kv.has("target.kind") || kv.has("target.path"))
            cfg.target = read_curve_spec(kv, "target", cfg.mesh);

        const std::string method = kv.get_string("optimizer.method", "cg");
        if (method == "cg") cfg.method = OptimMethod::NonlinearCG;
        else if (method == "newton-cg") cfg.method = OptimMethod::NewtonCG;
        else throw ConfigError("optimizer.method must be \"cg\" or \"newton-cg\", got \"" +
                               method + "\"");
        cfg.max_iters = kv.get_int("optimizer.max_iters", 200);
        cfg.grad_tol = kv.get_double("optimizer.grad_tol", 1e-8);
        if (kv.has("optimizer.sigma")) {
            const double sigma = kv.get_double("optimizer.sigma", 0.0);
            if (!(sigma > 0.0)) throw ConfigError("optimizer.sigma must be > 0");
            cfg.sigma = sigma;
        }
        if (cfg.max_iters < 0) throw ConfigError("optimizer.max_iters must be >= 0");
        if (!(cfg.grad_tol > 0.0)) throw ConfigError("optimizer.grad_tol must be > 0");

        cfg.output_dir = kv.get_string("output.directory", "out");
        cfg.snapshot_times =
            kv.get_double_list("output.snapshots", {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
        for (double t : cfg.snapshot_times)
            if (t < 0.0 || t > 1.0)
                throw ConfigError("output.snapshots entries must lie in [0, 1]");

        if (kv.has("forward.momentum"))
            cfg.momentum_path = kv.get_string("forward.momentum", "");

        kv.finish();
        return cfg;
    }

    ShootingProblem make_problem() const {
        if (!target) throw ConfigError("config has no [target] section");
        ShootingProblem prob;
        prob.source = source.build(mesh, norm_op.alpha);
        prob.target = target->build(mesh, norm_op.alpha);
        prob.mesh = mesh;
        prob.norm_op = norm_op;
        prob.kernel = kernel;
        prob.grid = grid;
        prob.step_opts = step_opts;
        prob.method = method;
        prob.max_iters = max_iters;
        prob.grad_tol = grad_tol;
        prob.sigma = sigma;
        return prob;
    }

private:
    static CurveSpec read_curve_spec(detail::KeyValueFile& kv, const std::string& section,
                                     const MeshConfig& mesh) {
        CurveSpec spec;
        spec.kind = kv.get_string(section + ".kind", "circle");
        if (kv.has(section + ".center_x") || kv.has(section + ".center_y")) {
            spec.center = Vec2{kv.get_double(section + ".center_x", 0.5 * mesh.lx),
                               kv.get_double(section + ".center_y", 0.5 * mesh.ly)};
        }
        if (spec.kind == "file") {
            const auto p = kv.get_optional(section + ".path");
            if (!p) throw ConfigError(section + ".path is required for kind = file");
            spec.path = *p;
            return spec;
        }
        spec.n_points = kv.get_int(section + ".n_points", 420);
        if (spec.n_points < 3) throw ConfigError(section + ".n_points must be >= 3");
        if (spec.kind == "circle") {
            spec.params.radius = kv.get_double(section + ".radius", 0.8);
        } else if (spec.kind == "ellipse") {
            spec.params.semi_axis_x = kv.get_double(section + ".semi_axis_x", 1.2);
            spec.params.semi_axis_y = kv.get_double(section + ".semi_axis_y", 0.6);
        } else if (spec.kind == "rounded_rectangle") {
            spec.params.width = kv.get_double(section + ".width", 2.0);
            spec.params.height = kv.get_double(section + ".height", 1.0);
            spec.params.corner_radius = kv.get_double(section + ".corner_radius", 0.2);
        } else {
            throw ConfigError(section + ".kind must be circle, ellipse, rounded_rectangle "
                              "or file, got \"" + spec.kind + "\"");
        }
        return spec;
    }
};

} // namespace curvematch
