#pragma once

#include <cerrno>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "curvematch/geometry.hpp"
#include "curvematch/shape.hpp"

namespace curvematch {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Parse a CSV of 2-vectors: header "x,y", one "%.17g,%.17g" pair per line.
inline VectorList read_vec2_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    // tolerate trailing carriage return
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y") throw ParseError(path + ":1: expected header \"x,y\", got \"" + line + "\"");

    VectorList out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed line \"" + line + "\"");
        Vec2 v;
        size_t used_x = 0, used_y = 0;
        try {
            v.x = std::stod(line.substr(0, comma), &used_x);
            v.y = std::stod(line.substr(comma + 1), &used_y);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed line \"" + line + "\"");
        }
        auto rest_x = line.substr(0, comma).substr(used_x);
        auto rest_y = line.substr(comma + 1).substr(used_y);
        if (rest_x.find_first_not_of(" \t") != std::string::npos ||
            rest_y.find_first_not_of(" \t") != std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed line \"" + line + "\"");
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
            throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite value");
        out.push_back(v);
    }
    return out;
}

inline std::string format_vec2_csv(const VectorList& vecs) {
    std::string out = "x,y\n";
    char buf[80];
    for (const Vec2& v : vecs) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", v.x, v.y);
        out += buf;
    }
    return out;
}

/// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

} // namespace detail

/// Generic 2-vector CSV (momenta, normals, displacement data).
inline VectorList read_vectors(const std::string& path) { return detail::read_vec2_csv(path); }

inline void write_vectors(const VectorList& vecs, const std::string& path) {
    detail::write_file_atomic(path, detail::format_vec2_csv(vecs));
}

/// Curve CSV: like the vector CSV, cyclic order implied, no repeated
/// closing point. Rejects curves with fewer than 3 particles.
inline ParticleCurve read_curve(const std::string& path) {
    ParticleCurve curve{detail::read_vec2_csv(path)};
    if (curve.size() < 3)
        throw ParseError(path + ": curve needs at least 3 particles, got " +
                         std::to_string(curve.size()));
    validate_curve(curve);
    return curve;
}

inline void write_curve(const ParticleCurve& curve, const std::string& path) {
    detail::write_file_atomic(path, detail::format_vec2_csv(curve.points));
}

} // namespace curvematch
