#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "curvematch/mesh.hpp"

namespace curvematch {

/// Binary mesh-field file: one text header line
///   curvematch-field <mx> <my> <lx> <ly>
/// followed by raw little-endian doubles, x plane then y plane. Used to
/// replay stored velocity series without re-solving the flow.
inline void write_field(const MeshField& field, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        char header[128];
        std::snprintf(header, sizeof(header), "curvematch-field %d %d %.17g %.17g\n",
                      field.mx(), field.my(), field.config().lx, field.config().ly);
        out << header;
        out.write(reinterpret_cast<const char*>(field.x_plane().data()),
                  static_cast<std::streamsize>(field.x_plane().size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(field.y_plane().data()),
                  static_cast<std::streamsize>(field.y_plane().size() * sizeof(double)));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

inline MeshField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open field file " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error(path + ": missing header");
    std::istringstream hs(header);
    std::string magic;
    int mx = 0, my = 0;
    double lx = 0.0, ly = 0.0;
    hs >> magic >> mx >> my >> lx >> ly;
    if (magic != "curvematch-field" || !hs)
        throw std::runtime_error(path + ": not a curvematch field file");
    MeshField field(MeshConfig(mx, my, lx, ly));
    in.read(reinterpret_cast<char*>(field.x_plane().data()),
            static_cast<std::streamsize>(field.x_plane().size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(field.y_plane().data()),
            static_cast<std::streamsize>(field.y_plane().size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated field data");
    return field;
}

} // namespace curvematch
