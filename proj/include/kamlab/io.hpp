#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kamlab/rng.hpp"
#include "kamlab/torus.hpp"

namespace kamlab {

// shortest round-trip decimal form, locale-independent
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// write-then-rename so readers never observe a partial file
inline void write_file_atomic(const std::filesystem::path& path, const std::string& body) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << body;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::uint64_t file_hash(const std::filesystem::path& path) {
    std::string body = read_file(path);
    return fnv1a(body.data(), body.size());
}

// fields/measures: coordinate column(s) then one column per named field
inline std::string fields_csv(const TorusGrid& grid,
                              const std::vector<std::pair<std::string, const GridField*>>& cols) {
    std::ostringstream out;
    out << (grid.dim == 1 ? "x" : "x1,x2");
    for (const auto& [name, f] : cols) out << ',' << name;
    out << '\n';
    for (int i = 0; i < grid.size(); ++i) {
        Vec2 p = grid.point(i);
        out << fmt(p[0]);
        if (grid.dim == 2) out << ',' << fmt(p[1]);
        for (const auto& [name, f] : cols) out << ',' << fmt((*f)[i]);
        out << '\n';
    }
    return out.str();
}

inline std::string matrix_csv(const TorusGrid& grid, const std::vector<double>& m,
                              const std::string& value_name) {
    std::ostringstream out;
    if (grid.dim == 1)
        out << "y,x," << value_name << '\n';
    else
        out << "y1,y2,x1,x2," << value_name << '\n';
    const int n = grid.size();
    for (int y = 0; y < n; ++y) {
        Vec2 py = grid.point(y);
        for (int x = 0; x < n; ++x) {
            Vec2 px = grid.point(x);
            out << fmt(py[0]);
            if (grid.dim == 2) out << ',' << fmt(py[1]);
            out << ',' << fmt(px[0]);
            if (grid.dim == 2) out << ',' << fmt(px[1]);
            out << ',' << fmt(m[std::size_t(y) * n + x]) << '\n';
        }
    }
    return out.str();
}

} // namespace kamlab
