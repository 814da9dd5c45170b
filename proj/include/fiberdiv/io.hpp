#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fiberdiv/analysis.hpp"
#include "fiberdiv/geometry.hpp"

namespace fiberdiv {

class UnsupportedDimension : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
    os.flush();
    if (!os) throw IoError("write to '" + path + "' failed");
}

} // namespace detail

/// depth,i1..in,lo1..lon,hi1..hin with one row per voxel (half-open bounds).
inline std::string leaves_csv(const Box& root, std::span<const DyadicVoxel> leaves) {
    const int n = root.dim();
    std::string out = "depth";
    for (const char* col : {"i", "lo", "hi"})
        for (int i = 1; i <= n; ++i) out += "," + std::string(col) + std::to_string(i);
    out += '\n';
    for (const auto& v : leaves) {
        const Box b = bounds(root, v);
        out += std::to_string(v.depth);
        for (auto i : v.index) out += "," + std::to_string(i);
        for (double x : b.lo) out += "," + detail::g17(x);
        for (double x : b.hi) out += "," + detail::g17(x);
        out += '\n';
    }
    return out;
}

/// Root outline as a path plus one <rect> per voxel; y grows upward in the drawing.
inline std::string leaves_svg(const Box& root, std::span<const DyadicVoxel> leaves, double size_px = 800.0) {
    if (root.dim() != 2) throw UnsupportedDimension("SVG export needs n = 2, got n = " + std::to_string(root.dim()));
    const double w = root.hi[0] - root.lo[0];
    const double h = root.hi[1] - root.lo[1];
    const double scale = size_px / std::max(w, h);
    const double pad = 4.0;
    const double width = w * scale + 2 * pad;
    const double height = h * scale + 2 * pad;
    auto sx = [&](double x) { return pad + (x - root.lo[0]) * scale; };
    auto sy = [&](double y) { return pad + (root.hi[1] - y) * scale; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::g17(width) << "\" height=\""
       << detail::g17(height) << "\" viewBox=\"0 0 " << detail::g17(width) << ' ' << detail::g17(height) << "\">\n";
    os << "<path d=\"M " << detail::g17(sx(root.lo[0])) << ' ' << detail::g17(sy(root.lo[1])) << " H "
       << detail::g17(sx(root.hi[0])) << " V " << detail::g17(sy(root.hi[1])) << " H " << detail::g17(sx(root.lo[0]))
       << " Z\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (const auto& v : leaves) {
        const Box b = bounds(root, v);
        os << "<rect x=\"" << detail::g17(sx(b.lo[0])) << "\" y=\"" << detail::g17(sy(b.hi[1])) << "\" width=\""
           << detail::g17((b.hi[0] - b.lo[0]) * scale) << "\" height=\"" << detail::g17((b.hi[1] - b.lo[1]) * scale)
           << "\" fill=\"steelblue\" fill-opacity=\"0.5\" stroke=\"navy\" stroke-width=\"0.25\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

enum class LeafFormat { csv, svg };

inline void export_leaves(const Box& root, std::span<const DyadicVoxel> leaves, const std::string& path, LeafFormat format) {
    detail::write_file(path, format == LeafFormat::csv ? leaves_csv(root, leaves) : leaves_svg(root, leaves));
}

inline void export_leaves(const SubdivisionResult& r, const std::string& path, LeafFormat format) {
    export_leaves(r.root, r.leaves, path, format);
}

/// Stable field names; timing fields are "seconds", "total_seconds" and "alpha_M".
inline nlohmann::ordered_json stats_json(const ComplexityReport& rep, const CoverageReport* coverage = nullptr) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["n"] = rep.n;
    j["m"] = rep.m;
    j["delta0"] = rep.delta0;
    j["delta"] = rep.delta;
    j["N"] = rep.depth;
    j["d"] = rep.d;
    j["root_excluded"] = rep.root_excluded;
    ordered_json levels = ordered_json::array();
    for (const auto& r : rep.rows)
        levels.push_back({{"t", r.t}, {"count", r.count}, {"mu_d", r.mu_d}, {"evals", r.evals}, {"seconds", r.seconds}});
    j["levels"] = levels;
    j["total_evals"] = rep.total_evals;
    j["leaves"] = rep.leaves;
    j["total_seconds"] = rep.total_seconds;
    j["evals_per_leaf"] = rep.evals_per_leaf;
    j["output_constant"] = rep.output_constant;
    if (rep.fit) {
        j["slope"] = rep.fit->slope;
        j["intercept"] = rep.fit->intercept;
        j["r_squared"] = rep.fit->r_squared;
        j["fit_range"] = {rep.fit->fit_range.t_min, rep.fit->fit_range.t_max};
    } else {
        j["slope"] = nullptr;
        j["intercept"] = nullptr;
        j["r_squared"] = nullptr;
        j["fit_range"] = nullptr;
    }
    if (rep.measure) {
        j["measure_estimate"] = rep.measure->final_value;
        j["plateau_ratio"] = rep.measure->plateau_ratio ? ordered_json(*rep.measure->plateau_ratio) : ordered_json(nullptr);
        j["measure_caveat"] = "box-counting estimate; axis-cube covers overestimate H^d by a bounded shape factor";
    } else {
        j["measure_estimate"] = nullptr;
        j["plateau_ratio"] = nullptr;
    }
    j["alpha_M"] = rep.alpha;
    if (rep.dense) {
        j["dense"] = {{"cells", rep.dense->cells},
                      {"evals", rep.dense->evals},
                      {"flagged", rep.dense->flagged},
                      {"seconds", rep.dense->seconds},
                      {"ratio", rep.dense->eval_ratio},
                      {"leaves_match", rep.dense->leaves_match}};
    } else {
        j["dense"] = nullptr;
    }
    if (coverage) {
        ordered_json lv = ordered_json::array();
        for (const auto& l : coverage->levels)
            lv.push_back({{"t", l.t},
                          {"covered", l.covered},
                          {"missed", l.missed},
                          {"max_center_distance", l.max_center_distance},
                          {"bound", l.center_distance_bound}});
        j["coverage"] = {{"samples", coverage->samples}, {"pass", coverage->pass}, {"diagnosis", coverage->diagnosis}, {"levels", lv}};
    }
    return j;
}

inline void export_stats(const ComplexityReport& rep, const std::string& path, const CoverageReport* coverage = nullptr) {
    detail::write_file(path, stats_json(rep, coverage).dump(2) + "\n");
}

} // namespace fiberdiv
