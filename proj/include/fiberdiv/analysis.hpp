#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fiberdiv/densegrid.hpp"
#include "fiberdiv/geometry.hpp"
#include "fiberdiv/subdivide.hpp"

namespace fiberdiv {

class InsufficientLevels : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ZeroCount : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SampleOutsideRoot : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class MismatchedRuns : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct FitRange {
    int t_min = 0;
    int t_max = 0;
};

/// Least-squares line through (t, log2 |Q_t|). The slope estimates the dimension.
struct DimensionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    FitRange fit_range;
};

/// The deepest `levels` levels, dropping any whose count is below `min_count`.
inline FitRange default_fit_range(std::span<const LevelStats> levels, int deepest = 5, std::uint64_t min_count = 8) {
    if (levels.empty()) throw InsufficientLevels("no levels recorded");
    const int t_last = levels.back().t;
    int t_first = std::max(levels.front().t, t_last - deepest + 1);
    for (const auto& l : levels)
        if (l.t >= t_first && l.count < min_count) t_first = l.t + 1;
    if (t_last - t_first < 2)
        throw InsufficientLevels("fewer than 3 usable levels among the deepest " + std::to_string(deepest));
    return {t_first, t_last};
}

inline DimensionFit fit_dimension(std::span<const LevelStats> levels, FitRange range) {
    if (range.t_max - range.t_min < 2) throw InsufficientLevels("fit range must span at least 3 levels");
    std::vector<double> ts;
    std::vector<double> ys;
    for (const auto& l : levels) {
        if (l.t < range.t_min || l.t > range.t_max) continue;
        if (l.count == 0) throw ZeroCount("level " + std::to_string(l.t) + " is empty");
        ts.push_back(static_cast<double>(l.t));
        ys.push_back(std::log2(static_cast<double>(l.count)));
    }
    if (ts.size() < 3) throw InsufficientLevels("fewer than 3 levels inside the fit range");

    const double k = static_cast<double>(ts.size());
    double t_mean = 0.0;
    double y_mean = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        t_mean += ts[i];
        y_mean += ys[i];
    }
    t_mean /= k;
    y_mean /= k;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        sxy += (ts[i] - t_mean) * (ys[i] - y_mean);
        sxx += (ts[i] - t_mean) * (ts[i] - t_mean);
        syy += (ys[i] - y_mean) * (ys[i] - y_mean);
    }
    DimensionFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = y_mean - fit.slope * t_mean;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double e = ys[i] - (fit.intercept + fit.slope * ts[i]);
        ss_res += e * e;
    }
    fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    fit.fit_range = range;
    return fit;
}

inline DimensionFit fit_dimension(std::span<const LevelStats> levels) {
    return fit_dimension(levels, default_fit_range(levels));
}

struct MeasureEstimate {
    std::vector<double> sequence; // mu^d(Q_t), t = 0..N
    double final_value = 0.0;
    /// max |mu(t+1)/mu(t) - 1| over the last three steps; empty with < 4 levels.
    std::optional<double> plateau_ratio;
};

/// Box-counting surrogate for H^d(M). Axis-cube covers overestimate the true measure
/// by a bounded shape factor, so the value is an estimate, not H^d itself.
inline MeasureEstimate estimate_measure(std::span<const LevelStats> levels, double d, double delta0) {
    if (!(d >= 0.0)) throw std::invalid_argument("estimate_measure: d must be >= 0");
    MeasureEstimate m;
    for (const auto& l : levels) m.sequence.push_back(box_counting_measure(l.count, delta0, l.t, d));
    if (!m.sequence.empty()) m.final_value = m.sequence.back();
    if (m.sequence.size() >= 4) {
        double worst = 0.0;
        for (std::size_t i = m.sequence.size() - 4; i + 1 < m.sequence.size(); ++i) {
            if (m.sequence[i] == 0.0) throw ZeroCount("zero count inside the plateau window");
            worst = std::max(worst, std::fabs(m.sequence[i + 1] / m.sequence[i] - 1.0));
        }
        m.plateau_ratio = worst;
    }
    return m;
}

/// Plateau ratio, failing loudly when fewer than four levels exist.
inline double plateau_ratio(const MeasureEstimate& m) {
    if (!m.plateau_ratio) throw InsufficientLevels("plateau ratio needs at least 4 levels");
    return *m.plateau_ratio;
}

// ---------------------------------------------------------------------------
// Coverage

struct CoverageReport {
    struct Level {
        int t = 0;
        std::size_t covered = 0;
        std::size_t missed = 0;          // on-fiber samples only
        std::size_t off_fiber_missed = 0; // informational
        double max_center_distance = 0.0;
        double center_distance_bound = 0.0; // half the cell diameter
    };
    std::vector<Level> levels;
    std::size_t samples = 0;
    bool pass = false;
    std::string diagnosis;
};

namespace detail {

// Cells of level t whose closed bounds contain p, in lexicographic order.
inline std::vector<DyadicVoxel> closed_cells_containing(const Box& root, int t, std::span<const double> p) {
    const std::size_t n = p.size();
    const std::uint64_t cells = std::uint64_t{1} << t;
    std::vector<std::vector<std::uint64_t>> per_axis(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = (p[i] - root.lo[i]) / (root.hi[i] - root.lo[i]);
        const double guess = std::floor(std::ldexp(frac, t));
        const auto k = static_cast<std::int64_t>(std::clamp(guess, 0.0, static_cast<double>(cells - 1)));
        for (std::int64_t c = k - 1; c <= k + 1; ++c) {
            if (c < 0 || c >= static_cast<std::int64_t>(cells)) continue;
            const auto u = static_cast<std::uint64_t>(c);
            if (grid_coordinate(root, i, u, t) <= p[i] && p[i] <= grid_coordinate(root, i, u + 1, t))
                per_axis[i].push_back(u);
        }
        if (per_axis[i].empty()) return {};
    }
    std::vector<DyadicVoxel> out;
    std::vector<std::size_t> pick(n, 0);
    for (;;) {
        DyadicVoxel v{t, std::vector<std::uint64_t>(n)};
        for (std::size_t i = 0; i < n; ++i) v.index[i] = per_axis[i][pick[i]];
        out.push_back(std::move(v));
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++pick[i] < per_axis[i].size()) break;
            pick[i] = 0;
            if (i == 0) return out;
        }
        if (n == 0) return out;
    }
}

} // namespace detail

/// Check that every sample lies in the closure of some member of Q_t, for every
/// recorded level. Samples tagged off-fiber (on_fiber[i] == false) never fail the
/// check. Without per-level voxels only Q_N is checked.
inline CoverageReport coverage_check(const SubdivisionResult& r, std::span<const Point> samples,
                                     std::span<const bool> on_fiber = {}) {
    if (samples.empty()) throw std::invalid_argument("coverage_check: no samples");
    if (!on_fiber.empty() && on_fiber.size() != samples.size())
        throw std::invalid_argument("coverage_check: on_fiber tags do not match samples");
    Box closed_root = r.root;
    closed_root.closed = true;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (!closed_root.contains(samples[s]))
            throw SampleOutsideRoot("coverage_check: sample " + std::to_string(s) + " lies outside the root box");
    }

    CoverageReport rep;
    rep.samples = samples.size();
    if (r.leaves.empty()) {
        const bool any_on = on_fiber.empty() || std::find(on_fiber.begin(), on_fiber.end(), true) != on_fiber.end();
        rep.pass = !any_on;
        rep.diagnosis = r.root_excluded ? "root excluded by the predicate: the result is empty but on-fiber samples exist"
                                        : "the result has no leaves but on-fiber samples exist";
        if (rep.pass) rep.diagnosis.clear();
        return rep;
    }

    std::vector<int> ts;
    if (r.level_voxels.size() == r.levels.size()) {
        for (const auto& l : r.levels) ts.push_back(l.t);
    } else {
        ts.push_back(r.depth);
    }

    rep.pass = true;
    for (int t : ts) {
        const auto& members = r.level_voxels.size() == r.levels.size() ? r.level_voxels[static_cast<std::size_t>(t)] : r.leaves;
        CoverageReport::Level lv;
        lv.t = t;
        lv.center_distance_bound = std::ldexp(r.delta0, -t - 1);
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const Point& p = samples[s];
            double best = std::numeric_limits<double>::infinity();
            for (const auto& cell : detail::closed_cells_containing(r.root, t, p)) {
                if (!std::binary_search(members.begin(), members.end(), cell)) continue;
                const Box b = bounds(r.root, cell, true);
                double d2 = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double c = 0.5 * (b.lo[i] + b.hi[i]);
                    d2 += (p[i] - c) * (p[i] - c);
                }
                best = std::min(best, std::sqrt(d2));
            }
            const bool tagged_on = on_fiber.empty() || on_fiber[s];
            if (std::isfinite(best)) {
                ++lv.covered;
                lv.max_center_distance = std::max(lv.max_center_distance, best);
            } else if (tagged_on) {
                ++lv.missed;
            } else {
                ++lv.off_fiber_missed;
            }
        }
        if (lv.missed > 0) {
            rep.pass = false;
            if (rep.diagnosis.empty())
                rep.diagnosis = std::to_string(lv.missed) + " on-fiber samples uncovered at level " + std::to_string(t);
        }
        if (lv.max_center_distance > lv.center_distance_bound * (1.0 + 1e-12)) {
            rep.pass = false;
            if (rep.diagnosis.empty()) rep.diagnosis = "center distance exceeds half diameter at level " + std::to_string(t);
        }
        rep.levels.push_back(lv);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Complexity report

struct ComplexityReport {
    struct Row {
        int t = 0;
        std::uint64_t count = 0;
        double mu_d = 0.0;
        std::uint64_t evals = 0;
        double seconds = 0.0;
    };
    struct DenseTotals {
        std::uint64_t cells = 0;
        std::uint64_t evals = 0;
        std::uint64_t flagged = 0;
        double seconds = 0.0;
        double eval_ratio = 0.0; // dense evals / subdivision evals
        bool leaves_match = false;
    };

    int n = 0;
    int m = 0;
    int depth = 0;
    double delta = 0.0;
    double delta0 = 0.0;
    double d = 0.0;
    bool root_excluded = false;
    std::vector<Row> rows;

    std::uint64_t total_evals = 0;
    std::uint64_t leaves = 0;
    double total_seconds = 0.0;
    double alpha = 0.0; // mean predicate seconds per call

    std::optional<DimensionFit> fit;
    std::optional<MeasureEstimate> measure;
    /// |Q_N| * (delta0 2^-N)^d, the constant in the output size law.
    double output_constant = 0.0;
    /// total evals / |Q_N|; bounded for d >= 1 since the level sum is geometric.
    double evals_per_leaf = 0.0;

    std::optional<DenseTotals> dense;
};

inline ComplexityReport build_report(const SubdivisionResult& sub, const DenseResult* dense, double d,
                                     std::optional<FitRange> range = std::nullopt) {
    if (dense && (dense->root.lo != sub.root.lo || dense->root.hi != sub.root.hi || dense->depth != sub.depth))
        throw MismatchedRuns("build_report: subdivision and dense runs use different roots or depths");

    ComplexityReport rep;
    rep.n = sub.dim();
    rep.m = sub.fiber ? sub.fiber->m() : 0;
    rep.depth = sub.depth;
    rep.delta = sub.delta;
    rep.delta0 = sub.delta0;
    rep.d = d;
    rep.root_excluded = sub.root_excluded;
    for (const auto& l : sub.levels) {
        rep.rows.push_back({l.t, l.count, box_counting_measure(l.count, sub.delta0, l.t, d), l.predicate_evals, l.elapsed});
        rep.total_evals += l.predicate_evals;
        rep.total_seconds += l.elapsed;
    }
    rep.leaves = sub.leaves.size();

    double pred_seconds = sub.predicate_seconds;
    std::uint64_t pred_evals = rep.total_evals;
    if (dense) {
        ComplexityReport::DenseTotals dt;
        dt.cells = dense->total_cells;
        dt.evals = dense->predicate_evals;
        dt.flagged = dense->flagged.size();
        dt.seconds = dense->elapsed;
        dt.eval_ratio = static_cast<double>(dt.evals) / static_cast<double>(rep.total_evals);
        dt.leaves_match = dense->flagged == sub.leaves;
        rep.dense = dt;
        pred_seconds += dense->predicate_seconds;
        pred_evals += dense->predicate_evals;
    }
    rep.alpha = pred_evals == 0 ? 0.0 : pred_seconds / static_cast<double>(pred_evals);

    try {
        rep.fit = range ? fit_dimension(sub.levels, *range) : fit_dimension(sub.levels);
    } catch (const std::invalid_argument&) {
        rep.fit.reset();
    }
    if (!sub.leaves.empty()) {
        try {
            rep.measure = estimate_measure(sub.levels, d, sub.delta0);
        } catch (const std::invalid_argument&) {
            rep.measure.reset();
        }
        rep.output_constant = box_counting_measure(rep.leaves, sub.delta0, sub.depth, d);
        rep.evals_per_leaf = static_cast<double>(rep.total_evals) / static_cast<double>(rep.leaves);
    }
    return rep;
}

} // namespace fiberdiv
