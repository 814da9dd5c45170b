#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iterator>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fiberdiv/expr.hpp"
#include "fiberdiv/geometry.hpp"
#include "fiberdiv/interval.hpp"

namespace fiberdiv {

/// The configured voxel (or cell) budget would be exceeded.
class ResourceLimit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Excluded is a proof that the closed box misses the fiber; Possible promises nothing.
enum class PredicateDecision { excluded, possible };

/// Instrumented voxel-intersection test.
///
/// Wraps a pure decision procedure on closed boxes and counts invocations and the
/// time spent inside them. Counters are atomic so one predicate may be shared by the
/// workers of a subdivision round.
class Predicate {
public:
    using Decide = std::function<PredicateDecision(const Box&)>;
    /// Decision procedure that may flag the call as a warning (e.g. a domain error).
    using DecideWithWarning = std::function<PredicateDecision(const Box&, bool& warn)>;

    explicit Predicate(Decide decide)
        : Predicate(decide ? DecideWithWarning([d = std::move(decide)](const Box& b, bool&) { return d(b); })
                           : DecideWithWarning()) {}

    explicit Predicate(DecideWithWarning decide) : decide_(std::move(decide)), stats_(std::make_unique<Stats>()) {
        if (!decide_) throw std::invalid_argument("Predicate: empty decision procedure");
    }

    PredicateDecision operator()(const Box& closed_box) const {
        bool warn = false;
        const auto start = std::chrono::steady_clock::now();
        const PredicateDecision d = decide_(closed_box, warn);
        const auto stop = std::chrono::steady_clock::now();
        if (warn) stats_->warnings.fetch_add(1, std::memory_order_relaxed);
        stats_->evals.fetch_add(1, std::memory_order_relaxed);
        stats_->nanos.fetch_add(static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count()),
                                std::memory_order_relaxed);
        return d;
    }

    std::uint64_t evals() const noexcept { return stats_->evals.load(); }
    double seconds() const noexcept { return static_cast<double>(stats_->nanos.load()) * 1e-9; }

    /// Measured mean cost per call (the alpha_M of the complexity model).
    double mean_cost() const noexcept {
        const auto e = evals();
        return e == 0 ? 0.0 : seconds() / static_cast<double>(e);
    }

    /// Evaluations where interval evaluation hit a domain problem and answered Possible.
    std::uint64_t warnings() const noexcept { return stats_->warnings.load(); }

    void reset() const noexcept {
        stats_->evals = 0;
        stats_->nanos = 0;
        stats_->warnings = 0;
    }

private:
    struct Stats {
        std::atomic<std::uint64_t> evals{0};
        std::atomic<std::uint64_t> nanos{0};
        std::atomic<std::uint64_t> warnings{0};
    };

    DecideWithWarning decide_;
    std::unique_ptr<Stats> stats_;
};

/// Wrap a caller-supplied exact (or otherwise sound) test with instrumentation.
inline Predicate oracle_predicate(Predicate::Decide decide) { return Predicate(std::move(decide)); }

/// Conservative predicate from natural interval extensions: Possible iff every
/// component's enclosure over the closed box contains its target value. A domain
/// error in some component leaves that component undecided (never Excluded).
inline Predicate interval_predicate(const FiberSpec& fiber) {
    auto state = std::make_shared<const FiberSpec>(fiber);
    return Predicate(Predicate::DecideWithWarning([state](const Box& box, bool& warned) {
        const std::vector<Interval> iv = box.intervals();
        PredicateDecision decision = PredicateDecision::possible;
        for (std::size_t k = 0; k < state->exprs.size(); ++k) {
            try {
                bool clamped = false;
                const Interval enc = eval_interval(state->exprs[k], iv, &clamped);
                warned = warned || clamped;
                if (!enc.contains(state->y[k])) {
                    decision = PredicateDecision::excluded;
                    break;
                }
            } catch (const DomainError&) {
                warned = true;
            }
        }
        return decision;
    }));
}

struct LevelStats {
    int t = 0;
    std::uint64_t count = 0;           // |Q_t|
    std::uint64_t predicate_evals = 0; // evaluations performed while building Q_t
    double elapsed = 0.0;              // wall seconds
    std::optional<double> mu_d;
};

struct SubdivisionResult {
    Box root;
    int depth = 0; // N
    double delta = 0.0;
    double delta0 = 0.0;
    bool root_excluded = false;
    std::vector<DyadicVoxel> leaves; // Q_N, lexicographic
    std::vector<LevelStats> levels;  // t = 0..N
    /// Q_t for every t when requested, each lexicographic.
    std::vector<std::vector<DyadicVoxel>> level_voxels;
    std::optional<FiberSpec> fiber;
    double predicate_seconds = 0.0;
    std::uint64_t predicate_warnings = 0;

    int dim() const noexcept { return root.dim(); }
    std::uint64_t total_evals() const {
        std::uint64_t s = 0;
        for (const auto& l : levels) s += l.predicate_evals;
        return s;
    }
};

struct SubdivideOptions {
    std::optional<double> delta;
    std::optional<int> max_depth_override;
    std::uint64_t budget = 100'000'000;
    unsigned workers = 1;
    bool keep_levels = true;
    std::optional<double> measure_dim; // fills LevelStats::mu_d
};

/// mu^d(Q_t) = |Q_t| * delta0^d * 2^(-t d) for each recorded level.
inline double box_counting_measure(std::uint64_t count, double delta0, int t, double d) {
    return static_cast<double>(count) * std::pow(delta0, d) * std::exp2(-static_cast<double>(t) * d);
}

inline std::vector<double> measure_sequence(const SubdivisionResult& r, double d) {
    if (!(d >= 0.0)) throw std::invalid_argument("measure_sequence: d must be >= 0");
    std::vector<double> out;
    out.reserve(r.levels.size());
    for (const auto& l : r.levels) out.push_back(box_counting_measure(l.count, r.delta0, l.t, d));
    return out;
}

/// Depth selected by the options: the override if present, otherwise from delta.
inline int resolve_depth(const Box& root, const SubdivideOptions& opt) {
    if (opt.max_depth_override) {
        if (*opt.max_depth_override < 0 || *opt.max_depth_override >= DyadicVoxel::kMaxDepth)
            throw std::invalid_argument("depth override out of range");
        return *opt.max_depth_override;
    }
    if (!opt.delta) throw std::invalid_argument("subdivide: need delta or a depth override");
    return required_depth(root.diameter(), *opt.delta);
}

namespace detail {

// Run `body(begin, end, slot)` over [0, total) split into contiguous chunks.
template <class Body>
void parallel_chunks(std::size_t total, unsigned workers, Body&& body) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, total));
    if (w == 1) {
        body(std::size_t{0}, total, std::size_t{0});
        return;
    }
    std::vector<std::exception_ptr> errors(w);
    {
        std::vector<std::jthread> pool;
        pool.reserve(w);
        for (std::size_t s = 0; s < w; ++s) {
            const std::size_t b = total * s / w;
            const std::size_t e = total * (s + 1) / w;
            pool.emplace_back([&, b, e, s] {
                try {
                    body(b, e, s);
                } catch (...) {
                    errors[s] = std::current_exception();
                }
            });
        }
    }
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

inline std::size_t worker_slots(std::size_t total, unsigned workers) {
    return std::max<std::size_t>(1, std::min<std::size_t>(workers, total));
}

} // namespace detail

/// Breadth-first orthree refinement.
///
/// Q_0 = {root} when the root closure is Possible. Each of the N rounds tests all
/// 2^n children of every member of Q_{t-1} and keeps the Possible ones, so every
/// returned leaf has depth N and diameter delta0 * 2^-N <= delta.
inline SubdivisionResult subdivide(const Predicate& predicate, const Box& root, const SubdivideOptions& opt = {}) {
    const int n = root.dim();
    if (n < 1 || n >= 63) throw std::invalid_argument("subdivide: unsupported dimension");
    const int depth = resolve_depth(root, opt);
    const std::uint64_t fanout = std::uint64_t{1} << n;

    SubdivisionResult r;
    r.root = root;
    r.root.closed = false;
    r.depth = depth;
    r.delta0 = root.diameter();
    r.delta = opt.delta.value_or(std::ldexp(r.delta0, -depth));

    const std::uint64_t warn0 = predicate.warnings();
    const double secs0 = predicate.seconds();
    const auto level_mu = [&](LevelStats& s) {
        if (opt.measure_dim) s.mu_d = box_counting_measure(s.count, r.delta0, s.t, *opt.measure_dim);
    };

    std::vector<DyadicVoxel> current;
    {
        const auto start = std::chrono::steady_clock::now();
        const DyadicVoxel v0 = DyadicVoxel::root(n);
        if (predicate(bounds(root, v0, true)) == PredicateDecision::possible) current.push_back(v0);
        else r.root_excluded = true;
        LevelStats s;
        s.t = 0;
        s.count = current.size();
        s.predicate_evals = 1;
        s.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        level_mu(s);
        r.levels.push_back(s);
        if (opt.keep_levels) r.level_voxels.push_back(current);
    }

    for (int t = 1; t <= depth; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const std::size_t slots = detail::worker_slots(current.size(), opt.workers);
        std::vector<std::vector<DyadicVoxel>> admitted(slots);
        detail::parallel_chunks(current.size(), opt.workers, [&](std::size_t b, std::size_t e, std::size_t slot) {
            auto& out = admitted[slot];
            for (std::size_t j = b; j < e; ++j) {
                for (auto& c : children(current[j])) {
                    if (predicate(bounds(root, c, true)) == PredicateDecision::possible) out.push_back(std::move(c));
                }
            }
        });

        std::vector<DyadicVoxel> next;
        std::size_t total = 0;
        for (const auto& a : admitted) total += a.size();
        if (total > opt.budget)
            throw ResourceLimit("subdivide: level " + std::to_string(t) + " holds " + std::to_string(total) +
                                " voxels, budget is " + std::to_string(opt.budget));
        next.reserve(total);
        for (auto& a : admitted) std::move(a.begin(), a.end(), std::back_inserter(next));
        std::sort(next.begin(), next.end());

        LevelStats s;
        s.t = t;
        s.count = next.size();
        s.predicate_evals = fanout * current.size();
        s.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        level_mu(s);
        r.levels.push_back(s);
        current = std::move(next);
        if (opt.keep_levels) r.level_voxels.push_back(current);
    }

    r.leaves = std::move(current);
    if (opt.keep_levels) r.level_voxels.back() = r.leaves;
    r.predicate_seconds = predicate.seconds() - secs0;
    r.predicate_warnings = predicate.warnings() - warn0;
    return r;
}

/// Convenience overload building the interval predicate for `fiber`.
inline SubdivisionResult subdivide(const FiberSpec& fiber, const Box& root, const SubdivideOptions& opt = {}) {
    if (fiber.n != root.dim()) throw std::invalid_argument("subdivide: fiber and root dimensions differ");
    const Predicate p = interval_predicate(fiber);
    SubdivisionResult r = subdivide(p, root, opt);
    r.fiber = fiber;
    return r;
}

} // namespace fiberdiv
