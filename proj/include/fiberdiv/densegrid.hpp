#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fiberdiv/geometry.hpp"
#include "fiberdiv/subdivide.hpp"

namespace fiberdiv {

struct DenseResult {
    Box root;
    int depth = 0;
    std::vector<DyadicVoxel> flagged; // lexicographic
    std::uint64_t total_cells = 0;    // 2^(nN)
    std::uint64_t predicate_evals = 0;
    double elapsed = 0.0;
    double predicate_seconds = 0.0;
};

struct DenseOptions {
    std::optional<double> delta;
    std::optional<int> depth_override;
    std::uint64_t budget = 100'000'000;
    unsigned workers = 1;
};

/// Exhaustive scan of every depth-N dyadic cell of `root`.
///
/// Cells are enumerated by a linear counter decoded in mixed radix 2^N (axis 1 most
/// significant), which is already lexicographic order; there is no tree traversal.
/// Nothing but the flagged cells is materialized.
inline DenseResult dense_scan(const Predicate& predicate, const Box& root, const DenseOptions& opt = {}) {
    const int n = root.dim();
    SubdivideOptions so;
    so.delta = opt.delta;
    so.max_depth_override = opt.depth_override;
    const int depth = resolve_depth(root, so);

    const int bits = n * depth;
    if (bits >= 63) throw ResourceLimit("dense_scan: 2^" + std::to_string(bits) + " cells exceeds any budget");
    const std::uint64_t total = std::uint64_t{1} << bits;
    if (total > opt.budget)
        throw ResourceLimit("dense_scan: " + std::to_string(total) + " cells, budget is " + std::to_string(opt.budget));

    DenseResult r;
    r.root = root;
    r.root.closed = false;
    r.depth = depth;
    r.total_cells = total;
    const double secs0 = predicate.seconds();
    const auto start = std::chrono::steady_clock::now();

    const std::uint64_t mask = (std::uint64_t{1} << depth) - 1;
    const std::size_t slots = detail::worker_slots(static_cast<std::size_t>(total), opt.workers);
    std::vector<std::vector<DyadicVoxel>> found(slots);
    std::vector<std::uint64_t> evals(slots, 0);
    detail::parallel_chunks(static_cast<std::size_t>(total), opt.workers, [&](std::size_t b, std::size_t e, std::size_t slot) {
        DyadicVoxel cell{depth, std::vector<std::uint64_t>(static_cast<std::size_t>(n))};
        Box closed;
        closed.lo.resize(static_cast<std::size_t>(n));
        closed.hi.resize(static_cast<std::size_t>(n));
        closed.closed = true;
        for (std::uint64_t c = b; c < e; ++c) {
            for (int i = 0; i < n; ++i) {
                const std::uint64_t k = (c >> (depth * (n - 1 - i))) & mask;
                const auto axis = static_cast<std::size_t>(i);
                cell.index[axis] = k;
                closed.lo[axis] = grid_coordinate(root, axis, k, depth);
                closed.hi[axis] = grid_coordinate(root, axis, k + 1, depth);
            }
            ++evals[slot];
            if (predicate(closed) == PredicateDecision::possible) found[slot].push_back(cell);
        }
    });

    for (std::size_t s = 0; s < slots; ++s) {
        r.predicate_evals += evals[s];
        for (auto& v : found[s]) r.flagged.push_back(std::move(v));
    }
    r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.predicate_seconds = predicate.seconds() - secs0;
    return r;
}

inline DenseResult dense_scan(const FiberSpec& fiber, const Box& root, const DenseOptions& opt = {}) {
    if (fiber.n != root.dim()) throw std::invalid_argument("dense_scan: fiber and root dimensions differ");
    const Predicate p = interval_predicate(fiber);
    return dense_scan(p, root, opt);
}

} // namespace fiberdiv
