#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "fiberdiv/expr.hpp"
#include "fiberdiv/interval.hpp"

namespace fiberdiv {

class NonPositiveResolution : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Point = std::vector<double>;

/// Axis-aligned box. `closed` selects between the voxel itself (half-open,
/// [lo, hi) per axis) and its closure ([lo, hi]).
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
    bool closed = false;

    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_, bool closed_ = false)
        : lo(std::move(lo_)), hi(std::move(hi_)), closed(closed_) {
        if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("Box: mismatched or zero dimension");
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
                throw std::invalid_argument("Box: axis " + std::to_string(i + 1) + " needs finite lo < hi");
        }
    }

    /// [lo, hi) on each of the `n` axes.
    static Box cube(int n, double lo, double hi) {
        return Box(std::vector<double>(static_cast<std::size_t>(n), lo), std::vector<double>(static_cast<std::size_t>(n), hi));
    }

    int dim() const noexcept { return static_cast<int>(lo.size()); }

    double diameter() const {
        double s = 0.0;
        for (std::size_t i = 0; i < lo.size(); ++i) s = std::hypot(s, hi[i] - lo[i]);
        return s;
    }

    /// Point membership honoring the closed flag.
    bool contains(std::span<const double> p) const {
        if (static_cast<int>(p.size()) != dim()) return false;
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (p[i] < lo[i]) return false;
            if (closed ? p[i] > hi[i] : p[i] >= hi[i]) return false;
        }
        return true;
    }

    std::vector<Interval> intervals() const {
        std::vector<Interval> out;
        out.reserve(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) out.emplace_back(lo[i], hi[i]);
        return out;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// A cell of the dyadic subdivision of a root box: depth t and one integer index per
/// axis in [0, 2^t). The root box is supplied by the caller of each operation.
struct DyadicVoxel {
    int depth = 0;
    std::vector<std::uint64_t> index;

    static DyadicVoxel root(int n) { return {0, std::vector<std::uint64_t>(static_cast<std::size_t>(n), 0)}; }

    int dim() const noexcept { return static_cast<int>(index.size()); }

    bool valid() const {
        if (depth < 0 || depth > kMaxDepth) return false;
        const std::uint64_t limit = std::uint64_t{1} << depth;
        return std::all_of(index.begin(), index.end(), [&](std::uint64_t i) { return i < limit; });
    }

    // Cell coordinates stay exact in a double mantissa up to this depth.
    static constexpr int kMaxDepth = 52;

    friend bool operator==(const DyadicVoxel&, const DyadicVoxel&) = default;
    /// Lexicographic on (depth, index), axis 1 most significant.
    friend auto operator<=>(const DyadicVoxel& a, const DyadicVoxel& b) {
        if (auto c = a.depth <=> b.depth; c != 0) return c;
        return a.index <=> b.index;
    }
};

/// Coordinate of grid line `k` on axis `axis` at depth t. Computed from the integer
/// directly, so a parent and its children share endpoints bit for bit.
inline double grid_coordinate(const Box& root, std::size_t axis, std::uint64_t k, int depth) {
    const std::uint64_t cells = std::uint64_t{1} << depth;
    if (k == 0) return root.lo[axis];
    if (k == cells) return root.hi[axis];
    const double frac = std::ldexp(static_cast<double>(k), -depth);
    return root.lo[axis] + (root.hi[axis] - root.lo[axis]) * frac;
}

inline Box bounds(const Box& root, const DyadicVoxel& v, bool closed = false) {
    if (v.dim() != root.dim()) throw std::invalid_argument("bounds: voxel/root dimension mismatch");
    Box b;
    b.lo.resize(v.index.size());
    b.hi.resize(v.index.size());
    b.closed = closed;
    for (std::size_t i = 0; i < v.index.size(); ++i) {
        b.lo[i] = grid_coordinate(root, i, v.index[i], v.depth);
        b.hi[i] = grid_coordinate(root, i, v.index[i] + 1, v.depth);
    }
    return b;
}

/// The 2^n children in lexicographic index order.
inline std::vector<DyadicVoxel> children(const DyadicVoxel& v) {
    const std::size_t n = v.index.size();
    if (n >= 63) throw std::invalid_argument("children: dimension too large");
    if (v.depth >= DyadicVoxel::kMaxDepth) throw std::invalid_argument("children: maximum depth reached");
    const std::uint64_t count = std::uint64_t{1} << n;
    std::vector<DyadicVoxel> out;
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        DyadicVoxel c{v.depth + 1, std::vector<std::uint64_t>(n)};
        for (std::size_t i = 0; i < n; ++i) c.index[i] = 2 * v.index[i] + ((k >> (n - 1 - i)) & 1u);
        out.push_back(std::move(c));
    }
    return out;
}

inline DyadicVoxel parent(const DyadicVoxel& v) {
    if (v.depth == 0) throw std::invalid_argument("parent: root has no parent");
    DyadicVoxel p{v.depth - 1, v.index};
    for (auto& i : p.index) i >>= 1;
    return p;
}

/// delta0 * 2^-t, exact in binary.
inline double diameter(const Box& root, const DyadicVoxel& v) { return std::ldexp(root.diameter(), -v.depth); }

/// Smallest N >= 0 with delta0 * 2^-N <= delta.
inline int required_depth(double delta0, double delta) {
    if (!(delta > 0.0)) throw NonPositiveResolution("resolution delta must be positive");
    if (!(delta0 > 0.0)) throw NonPositiveResolution("root diameter must be positive");
    if (delta >= delta0) return 0;
    int n = static_cast<int>(std::ceil(std::log2(delta0 / delta)));
    n = std::max(n, 0);
    // log2 of a rounded quotient can land one off near exact powers of two.
    while (n > 0 && std::ldexp(delta0, -(n - 1)) <= delta) --n;
    while (std::ldexp(delta0, -n) > delta) ++n;
    return n;
}

/// f^-1({y}) with f given componentwise.
struct FiberSpec {
    std::vector<Expr> exprs;
    std::vector<double> y;
    int n = 0;

    FiberSpec() = default;
    FiberSpec(std::vector<Expr> exprs_, std::vector<double> y_, int n_)
        : exprs(std::move(exprs_)), y(std::move(y_)), n(n_) {
        if (exprs.empty()) throw std::invalid_argument("FiberSpec: need at least one component");
        if (exprs.size() != y.size()) throw std::invalid_argument("FiberSpec: expression and value counts differ");
        if (n < 1) throw std::invalid_argument("FiberSpec: dimension must be >= 1");
        for (const auto& e : exprs)
            if (e.arity() > n) throw ArityError("FiberSpec: expression arity exceeds dimension");
    }

    static FiberSpec parse(const std::vector<std::string>& texts, std::vector<double> y, int n) {
        std::vector<Expr> exprs;
        exprs.reserve(texts.size());
        for (const auto& t : texts) exprs.push_back(fiberdiv::parse(t, n));
        return FiberSpec(std::move(exprs), std::move(y), n);
    }

    int m() const noexcept { return static_cast<int>(exprs.size()); }
};

} // namespace fiberdiv
