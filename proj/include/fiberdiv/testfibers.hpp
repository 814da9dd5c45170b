#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fiberdiv/geometry.hpp"
#include "fiberdiv/subdivide.hpp"

namespace fiberdiv {

/// A fiber with known geometry: expression form, analytic box test, on-fiber sampler
/// and ground truth.
struct TestFiber {
    std::string name;
    FiberSpec fiber;
    Box root;
    std::function<PredicateDecision(const Box&)> exact_predicate;
    /// k points of the fiber. Seed 0 gives the jitter-free lattice where one exists.
    std::function<std::vector<Point>(std::uint64_t seed, std::size_t k)> sampler;
    int true_dimension = 0;
    std::optional<double> true_measure;
    /// Whether the fiber backs acceptance gates (demos with non-regular values do not).
    bool gated = true;
};

namespace detail {

// Exact range of sum_i s_i * x_i^2 over a box, where s_i in {-1, 0, +1}. Each term is
// separable and the box is connected, so the image is exactly this interval.
inline std::pair<double, double> signed_square_range(const Box& b, std::span<const int> signs, std::span<const double> center) {
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < signs.size(); ++i) {
        const double a = b.lo[i] - center[i];
        const double c = b.hi[i] - center[i];
        const double sq_max = std::max(a * a, c * c);
        const double sq_min = (a <= 0.0 && 0.0 <= c) ? 0.0 : std::min(a * a, c * c);
        if (signs[i] > 0) {
            lo += sq_min;
            hi += sq_max;
        } else if (signs[i] < 0) {
            lo -= sq_max;
            hi -= sq_min;
        }
    }
    return {lo, hi};
}

inline PredicateDecision decide(bool possible) {
    return possible ? PredicateDecision::possible : PredicateDecision::excluded;
}

inline double jitter(std::mt19937_64& rng, std::uint64_t seed) {
    if (seed == 0) return 0.0;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline TestFiber coordinate_plane(std::string name, int n, int axis, double value) {
    TestFiber f;
    f.name = std::move(name);
    f.fiber = FiberSpec::parse({"x" + std::to_string(axis + 1)}, {value}, n);
    f.root = Box::cube(n, 0.0, 1.0);
    const auto ax = static_cast<std::size_t>(axis);
    f.exact_predicate = [ax, value](const Box& b) { return decide(b.lo[ax] <= value && value <= b.hi[ax]); };
    f.sampler = [n, ax, value](std::uint64_t seed, std::size_t k) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<Point> pts;
        pts.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            Point p(static_cast<std::size_t>(n));
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = u(rng);
            if (n == 2) p[1 - ax] = (static_cast<double>(j) + jitter(rng, seed)) / static_cast<double>(k);
            p[ax] = value;
            pts.push_back(std::move(p));
        }
        return pts;
    };
    f.true_dimension = n - 1;
    f.true_measure = 1.0;
    return f;
}

inline TestFiber sphere(std::string name, int n) {
    TestFiber f;
    f.name = std::move(name);
    f.fiber = FiberSpec::parse({n == 2 ? "x^2 + y^2 - 1" : "x^2 + y^2 + z^2 - 1"}, {0.0}, n);
    f.root = Box::cube(n, -2.0, 2.0);
    f.exact_predicate = [n](const Box& b) {
        const std::vector<int> signs(static_cast<std::size_t>(n), 1);
        const std::vector<double> center(static_cast<std::size_t>(n), 0.0);
        const auto [lo, hi] = signed_square_range(b, signs, center);
        return decide(lo <= 1.0 && 1.0 <= hi);
    };
    if (n == 2) {
        f.sampler = [](std::uint64_t seed, std::size_t k) {
            std::mt19937_64 rng(seed);
            std::vector<Point> pts;
            pts.reserve(k);
            for (std::size_t j = 0; j < k; ++j) {
                const double theta = 2.0 * std::numbers::pi * (static_cast<double>(j) + jitter(rng, seed)) / static_cast<double>(k);
                pts.push_back({std::cos(theta), std::sin(theta)});
            }
            return pts;
        };
        f.true_dimension = 1;
        f.true_measure = 2.0 * std::numbers::pi;
    } else {
        // Stratified in z with golden-angle longitude: uniform on the sphere.
        f.sampler = [](std::uint64_t seed, std::size_t k) {
            std::mt19937_64 rng(seed);
            const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
            std::vector<Point> pts;
            pts.reserve(k);
            for (std::size_t j = 0; j < k; ++j) {
                const double z = -1.0 + 2.0 * (static_cast<double>(j) + 0.5 + 0.5 * jitter(rng, seed)) / static_cast<double>(k);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                const double phi = golden * static_cast<double>(j) + 2.0 * std::numbers::pi * jitter(rng, seed);
                pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
            }
            return pts;
        };
        f.true_dimension = 2;
        f.true_measure = 4.0 * std::numbers::pi;
    }
    return f;
}

inline TestFiber full_box(std::string name, int n) {
    TestFiber f;
    f.name = std::move(name);
    f.fiber = FiberSpec::parse({"0"}, {0.0}, n);
    f.root = Box::cube(n, 0.0, 1.0);
    f.exact_predicate = [](const Box&) { return PredicateDecision::possible; };
    f.sampler = [n](std::uint64_t seed, std::size_t k) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<Point> pts(k, Point(static_cast<std::size_t>(n)));
        for (auto& p : pts)
            for (auto& x : p) x = u(rng);
        return pts;
    };
    f.true_dimension = n;
    f.true_measure = 1.0;
    return f;
}

} // namespace detail

/// The shipped fibers.
inline const std::vector<TestFiber>& catalog() {
    static const std::vector<TestFiber> fibers = [] {
        std::vector<TestFiber> c;
        c.push_back(detail::coordinate_plane("axis_line", 2, 0, 0.0));
        c.push_back(detail::coordinate_plane("offset_line", 2, 0, 0.5));
        c.push_back(detail::sphere("circle", 2));
        c.push_back(detail::sphere("sphere", 3));
        auto plane = detail::coordinate_plane("plane", 3, 2, 0.3);
        c.push_back(std::move(plane));
        c.push_back(detail::full_box("full_square", 2));
        c.push_back(detail::full_box("full_cube", 3));

        TestFiber empty;
        empty.name = "empty";
        empty.fiber = FiberSpec::parse({"x^2 + y^2"}, {100.0}, 2);
        empty.root = Box::cube(2, 0.0, 1.0);
        empty.exact_predicate = [](const Box&) { return PredicateDecision::excluded; };
        empty.sampler = [](std::uint64_t, std::size_t) { return std::vector<Point>{}; };
        empty.true_dimension = 0;
        c.push_back(std::move(empty));

        // Double cone: 0 is a critical value (singular apex), so this is a demo only.
        TestFiber cone;
        cone.name = "cone";
        cone.fiber = FiberSpec::parse({"x^2 + y^2 - z^2"}, {0.0}, 3);
        cone.root = Box::cube(3, -1.0, 1.0);
        cone.exact_predicate = [](const Box& b) {
            const int signs[3] = {1, 1, -1};
            const double center[3] = {0.0, 0.0, 0.0};
            const auto [lo, hi] = detail::signed_square_range(b, signs, center);
            return detail::decide(lo <= 0.0 && 0.0 <= hi);
        };
        cone.sampler = [](std::uint64_t seed, std::size_t k) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::vector<Point> pts;
            pts.reserve(k);
            for (std::size_t j = 0; j < k; ++j) {
                const double z = 2.0 * u(rng) - 1.0;
                const double phi = 2.0 * std::numbers::pi * u(rng);
                const double r = std::fabs(z);
                pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
            }
            return pts;
        };
        cone.true_dimension = 2;
        cone.gated = false;
        c.push_back(std::move(cone));
        return c;
    }();
    return fibers;
}

inline const TestFiber& find_fiber(std::string_view name) {
    for (const auto& f : catalog())
        if (f.name == name) return f;
    throw std::invalid_argument("unknown catalog fiber '" + std::string(name) + "'");
}

} // namespace fiberdiv
