#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "fiberdiv/densegrid.hpp"
#include "fiberdiv/subdivide.hpp"
#include "fiberdiv/testfibers.hpp"

using fiberdiv::Box;
using fiberdiv::DyadicVoxel;
using fiberdiv::FiberSpec;
using fiberdiv::PredicateDecision;
using fiberdiv::SubdivideOptions;

namespace {

SubdivideOptions depth(int n) {
    SubdivideOptions o;
    o.max_depth_override = n;
    return o;
}

std::uint64_t expected_evals(const fiberdiv::SubdivisionResult& r) {
    std::uint64_t e = 1;
    for (std::size_t t = 1; t < r.levels.size(); ++t) e += (std::uint64_t{1} << r.dim()) * r.levels[t - 1].count;
    return e;
}

} // namespace

TEST(Subdivide, AxisLineDepthThree) {
    const auto f = FiberSpec::parse({"x1"}, {0.0}, 2);
    const auto r = fiberdiv::subdivide(f, Box::cube(2, 0, 1), depth(3));
    ASSERT_EQ(r.leaves.size(), 8u);
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_EQ(r.leaves[j].depth, 3);
        EXPECT_EQ(r.leaves[j].index, (std::vector<std::uint64_t>{0, j}));
    }
    EXPECT_EQ(r.total_evals(), 29u);
    EXPECT_EQ(r.levels.size(), 4u);
    EXPECT_EQ(r.levels[3].count, 8u);
    ASSERT_TRUE(r.fiber.has_value());
}

TEST(Subdivide, EmptyFiberExcludesRoot) {
    const auto f = FiberSpec::parse({"x^2 + y^2"}, {100.0}, 2);
    const auto r = fiberdiv::subdivide(f, Box::cube(2, 0, 1), depth(5));
    EXPECT_TRUE(r.root_excluded);
    EXPECT_TRUE(r.leaves.empty());
    EXPECT_EQ(r.total_evals(), 1u);
    for (const auto& l : r.levels) EXPECT_EQ(l.count, 0u);
}

TEST(Subdivide, ConstantPossibleFillsTheGrid) {
    const auto p = fiberdiv::oracle_predicate([](const Box&) { return PredicateDecision::possible; });
    for (int n = 1; n <= 3; ++n) {
        const auto r = fiberdiv::subdivide(p, Box::cube(n, 0, 1), depth(3));
        EXPECT_EQ(r.leaves.size(), std::uint64_t{1} << (3 * n));
        for (const auto& l : r.levels) EXPECT_EQ(l.count, std::uint64_t{1} << (n * l.t));
    }
}

TEST(Subdivide, CoarseDeltaGivesRootLeaf) {
    SubdivideOptions o;
    o.delta = 10.0;
    const auto r = fiberdiv::subdivide(FiberSpec::parse({"x1"}, {0.5}, 2), Box::cube(2, 0, 1), o);
    EXPECT_EQ(r.depth, 0);
    ASSERT_EQ(r.leaves.size(), 1u);
    EXPECT_EQ(r.leaves[0], DyadicVoxel::root(2));
}

TEST(Subdivide, DeltaSelectsDepth) {
    SubdivideOptions o;
    o.delta = 0.1;
    const auto r = fiberdiv::subdivide(FiberSpec::parse({"x1"}, {0.5}, 2), Box::cube(2, 0, 1), o);
    EXPECT_EQ(r.depth, 4); // sqrt(2)/16 < 0.1 <= sqrt(2)/8
    EXPECT_LE(fiberdiv::diameter(r.root, r.leaves.front()), 0.1);
}

TEST(Subdivide, ResourceLimit) {
    SubdivideOptions o = depth(4);
    o.budget = 100;
    const auto p = fiberdiv::oracle_predicate([](const Box&) { return PredicateDecision::possible; });
    EXPECT_THROW(fiberdiv::subdivide(p, Box::cube(2, 0, 1), o), fiberdiv::ResourceLimit);
    o.budget = 256;
    EXPECT_NO_THROW(fiberdiv::subdivide(p, Box::cube(2, 0, 1), o));
}

TEST(Subdivide, RequiresDeltaOrDepth) {
    EXPECT_THROW(fiberdiv::subdivide(FiberSpec::parse({"x1"}, {0.5}, 2), Box::cube(2, 0, 1)), std::invalid_argument);
    EXPECT_THROW(fiberdiv::subdivide(FiberSpec::parse({"x1"}, {0.5}, 2), Box::cube(3, 0, 1), depth(1)), std::invalid_argument);
}

TEST(Subdivide, MeasureSequence) {
    SubdivideOptions o = depth(3);
    o.measure_dim = 1.0;
    const auto r = fiberdiv::subdivide(FiberSpec::parse({"x1"}, {0.0}, 2), Box::cube(2, 0, 1), o);
    const auto mu = fiberdiv::measure_sequence(r, 1.0);
    ASSERT_EQ(mu.size(), 4u);
    for (std::size_t t = 0; t < mu.size(); ++t) {
        EXPECT_DOUBLE_EQ(mu[t], std::sqrt(2.0)); // 2^t cells of diameter sqrt(2) 2^-t
        EXPECT_EQ(r.levels[t].mu_d.value(), mu[t]);
    }
    EXPECT_THROW(fiberdiv::measure_sequence(r, -1.0), std::invalid_argument);
}

// Every level obeys the eval discipline and is the set of children of the previous
// level accepted by the predicate (checked against a direct re-evaluation).
TEST(SubdivideProperty, LevelsAreAcceptedChildren) {
    for (const auto& tf : fiberdiv::catalog()) {
        const int n = tf.root.dim();
        const auto p = fiberdiv::interval_predicate(tf.fiber);
        const auto r = fiberdiv::subdivide(p, tf.root, depth(n == 2 ? 6 : 4));
        EXPECT_EQ(r.total_evals(), expected_evals(r)) << tf.name;
        EXPECT_EQ(p.evals(), expected_evals(r)) << tf.name;
        ASSERT_EQ(r.level_voxels.size(), r.levels.size());
        for (std::size_t t = 1; t < r.level_voxels.size(); ++t) {
            std::vector<DyadicVoxel> want;
            for (const auto& v : r.level_voxels[t - 1])
                for (const auto& c : fiberdiv::children(v))
                    if (p(fiberdiv::bounds(tf.root, c, true)) == PredicateDecision::possible) want.push_back(c);
            std::sort(want.begin(), want.end());
            ASSERT_EQ(r.level_voxels[t], want) << tf.name << " t=" << t;
            // containment: each member's parent is in the previous level
            for (const auto& v : r.level_voxels[t])
                ASSERT_TRUE(std::binary_search(r.level_voxels[t - 1].begin(), r.level_voxels[t - 1].end(), fiberdiv::parent(v)));
        }
        EXPECT_EQ(r.leaves, r.level_voxels.back());
        EXPECT_TRUE(std::is_sorted(r.leaves.begin(), r.leaves.end()));
        EXPECT_EQ(std::set<DyadicVoxel>(r.leaves.begin(), r.leaves.end()).size(), r.leaves.size());
    }
}

TEST(SubdivideProperty, WorkerCountDoesNotChangeOutput) {
    const auto& circle = fiberdiv::find_fiber("circle");
    const auto base = fiberdiv::subdivide(circle.fiber, circle.root, depth(8));
    for (unsigned w : {2u, 3u, 4u, 8u}) {
        SubdivideOptions o = depth(8);
        o.workers = w;
        const auto r = fiberdiv::subdivide(circle.fiber, circle.root, o);
        EXPECT_EQ(r.leaves, base.leaves) << w;
        EXPECT_EQ(r.total_evals(), base.total_evals()) << w;
    }
}

// Counts frozen from the dense oracle at each depth: the exact predicate scanned over
// every cell of the 2^t x 2^t grid.
TEST(SubdivideProperty, CircleCountsMatchDenseOracle) {
    const auto& circle = fiberdiv::find_fiber("circle");
    const auto r = fiberdiv::subdivide(circle.fiber, circle.root, depth(8));
    for (int t = 0; t <= 8; ++t) {
        const auto exact = fiberdiv::oracle_predicate(circle.exact_predicate);
        fiberdiv::DenseOptions d;
        d.depth_override = t;
        const auto dense = fiberdiv::dense_scan(exact, circle.root, d);
        EXPECT_EQ(r.levels[static_cast<std::size_t>(t)].count, dense.flagged.size()) << "t=" << t;
    }
    const std::vector<std::uint64_t> frozen{1, 4, 12, 20, 36, 68, 132, 260, 516};
    for (std::size_t t = 0; t < frozen.size(); ++t) EXPECT_EQ(r.levels[t].count, frozen[t]);
}

TEST(SubdivideProperty, InteriorSamplesAreCovered) {
    const auto f = FiberSpec::parse({"sin(3*x) - y"}, {0.0}, 2);
    const Box root({-1.0, -1.0}, {1.0, 1.0});
    const auto r = fiberdiv::subdivide(f, root, depth(7));
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int s = 0; s < 1000; ++s) {
        const double x = u(rng);
        const std::vector<double> p{x, std::sin(3 * x)};
        bool hit = false;
        for (const auto& v : r.leaves) hit = hit || fiberdiv::bounds(root, v, true).contains(p);
        ASSERT_TRUE(hit) << x;
    }
}

TEST(Subdivide, DomainErrorsNeverExclude) {
    // 1/x has a pole at 0; boxes touching it stay Possible and are counted as warnings
    const auto f = FiberSpec::parse({"1/x1"}, {2.0}, 1);
    const auto r = fiberdiv::subdivide(f, Box({-1.0}, {1.0}), depth(6));
    EXPECT_GT(r.predicate_warnings, 0u);
    bool covers_half = false;
    for (const auto& v : r.leaves) covers_half = covers_half || fiberdiv::bounds(r.root, v, true).contains(std::vector<double>{0.5});
    EXPECT_TRUE(covers_half);
}
