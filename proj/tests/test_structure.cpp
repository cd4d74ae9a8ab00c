#include <gtest/gtest.h>
#include <limits>
#include <caspar/rng.hpp>
#include <caspar/structure.hpp>
#include "oracles.hpp"
#include "weight_cases.hpp"

using namespace caspar;

TEST(PairwiseDistances, Positional)
{
    const auto s = PredictorStructure::positional({1, 1, 5});
    const auto& d = pairwise_distances(s);
    EXPECT_EQ(d(0, 1), 0.0);
    EXPECT_EQ(d(0, 2), 4.0);
    EXPECT_EQ(d(2, 1), 4.0);
    EXPECT_EQ(d(2, 2), 0.0);
}

TEST(PairwiseDistances, ChainGraphMatchesPositions)
{
    GraphSpec g;
    g.n_nodes = 3;
    g.edges = {{0, 1, 1.0}, {1, 2, 1.0}};
    g.predictor_node = {0, 1, 2};
    const auto graph = PredictorStructure::graph(g);
    const auto pos = PredictorStructure::positional({1, 2, 3});
    EXPECT_EQ(graph.distances(), pos.distances());
}

TEST(PairwiseDistances, WeightedGraphMatchesPathEnumeration)
{
    const std::vector<std::tuple<int, int, double>> edges{
        {0, 1, 2.0}, {1, 2, 1.5}, {0, 2, 4.0}, {2, 3, 0.5}, {3, 4, 3.0}, {1, 4, 6.0}, {0, 3, 5.0}};
    GraphSpec g;
    g.n_nodes = 5;
    for (const auto& [u, v, w] : edges) g.edges.push_back({u, v, w});
    g.predictor_node = {0, 1, 2, 3, 4};
    const auto s = PredictorStructure::graph(g);
    const auto ref = oracle::all_simple_path_minimum(5, edges);
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) EXPECT_DOUBLE_EQ(s.distance(a, b), ref[a][b]) << a << "," << b;
}

TEST(PairwiseDistances, ExtraNodesAndDisconnected)
{
    GraphSpec g;
    g.n_nodes = 5;
    // Predictors sit on nodes 0, 2, 4; node 1 is a relay; node 4 is isolated.
    g.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {3, 3, 1.0}};
    g.predictor_node = {0, 2, 4};
    const auto s = PredictorStructure::graph(g);
    EXPECT_EQ(s.distance(0, 1), 2.0);
    EXPECT_TRUE(std::isinf(s.distance(0, 2)));
    EXPECT_TRUE(std::isinf(s.distance(2, 1)));
}

TEST(PairwiseDistances, NegativeWeightRejected)
{
    GraphSpec g;
    g.n_nodes = 2;
    g.edges = {{0, 1, -1.0}};
    g.predictor_node = {0, 1};
    EXPECT_THROW(PredictorStructure::graph(g), InvalidGraph);
}

TEST(PairwiseDistances, SymmetricWithZeroDiagonal)
{
    RandomStream rng(7);
    GraphSpec g;
    g.n_nodes = 12;
    for (int e = 0; e < 30; ++e) {
        g.edges.push_back({static_cast<Index>(rng.uniform_index(12)), static_cast<Index>(rng.uniform_index(12)),
                           0.1 + rng.uniform()});
    }
    for (Index j = 0; j < 12; ++j) g.predictor_node.push_back(j);
    const auto s = PredictorStructure::graph(g);
    for (Index a = 0; a < 12; ++a) {
        EXPECT_EQ(s.distance(a, a), 0.0);
        for (Index b = 0; b < 12; ++b) {
            EXPECT_EQ(s.distance(a, b), s.distance(b, a));
            EXPECT_GE(s.distance(a, b), 0.0);
        }
    }
}

TEST(Kernel, PeakNormalizedShapes)
{
    for (auto f : {KernelFamily::boxcar, KernelFamily::epanechnikov, KernelFamily::gaussian}) {
        const KernelSpec k{f, 2.5, 0.0};
        EXPECT_EQ(k.base(0.0), 1.0);
        EXPECT_EQ(k.base(std::numeric_limits<double>::infinity()), 0.0);
    }
    EXPECT_EQ((KernelSpec{KernelFamily::boxcar, 2, 0}).base(1.999), 1.0);
    EXPECT_EQ((KernelSpec{KernelFamily::boxcar, 2, 0}).base(2.0), 0.0);
    EXPECT_EQ((KernelSpec{KernelFamily::epanechnikov, 2, 0}).base(3.0), 0.0);
    EXPECT_DOUBLE_EQ((KernelSpec{KernelFamily::gaussian, 2, 0}).base(2.0), std::exp(-0.5));
    EXPECT_THROW((KernelSpec{KernelFamily::boxcar, 0.0, 0.5}).validate(), InvalidArgument);
    EXPECT_THROW((KernelSpec{KernelFamily::boxcar, 1.0, 1.5}).validate(), InvalidArgument);
    EXPECT_EQ(parse_kernel_family("gaussian"), KernelFamily::gaussian);
    EXPECT_THROW(parse_kernel_family("triangle"), InvalidArgument);
}

TEST(CandidateWeights, HandEvaluatedTable)
{
    for (const auto& c : weight_cases()) {
        const auto s = PredictorStructure::positional(c.positions);
        const Vector w = candidate_weights(c.active, c.kernel, s);
        EXPECT_NEAR(w(c.candidate), c.expected, 1e-15) << c.label;
    }
}

TEST(CandidateWeights, EmptyActiveIsAllOnes)
{
    const auto s = PredictorStructure::sequential(9);
    const Vector w = candidate_weights({}, KernelSpec{KernelFamily::gaussian, 0.5, 0.0}, s);
    EXPECT_TRUE((w.array() == 1.0).all());
}

TEST(CandidateWeights, FuzzedRangeAndAlphaOne)
{
    RandomStream rng(42, {static_cast<std::uint64_t>(StreamPurpose::fuzz)});
    const KernelFamily families[] = {KernelFamily::boxcar, KernelFamily::epanechnikov, KernelFamily::gaussian};
    for (int trial = 0; trial < 500; ++trial) {
        const Index p = 2 + static_cast<Index>(rng.uniform_index(30));
        std::vector<long long> pos;
        for (Index j = 0; j < p; ++j) pos.push_back(static_cast<long long>(rng.uniform_index(40)));
        const auto s = PredictorStructure::positional(pos);
        IndexSet active;
        for (Index j = 0; j < p; ++j)
            if (rng.uniform() < 0.3) active.push_back(j);
        KernelSpec k{families[rng.uniform_index(3)], 0.1 + 6.0 * rng.uniform(), rng.uniform()};
        if (trial % 7 == 0) k.alpha = 0.0;
        const Vector w = candidate_weights(active, k, s);
        EXPECT_GE(w.minCoeff(), k.alpha);
        EXPECT_LE(w.maxCoeff(), 1.0);
        k.alpha = 1.0;
        EXPECT_TRUE((candidate_weights(active, k, s).array() == 1.0).all());
    }
}

TEST(CandidateWeights, NonIncreasingInDistanceForSingleActive)
{
    const auto s = PredictorStructure::sequential(30);
    for (auto f : {KernelFamily::boxcar, KernelFamily::epanechnikov, KernelFamily::gaussian}) {
        const Vector w = candidate_weights({10}, KernelSpec{f, 3.5, 0.25}, s);
        for (Index d = 1; d + 10 < 30; ++d) EXPECT_LE(w(10 + d), w(10 + d - 1));
    }
}

TEST(CandidateWeights, ClosestNewMemberDoesNotDecreaseWeight)
{
    // Candidate 4; first active member at distance 3, new member at distance 0.
    const auto s = PredictorStructure::positional({0, 1, 2, 3, 4, 4});
    for (auto f : {KernelFamily::boxcar, KernelFamily::epanechnikov, KernelFamily::gaussian}) {
        const KernelSpec k{f, 4.0, 0.3};
        const double one = candidate_weights({1}, k, s)(4);
        const double two = candidate_weights({1, 5}, k, s)(4);
        EXPECT_GE(two, one);
    }
}
