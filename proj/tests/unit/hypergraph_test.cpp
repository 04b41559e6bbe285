#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "flowid/error.hpp"
#include "flowid/hypergraph.hpp"
#include "flowid/rng.hpp"
#include "../support/oracles.hpp"
#include "../support/testing.hpp"

using namespace flowid;
using flowid::testing::random_tensor;

namespace {

using Members = std::vector<std::size_t>;

}  // namespace

TEST(Knn, ThreeFlowExample) {
  const Tensor z = Tensor::from_rows({{0}, {1}, {10}});
  EXPECT_EQ(knn_hyperedges(z, 1), (Incidence{{0, 1}, {1, 0}, {2, 1}}));
  EXPECT_EQ(knn_hyperedges(z, 1, false), (Incidence{{1}, {0}, {1}}));
}

TEST(Knn, TiesGoToLowerIndex) {
  const Tensor z = Tensor::from_rows({{0}, {-1}, {1}, {5}});
  EXPECT_EQ(knn_hyperedges(z, 1)[0], (Members{0, 1}));
  EXPECT_EQ(knn_hyperedges(z, 2)[0], (Members{0, 1, 2}));
  // Duplicate points: the lower-index twin is nearest for everyone.
  const Tensor dup = Tensor::from_rows({{2, 2}, {2, 2}, {2, 2}, {0, 0}});
  EXPECT_EQ(knn_hyperedges(dup, 1)[2], (Members{2, 0}));
}

TEST(Knn, CompleteWhenKIsNMinusOne) {
  Rng rng(1);
  const Tensor z = random_tensor({7, 3}, rng);
  const Tensor h = incidence_matrix(knn_hyperedges(z, 6), 7);
  for (double v : h.values()) EXPECT_EQ(v, 1.0);
}

TEST(Knn, MatchesBruteForceOracle) {
  Rng rng(2);
  const Tensor z = random_tensor({200, 16}, rng);
  for (std::size_t k : {1u, 3u, 5u}) {
    EXPECT_EQ(knn_hyperedges(z, k), oracle::brute_force_knn(z, k, true)) << "K=" << k;
    EXPECT_EQ(knn_hyperedges(z, k, false), oracle::brute_force_knn(z, k, false)) << "K=" << k;
  }
}

TEST(Knn, MatchesBruteForceOnIntegerGridWithTies) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor z({30, 2});
    for (auto& v : z.values()) v = static_cast<double>(rng.uniform_int(0, 3));
    EXPECT_EQ(knn_hyperedges(z, 4), oracle::brute_force_knn(z, 4, true));
  }
}

TEST(Knn, RejectsTooFewFlows) {
  const Tensor z = Tensor::from_rows({{0}, {1}, {2}});
  EXPECT_THROW(knn_hyperedges(z, 3), ConfigError);
  EXPECT_THROW(knn_hyperedges(z, 0), ConfigError);
  EXPECT_NO_THROW(knn_hyperedges(z, 2));
}

TEST(Knn, ScaleInvariance) {
  Rng rng(4);
  Tensor z = random_tensor({60, 5}, rng);
  const auto base = knn_hyperedges(z, 3);
  for (double s : {0.001, 3.0, 1e4}) {
    Tensor scaled = z;
    scaled *= s;
    EXPECT_EQ(knn_hyperedges(scaled, 3), base) << s;
  }
}

TEST(Knn, PermutationEquivariance) {
  Rng rng(5);
  const Tensor z = random_tensor({40, 4}, rng);
  std::vector<std::size_t> perm(40);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
  Tensor zp({40, 4});
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 4; ++c) zp(r, c) = z(perm[r], c);
  const auto a = build_flow_hypergraph(z, 3);
  const auto b = build_flow_hypergraph(zp, 3);
  for (std::size_t r = 0; r < 40; ++r) {
    Members mapped;
    for (auto v : b.edges[r]) mapped.push_back(perm[v]);
    EXPECT_EQ(mapped, a.edges[perm[r]]);
    EXPECT_EQ(b.node_degrees[r], a.node_degrees[perm[r]]);
  }
}

TEST(Degrees, ThreeFlowExample) {
  const Incidence h{{0, 1}, {1, 0}, {2, 1}};
  const auto [dv, de] = degree_matrices(h, {1, 1, 1}, 3);
  EXPECT_EQ(dv, (std::vector<double>{2, 3, 1}));
  EXPECT_EQ(de, (std::vector<double>{2, 2, 2}));
  const auto [dv2, de2] = degree_matrices(h, {2, 2, 2}, 3);
  EXPECT_EQ(dv2, (std::vector<double>{4, 6, 2}));
  EXPECT_EQ(de2, de);
  const auto [dvi, dei] = degree_matrices(Tensor::identity(4), {1, 1, 1, 1});
  EXPECT_EQ(dvi, std::vector<double>(4, 1.0));
  EXPECT_EQ(dei, std::vector<double>(4, 1.0));
}

TEST(Degrees, DenseAndListFormsAgree) {
  Rng rng(6);
  const Tensor z = random_tensor({25, 3}, rng);
  const auto edges = knn_hyperedges(z, 3);
  std::vector<double> w(edges.size());
  for (auto& v : w) v = rng.uniform(0.1, 2.0);
  EXPECT_EQ(degree_matrices(edges, w, 25), degree_matrices(incidence_matrix(edges, 25), w));
}

TEST(BuildHypergraph, ThreeFlowComposition) {
  const auto g = build_flow_hypergraph(Tensor::from_rows({{0}, {1}, {10}}), 1, {0, 1, -1});
  EXPECT_EQ(g.edges, (Incidence{{0, 1}, {1, 0}, {2, 1}}));
  EXPECT_EQ(g.edge_weights, std::vector<double>(3, 1.0));
  EXPECT_EQ(g.node_degrees, (std::vector<double>{2, 3, 1}));
  EXPECT_EQ(g.edge_degrees, (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(g.labels, (std::vector<int>{0, 1, -1}));
  EXPECT_EQ(g.feature_mask, std::vector<double>(3, 1.0));
  EXPECT_EQ(g.membership_count(), 6u);
  const Tensor h = g.incidence();
  EXPECT_EQ(h, Tensor::from_rows({{1, 1, 0}, {1, 1, 1}, {0, 0, 1}}));
}

TEST(BuildHypergraph, DefaultKGivesFourMembersAndPositiveDegrees) {
  Rng rng(7);
  const auto g = build_flow_hypergraph(random_tensor({50, 8}, rng), 3);
  const Tensor h = g.incidence();
  for (std::size_t j = 0; j < g.edge_count(); ++j) {
    EXPECT_EQ(g.edges[j].size(), 4u);
    EXPECT_EQ(g.edges[j].front(), j);
    double col = 0;
    for (std::size_t i = 0; i < 50; ++i) col += h(i, j);
    EXPECT_EQ(g.edge_degrees[j], col);
  }
  for (std::size_t i = 0; i < 50; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < g.edge_count(); ++j) row += h(i, j);
    EXPECT_EQ(g.node_degrees[i], row);
    EXPECT_GT(g.node_degrees[i], 0.0);
  }
  EXPECT_EQ(g.membership_count(), 200u);
}

TEST(BuildHypergraph, LabelLengthMustMatch) {
  EXPECT_THROW(build_flow_hypergraph(Tensor::from_rows({{0}, {1}, {2}}), 1, {0, 1}), ShapeError);
}

TEST(HypergraphText, ExportFormat) {
  const auto g = build_flow_hypergraph(Tensor::from_rows({{0, 0.5}, {1, 0.25}, {10, 2}}), 1);
  EXPECT_EQ(hypergraph_to_text(g),
            "#nodes 3 2\n0 0.5\n1 0.25\n10 2\n#edges 3\n1 0 1\n1 1 0\n1 2 1\n");
}
