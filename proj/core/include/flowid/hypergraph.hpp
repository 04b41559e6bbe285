#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flowid/tensor.hpp"

namespace flowid {

/// Hyperedge member lists; edges[j] holds the node indices incident to edge j.
using Incidence = std::vector<std::vector<std::size_t>>;

/// Flow hypergraph: node features Z, incidence H (stored as member lists),
/// hyperedge weights M, node degrees D_v[i] = Σ_j H[i,j]·M[j] and edge degrees
/// D_e[j] = Σ_i H[i,j].
struct FlowHypergraph {
  Tensor features;  // N×d
  Incidence edges;
  std::vector<double> edge_weights;
  std::vector<double> node_degrees;
  std::vector<double> edge_degrees;
  std::vector<int> labels;  // -1 = unlabelled; empty when no labels are known
  /// 1 where the node keeps its features, 0 where node-feature masking zeroed them.
  std::vector<double> feature_mask;

  std::size_t node_count() const noexcept { return features.rows(); }
  std::size_t edge_count() const noexcept { return edges.size(); }
  std::size_t membership_count() const noexcept;

  /// Dense N×E binary incidence matrix.
  Tensor incidence() const;
  /// Recomputes both degree vectors from edges and edge_weights.
  void recompute_degrees();
};

/// One hyperedge per flow: the flow itself (when include_self) followed by its K
/// nearest neighbours by Euclidean distance, nearest first, ties broken by lower
/// index. Throws ConfigError unless K >= 1 and N > K.
Incidence knn_hyperedges(const Tensor& features, std::size_t k, bool include_self = true);

/// (node degrees, edge degrees) for an incidence list over `nodes` nodes.
std::pair<std::vector<double>, std::vector<double>> degree_matrices(
    const Incidence& edges, const std::vector<double>& edge_weights, std::size_t nodes);
/// Same from a dense N×E incidence matrix.
std::pair<std::vector<double>, std::vector<double>> degree_matrices(
    const Tensor& incidence, const std::vector<double>& edge_weights);

Tensor incidence_matrix(const Incidence& edges, std::size_t nodes);

/// KNN hyperedges with unit weights and degrees filled in. labels may be empty.
FlowHypergraph build_flow_hypergraph(Tensor features, std::size_t k, std::vector<int> labels = {},
                                     bool include_self = true);

/// Text export: "#nodes N d", N feature rows, "#edges E", then one line per
/// hyperedge holding its weight followed by its member indices.
void write_hypergraph_text(std::ostream& out, const FlowHypergraph& graph);
std::string hypergraph_to_text(const FlowHypergraph& graph);

}  // namespace flowid
