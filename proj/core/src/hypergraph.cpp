#include "flowid/hypergraph.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <tuple>

#include "flowid/error.hpp"
#include "flowid/parallel.hpp"

namespace flowid {

std::size_t FlowHypergraph::membership_count() const noexcept {
  std::size_t total = 0;
  for (const auto& e : edges) total += e.size();
  return total;
}

Tensor FlowHypergraph::incidence() const { return incidence_matrix(edges, node_count()); }

void FlowHypergraph::recompute_degrees() {
  std::tie(node_degrees, edge_degrees) = degree_matrices(edges, edge_weights, node_count());
}

Tensor incidence_matrix(const Incidence& edges, std::size_t nodes) {
  Tensor h = Tensor::matrix(nodes, edges.size());
  for (std::size_t j = 0; j < edges.size(); ++j)
    for (auto i : edges[j]) {
      if (i >= nodes) throw ShapeError("incidence member index out of range");
      h(i, j) = 1.0;
    }
  return h;
}

Incidence knn_hyperedges(const Tensor& features, std::size_t k, bool include_self) {
  if (features.rank() != 2) throw ShapeError("knn_hyperedges: features must be N×d");
  const std::size_t n = features.rows();
  if (k < 1) throw ConfigError("K must be >= 1");
  if (n <= k)
    throw ConfigError("KNN needs more than K flows (N=" + std::to_string(n) +
                      ", K=" + std::to_string(k) + ")");
  const std::size_t d = features.cols();
  Incidence edges(n);
  parallel_for(n, [&](std::size_t i) {
    std::vector<std::pair<double, std::size_t>> candidates;
    candidates.reserve(n - 1);
    const auto a = features.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto b = features.row(j);
      double dist = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = a[c] - b[c];
        dist += diff * diff;
      }
      candidates.emplace_back(dist, j);
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end());
    auto& members = edges[i];
    members.reserve(k + 1);
    if (include_self) members.push_back(i);
    for (std::size_t r = 0; r < k; ++r) members.push_back(candidates[r].second);
  });
  return edges;
}

std::pair<std::vector<double>, std::vector<double>> degree_matrices(
    const Incidence& edges, const std::vector<double>& edge_weights, std::size_t nodes) {
  if (edge_weights.size() != edges.size())
    throw ShapeError("degree_matrices: one weight per hyperedge required");
  std::vector<double> dv(nodes, 0.0), de(edges.size(), 0.0);
  for (std::size_t j = 0; j < edges.size(); ++j) {
    de[j] = static_cast<double>(edges[j].size());
    for (auto i : edges[j]) {
      if (i >= nodes) throw ShapeError("incidence member index out of range");
      dv[i] += edge_weights[j];
    }
  }
  return {std::move(dv), std::move(de)};
}

std::pair<std::vector<double>, std::vector<double>> degree_matrices(
    const Tensor& incidence, const std::vector<double>& edge_weights) {
  if (incidence.rank() != 2 || incidence.cols() != edge_weights.size())
    throw ShapeError("degree_matrices: incidence must be N×E with E weights");
  const std::size_t n = incidence.rows(), e = incidence.cols();
  std::vector<double> dv(n, 0.0), de(e, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < e; ++j) {
      dv[i] += incidence(i, j) * edge_weights[j];
      de[j] += incidence(i, j);
    }
  return {std::move(dv), std::move(de)};
}

FlowHypergraph build_flow_hypergraph(Tensor features, std::size_t k, std::vector<int> labels,
                                     bool include_self) {
  if (!labels.empty() && labels.size() != features.rows())
    throw ShapeError("build_flow_hypergraph: one label per flow required");
  FlowHypergraph g;
  g.edges = knn_hyperedges(features, k, include_self);
  g.features = std::move(features);
  g.edge_weights.assign(g.edges.size(), 1.0);
  g.labels = std::move(labels);
  g.feature_mask.assign(g.node_count(), 1.0);
  g.recompute_degrees();
  return g;
}

void write_hypergraph_text(std::ostream& out, const FlowHypergraph& graph) {
  const std::size_t d = graph.node_count() ? graph.features.cols() : 0;
  out << "#nodes " << graph.node_count() << ' ' << d << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto row = graph.features.row(i);
    for (std::size_t c = 0; c < d; ++c) out << (c ? " " : "") << row[c];
    out << '\n';
  }
  out << "#edges " << graph.edge_count() << '\n';
  for (std::size_t j = 0; j < graph.edge_count(); ++j) {
    out << graph.edge_weights[j];
    for (auto i : graph.edges[j]) out << ' ' << i;
    out << '\n';
  }
}

std::string hypergraph_to_text(const FlowHypergraph& graph) {
  std::ostringstream out;
  write_hypergraph_text(out, graph);
  return out.str();
}

}  // namespace flowid
