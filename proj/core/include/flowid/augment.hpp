#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flowid/hypergraph.hpp"

namespace flowid {

class Rng;

/// Each node keeps its features with probability 1 − p; otherwise its row of Z
/// becomes zero (and feature_mask[i] = 0). Structure and weights are untouched.
FlowHypergraph node_feature_mask(const FlowHypergraph& graph, double p, Rng& rng);

/// Each hyperedge is selected with probability p; a selected weight is replaced
/// by max(0, Normal(noise_mean, noise_std)). Node degrees are recomputed.
FlowHypergraph hyperedge_weight_perturb(const FlowHypergraph& graph, double p, double noise_mean,
                                        double noise_std, Rng& rng);

/// Every node-hyperedge membership is dropped independently with probability
/// p. Both degree vectors are recomputed; zero degrees are allowed.
FlowHypergraph membership_mask(const FlowHypergraph& graph, double p, Rng& rng);

struct AugmentStep {
  enum class Kind { NodeFeature, EdgeWeight, EdgeDrop };
  Kind kind = Kind::NodeFeature;
  double p = 0.4;
  double noise_mean = 1.0;  // EdgeWeight only
  double noise_std = 0.5;   // EdgeWeight only

  friend bool operator==(const AugmentStep&, const AugmentStep&) = default;
};

/// Ordered composition of augmentation steps; empty = identity view.
struct AugmentationPipeline {
  std::vector<AugmentStep> steps;

  /// Comma list of nf:<p>, ew:<p>, ed:<p>; "" or "none" is the identity.
  /// Throws ConfigError on bad syntax or p outside [0, 1).
  static AugmentationPipeline parse(const std::string& text);
  std::string to_string() const;
  FlowHypergraph apply(const FlowHypergraph& graph, Rng& rng) const;

  friend bool operator==(const AugmentationPipeline&, const AugmentationPipeline&) = default;
};

/// Two views from independent generators seeded off `rng` (which advances by
/// two draws). The input graph is not modified.
std::pair<FlowHypergraph, FlowHypergraph> make_views(const FlowHypergraph& graph,
                                                     const AugmentationPipeline& t1,
                                                     const AugmentationPipeline& t2, Rng& rng);

}  // namespace flowid
