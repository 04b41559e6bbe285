#pragma once

#include <cstdint>
#include <vector>

#include "flowid/config.hpp"
#include "flowid/flow.hpp"
#include "flowid/hypergraph.hpp"
#include "flowid/parameters.hpp"
#include "flowid/views.hpp"

namespace flowid {

/// Architecture plus every trainable tensor.
struct Model {
  ModelConfig config;
  ParameterStore params;
};

/// Fresh parameters: extractor, encoder and heads each draw from their own
/// substream of `seed`.
Model init_model(const ModelConfig& config, std::uint64_t seed);

/// Projects alpha back into [0, 1] after an optimiser step.
void clamp_fusion_weight(ParameterStore& store);

struct SnapshotPrediction {
  FlowHypergraph graph;       // built from the trained extractor's features
  Tensor probabilities;       // N×C
  std::vector<int> predicted;  // argmax per row, lowest index on ties
};

/// Infer-mode pipeline on one snapshot: views → Z_mv → KNN hypergraph →
/// encoder → prediction head. Throws ConfigError if N <= K.
SnapshotPrediction infer_snapshot(const Model& model, const ViewBatch& batch);
SnapshotPrediction infer_snapshot(const Model& model, const std::vector<FlowRecord>& flows);

/// Row argmax, lowest index on ties.
std::vector<int> argmax_rows(const Tensor& probabilities);

/// Labels of `flows`, -1 where absent.
std::vector<int> flow_labels(const std::vector<FlowRecord>& flows);

}  // namespace flowid
