#pragma once

#include "flowid/autodiff.hpp"
#include "flowid/config.hpp"
#include "flowid/parameters.hpp"
#include "flowid/views.hpp"

namespace flowid {

class Rng;

/// Adds every "extractor." parameter: glorot weights, zero biases, LSTM
/// forget-gate bias 1 and fusion weight alpha = 0.5.
void register_extractor_params(ParameterStore& store, const ModelConfig& config, Rng& rng);

/// LSTM over each signed-length row, attention pooling, linear to extractor_dim.
Var temporal_encode(Tape& tape, const ParameterStore& store, const Tensor& lengths,
                    const ModelConfig& config);
/// Two conv/ReLU/max-pool blocks over the flattened n·m byte stream (bytes / 255),
/// attention pooling over positions, linear to extractor_dim.
Var payload_encode(Tape& tape, const ParameterStore& store, const Tensor& payloads,
                   const ModelConfig& config);
/// Two GCN layers on D^-1/2 (A + I) D^-1/2 with ReLU, mean pooling over
/// nodes, linear to extractor_dim.
Var interaction_encode(Tape& tape, const ParameterStore& store, const std::vector<Tig>& tigs,
                       const ModelConfig& config);

/// Symmetric-normalised adjacency with self loops.
Tensor normalized_adjacency(const Tig& tig);
/// Node features (signed length / length_norm, direction).
Tensor tig_features(const Tig& tig, double length_norm);

struct ViewEmbeddingVars {
  Var z_lstm, z_cnn, z_gcn, z_seq, z_mv;
};

/// z_seq = Linear(Dropout(Linear(z_cnn ∥ z_lstm))); z_mv = alpha·z_gcn + (1 − alpha)·z_seq.
/// Dropout draws from rng in Train mode only.
void fuse(Tape& tape, const ParameterStore& store, ViewEmbeddingVars& z, const ModelConfig& config,
          Mode mode, Rng& rng);

ViewEmbeddingVars extract(Tape& tape, const ParameterStore& store, const ViewBatch& batch,
                          const ModelConfig& config, Mode mode, Rng& rng);

/// Infer-mode Z_mv as a plain tensor.
Tensor extract_features(const ParameterStore& store, const ViewBatch& batch,
                        const ModelConfig& config);

}  // namespace flowid
