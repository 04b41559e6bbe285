#pragma once

#include <vector>

#include "flowid/autodiff.hpp"
#include "flowid/config.hpp"
#include "flowid/hypergraph.hpp"
#include "flowid/parameters.hpp"

namespace flowid {

class Rng;

/// "encoder." parameters (input projection and one block per layer) and the
/// "head." projection and prediction parameters.
void register_encoder_params(ParameterStore& store, const ModelConfig& config, Rng& rng);
void register_head_params(ParameterStore& store, const ModelConfig& config, Rng& rng);

/// Sparse propagation operators of a hypergraph:
/// to_edges = D_e^-1 Hᵀ (E×N) and to_nodes = D_v^-1 H M (N×E), with the
/// inverse of a zero degree taken as 0.
struct HypergraphOperators {
  CsrMatrix to_edges;
  CsrMatrix to_nodes;
};
HypergraphOperators propagation_operators(const FlowHypergraph& graph);

struct LayerOutput {
  Var edges;  // E_l
  Var nodes;  // V_l
};

/// E_l = ReLU(D_e^-1 Hᵀ V W_e + b_e); V_l = ReLU(D_v^-1 H M E_l W_v + b_v).
/// Layer parameters are "encoder.layer<l>.{w_e,b_e,w_v,b_v}".
LayerOutput hyperconv_layer(Tape& tape, const ParameterStore& store, Var nodes,
                            const HypergraphOperators& ops, std::size_t layer);

struct EncodedVars {
  std::vector<Var> nodes;  // V^(0..L)
  std::vector<Var> edges;  // E^(1..L)
  Var node_out() const { return nodes.back(); }
  Var edge_out() const { return edges.empty() ? Var{} : edges.back(); }
};

/// Input projection extractor_dim → hidden, then `depth` hyperconv layers with
/// dropout on the input of every layer after the first in Train mode.
EncodedVars encode(Tape& tape, const ParameterStore& store, const FlowHypergraph& graph,
                   Var features, const ModelConfig& config, Mode mode, Rng& rng);

/// Two-layer MLP with ELU in between; head is "node" or "edge".
Var project(Tape& tape, const ParameterStore& store, Var embeddings, const std::string& head);

/// Two-layer MLP (ReLU) to class logits.
Var predict_logits(Tape& tape, const ParameterStore& store, Var node_embeddings);
/// Row-wise softmax of predict_logits.
Var predict(Tape& tape, const ParameterStore& store, Var node_embeddings);

}  // namespace flowid
