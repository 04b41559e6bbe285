#include "flowid/encoder.hpp"

#include "flowid/error.hpp"
#include "flowid/rng.hpp"

namespace flowid {

namespace {

void add_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  store.add(prefix + ".w", glorot_uniform({in, out}, in, out, rng));
  store.add(prefix + ".b", Tensor::matrix(1, out));
}

std::string layer_prefix(std::size_t layer) { return "encoder.layer" + std::to_string(layer); }

}  // namespace

void register_encoder_params(ParameterStore& store, const ModelConfig& c, Rng& rng) {
  c.validate();
  add_linear(store, "encoder.in", c.extractor_dim, c.hidden, rng);
  for (std::size_t l = 1; l <= c.depth; ++l) {
    const std::string p = layer_prefix(l);
    store.add(p + ".w_e", glorot_uniform({c.hidden, c.hidden}, c.hidden, c.hidden, rng));
    store.add(p + ".b_e", Tensor::matrix(1, c.hidden));
    store.add(p + ".w_v", glorot_uniform({c.hidden, c.hidden}, c.hidden, c.hidden, rng));
    store.add(p + ".b_v", Tensor::matrix(1, c.hidden));
  }
}

void register_head_params(ParameterStore& store, const ModelConfig& c, Rng& rng) {
  c.validate();
  for (const char* head : {"head.proj_node", "head.proj_edge"}) {
    add_linear(store, std::string(head) + ".l1", c.hidden, c.hidden, rng);
    add_linear(store, std::string(head) + ".l2", c.hidden, c.hidden, rng);
  }
  add_linear(store, "head.pred.l1", c.hidden, c.hidden, rng);
  add_linear(store, "head.pred.l2", c.hidden, c.classes, rng);
}

HypergraphOperators propagation_operators(const FlowHypergraph& graph) {
  const std::size_t n = graph.node_count();
  const std::size_t e = graph.edge_count();
  if (graph.edge_weights.size() != e || graph.edge_degrees.size() != e ||
      graph.node_degrees.size() != n)
    throw ShapeError("hypergraph degrees are inconsistent with its shape");

  HypergraphOperators ops;
  ops.to_edges.rows = e;
  ops.to_edges.cols = n;
  for (std::size_t j = 0; j < e; ++j) {
    const double de = graph.edge_degrees[j];
    for (auto i : graph.edges[j]) {
      ops.to_edges.col_indices.push_back(i);
      ops.to_edges.values.push_back(de > 0 ? 1.0 / de : 0.0);
    }
    ops.to_edges.row_offsets.push_back(ops.to_edges.col_indices.size());
  }

  // Transpose the membership lists to walk nodes in order.
  std::vector<std::vector<std::size_t>> member_of(n);
  for (std::size_t j = 0; j < e; ++j)
    for (auto i : graph.edges[j]) member_of[i].push_back(j);
  ops.to_nodes.rows = n;
  ops.to_nodes.cols = e;
  for (std::size_t i = 0; i < n; ++i) {
    const double dv = graph.node_degrees[i];
    for (auto j : member_of[i]) {
      ops.to_nodes.col_indices.push_back(j);
      ops.to_nodes.values.push_back(dv > 0 ? graph.edge_weights[j] / dv : 0.0);
    }
    ops.to_nodes.row_offsets.push_back(ops.to_nodes.col_indices.size());
  }
  return ops;
}

LayerOutput hyperconv_layer(Tape& tape, const ParameterStore& store, Var nodes,
                            const HypergraphOperators& ops, std::size_t layer) {
  const std::string p = layer_prefix(layer);
  LayerOutput out;
  out.edges = ad::relu(ad::add_bias(
      ad::spmm(ops.to_edges, ad::matmul(nodes, tape.param(store, p + ".w_e"))),
      tape.param(store, p + ".b_e")));
  out.nodes = ad::relu(ad::add_bias(
      ad::spmm(ops.to_nodes, ad::matmul(out.edges, tape.param(store, p + ".w_v"))),
      tape.param(store, p + ".b_v")));
  return out;
}

EncodedVars encode(Tape& tape, const ParameterStore& store, const FlowHypergraph& graph,
                   Var features, const ModelConfig& c, Mode mode, Rng& rng) {
  if (features.value().rows() != graph.node_count())
    throw ShapeError("encode: feature rows do not match hypergraph nodes");
  EncodedVars out;
  out.nodes.push_back(
      ad::linear(features, tape.param(store, "encoder.in.w"), tape.param(store, "encoder.in.b")));
  const HypergraphOperators ops = propagation_operators(graph);
  for (std::size_t l = 1; l <= c.depth; ++l) {
    Var input = out.nodes.back();
    if (l > 1 && mode == Mode::Train && c.dropout > 0)
      input = ad::mul_const(input, dropout_mask(input.value().shape(), c.dropout, rng));
    LayerOutput layer = hyperconv_layer(tape, store, input, ops, l);
    out.edges.push_back(layer.edges);
    out.nodes.push_back(layer.nodes);
  }
  return out;
}

Var project(Tape& tape, const ParameterStore& store, Var embeddings, const std::string& head) {
  if (head != "node" && head != "edge") throw ConfigError("projection head must be node or edge");
  const std::string p = "head.proj_" + head;
  Var h = ad::elu(ad::linear(embeddings, tape.param(store, p + ".l1.w"),
                             tape.param(store, p + ".l1.b")));
  return ad::linear(h, tape.param(store, p + ".l2.w"), tape.param(store, p + ".l2.b"));
}

Var predict_logits(Tape& tape, const ParameterStore& store, Var node_embeddings) {
  Var h = ad::relu(ad::linear(node_embeddings, tape.param(store, "head.pred.l1.w"),
                              tape.param(store, "head.pred.l1.b")));
  return ad::linear(h, tape.param(store, "head.pred.l2.w"), tape.param(store, "head.pred.l2.b"));
}

Var predict(Tape& tape, const ParameterStore& store, Var node_embeddings) {
  return ad::softmax_rows(predict_logits(tape, store, node_embeddings));
}

}  // namespace flowid
