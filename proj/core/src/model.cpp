#include "flowid/model.hpp"

#include <algorithm>

#include "flowid/encoder.hpp"
#include "flowid/error.hpp"
#include "flowid/extractors.hpp"
#include "flowid/rng.hpp"

namespace flowid {

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model{config, {}};
  const Rng root(seed);
  Rng extractor_rng = root.substream(1);
  Rng encoder_rng = root.substream(2);
  Rng head_rng = root.substream(3);
  register_extractor_params(model.params, config, extractor_rng);
  register_encoder_params(model.params, config, encoder_rng);
  register_head_params(model.params, config, head_rng);
  return model;
}

void clamp_fusion_weight(ParameterStore& store) {
  if (!store.contains("extractor.alpha")) return;
  auto& alpha = store.value("extractor.alpha")[0];
  alpha = std::clamp(alpha, 0.0, 1.0);
}

std::vector<int> argmax_rows(const Tensor& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (std::size_t r = 0; r < probabilities.rows(); ++r) {
    const auto row = probabilities.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<int> flow_labels(const std::vector<FlowRecord>& flows) {
  std::vector<int> labels;
  labels.reserve(flows.size());
  for (const auto& f : flows) labels.push_back(f.label.value_or(-1));
  return labels;
}

SnapshotPrediction infer_snapshot(const Model& model, const ViewBatch& batch) {
  const auto& c = model.config;
  if (batch.size() <= c.k)
    throw ConfigError("snapshot has " + std::to_string(batch.size()) +
                      " flows; hypergraph construction needs more than K=" + std::to_string(c.k));
  Tape tape;
  tape.freeze_prefix("");
  Rng unused(0);
  const Tensor z = extract(tape, model.params, batch, c, Mode::Infer, unused).z_mv.value();
  SnapshotPrediction out;
  out.graph = build_flow_hypergraph(z, c.k, {}, c.include_self);
  const auto encoded =
      encode(tape, model.params, out.graph, tape.constant(z), c, Mode::Infer, unused);
  out.probabilities = predict(tape, model.params, encoded.node_out()).value();
  out.predicted = argmax_rows(out.probabilities);
  return out;
}

SnapshotPrediction infer_snapshot(const Model& model, const std::vector<FlowRecord>& flows) {
  return infer_snapshot(model, build_view_batch(flows, model.config.n, model.config.m));
}

}  // namespace flowid
