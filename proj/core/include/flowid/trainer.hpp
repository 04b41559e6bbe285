#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowid/augment.hpp"
#include "flowid/autodiff.hpp"
#include "flowid/contrast.hpp"
#include "flowid/model.hpp"
#include "flowid/parameters.hpp"

namespace flowid {

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 200;
  /// Stop after this many epochs without a better validation macro-F1; 0 disables.
  std::size_t patience = 30;
  double learning_rate = 0.002;
  double weight_decay = 1e-3;
  double omega_n = 1.0;
  double omega_g = 1.0;
  /// Training stabilises cosine similarity by default: membership masking can
  /// isolate nodes whose embeddings are exactly zero.
  ContrastConfig contrast{0.5, 0.5, 1e-6};
  AugmentationPipeline aug1 = AugmentationPipeline::parse("ed:0.4");
  AugmentationPipeline aug2 = AugmentationPipeline::parse("ew:0.4");
  bool freeze_extractor = false;
  /// Rebuild the KNN structure from the current extractor (infer mode) before
  /// every step, the same way inference builds its snapshots. When false the
  /// structure from the initial extractor is kept for the whole run.
  bool rebuild_structure = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid values.
  void validate() const;
  /// "key=value" lines covering every setting, for run headers.
  std::string describe() const;
};

/// Class indices with a labelled-subset mask.
struct LabelSet {
  std::vector<std::size_t> y;
  std::vector<std::uint8_t> mask;

  /// -1 marks an unlabelled entry.
  static LabelSet from_labels(const std::vector<int>& labels);
  std::size_t labelled() const;
};

/// Mean over labelled rows of −log(probabilities[i, y_i] + 1e-12).
/// Throws ConfigError when nothing is labelled.
Var cross_entropy_loss(Var probabilities, const LabelSet& labels);
double cross_entropy_loss(const Tensor& probabilities, const LabelSet& labels);

double total_loss(double l_pred, double l_n, double l_g, double omega_n, double omega_g);
Var total_loss(Var l_pred, Var l_n, Var l_g, double omega_n, double omega_g);

struct LossBreakdown {
  double l_pred = 0.0;
  double l_n = 0.0;
  double l_g = 0.0;
  double total = 0.0;
};

/// Training state over one hypergraph of labelled and unlabelled flows. The
/// hypergraph structure is built once from the initial extractor's features;
/// the features themselves are recomputed at every step so gradients reach
/// the extractor.
class Trainer {
 public:
  Trainer(Model model, const std::vector<FlowRecord>& flows, const TrainConfig& config);
  Trainer(Model model, ViewBatch batch, std::vector<int> labels, const TrainConfig& config);

  /// Records the full objective on `tape` for the given step randomness and
  /// returns the loss nodes (l_n/l_g are zero constants when unused).
  struct Objective {
    Var l_pred, l_n, l_g, total;
  };
  Objective build_objective(Tape& tape, Rng& rng) const;

  /// Rebuilds the training hypergraph from the current extractor's features.
  void rebuild_structure();

  /// Augment, encode the original graph and both views, apply one Adam step on
  /// the combined gradient. Throws NumericError (with parameter norms) on a
  /// non-finite loss.
  LossBreakdown step();

  const Model& model() const noexcept { return model_; }
  Model& model() noexcept { return model_; }
  const FlowHypergraph& graph() const noexcept { return graph_; }
  const LabelSet& labels() const noexcept { return labels_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::size_t steps_taken() const noexcept { return optimizer_.steps_taken(); }

 private:
  void init();

  Model model_;
  ViewBatch batch_;
  LabelSet labels_;
  TrainConfig config_;
  FlowHypergraph graph_;
  AdamOptimizer optimizer_;
  bool structure_stale_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;
  std::optional<double> val_macro_f1;
  std::optional<double> val_accuracy;
  double seconds = 0.0;
};

struct FitResult {
  Model model;  // best-validation parameters, rounded to 32-bit floats
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_macro_f1;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs up to `epochs` full-graph steps. With validation flows, each epoch is
/// scored on an independent snapshot built with the current parameters, and
/// the best macro-F1 parameters are returned (earliest on ties); otherwise the
/// final parameters are returned.
FitResult fit(const std::vector<FlowRecord>& train, const std::vector<FlowRecord>& val,
              const TrainConfig& config, const EpochCallback& on_epoch = {});

std::string history_to_json(const FitResult& result, int indent = 2);

}  // namespace flowid
