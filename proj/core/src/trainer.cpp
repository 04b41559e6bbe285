#include "flowid/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "flowid/encoder.hpp"
#include "flowid/error.hpp"
#include "flowid/extractors.hpp"
#include "flowid/metrics.hpp"
#include "flowid/rng.hpp"
#include <nlohmann/json.hpp>

namespace flowid {

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0) throw ConfigError("weight decay must be nonnegative");
  if (omega_n < 0 || omega_g < 0) throw ConfigError("loss weights must be nonnegative");
  if (!(contrast.tau_n > 0) || !(contrast.tau_g > 0))
    throw ConfigError("temperatures must be positive");
  if (contrast.cosine_eps < 0) throw ConfigError("cosine epsilon must be nonnegative");
}

std::string TrainConfig::describe() const {
  std::ostringstream out;
  const auto& c = model;
  out << "n=" << c.n << "\nm=" << c.m << "\nk=" << c.k
      << "\ninclude_self=" << (c.include_self ? "true" : "false")
      << "\nextractor_dim=" << c.extractor_dim << "\nfusion_hidden=" << c.fusion_hidden
      << "\nlstm_hidden=" << c.lstm_hidden << "\ngcn_hidden=" << c.gcn_hidden
      << "\ncnn_channels=" << c.cnn_channels1 << ',' << c.cnn_channels2 << "\nkernel=" << c.kernel
      << "\nstride=" << c.stride << "\npadding=" << c.padding << "\npool=" << c.pool
      << "\nhidden=" << c.hidden << "\ndepth=" << c.depth << "\ndropout=" << c.dropout
      << "\nclasses=" << c.classes << "\nepochs=" << epochs << "\npatience=" << patience
      << "\nlr=" << learning_rate << "\nweight_decay=" << weight_decay << "\nomega_n=" << omega_n
      << "\nomega_g=" << omega_g << "\ntau_n=" << contrast.tau_n << "\ntau_g=" << contrast.tau_g
      << "\ncosine_eps=" << contrast.cosine_eps << "\naug1=" << aug1.to_string()
      << "\naug2=" << aug2.to_string()
      << "\nfreeze_extractor=" << (freeze_extractor ? "true" : "false")
      << "\nrebuild_structure=" << (rebuild_structure ? "true" : "false") << "\nseed=" << seed
      << '\n';
  return out.str();
}

LabelSet LabelSet::from_labels(const std::vector<int>& labels) {
  LabelSet set;
  set.y.resize(labels.size(), 0);
  set.mask.resize(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    set.y[i] = static_cast<std::size_t>(labels[i]);
    set.mask[i] = 1;
  }
  return set;
}

std::size_t LabelSet::labelled() const {
  std::size_t count = 0;
  for (auto m : mask) count += m;
  return count;
}

Var cross_entropy_loss(Var probabilities, const LabelSet& labels) {
  const Tensor& p = probabilities.value();
  if (labels.y.size() != p.rows() || labels.mask.size() != p.rows())
    throw ShapeError("cross_entropy_loss: one label per prediction row required");
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    if (!labels.mask[i]) continue;
    if (labels.y[i] >= p.cols())
      throw ConfigError("label " + std::to_string(labels.y[i]) + " is not below the class count " +
                        std::to_string(p.cols()));
    rows.push_back(i);
    cols.push_back(labels.y[i]);
  }
  if (rows.empty()) throw ConfigError("cross-entropy needs at least one labelled flow");
  return ad::scale(ad::mean(ad::log(ad::gather(probabilities, rows, cols), 1e-12)), -1.0);
}

double cross_entropy_loss(const Tensor& probabilities, const LabelSet& labels) {
  Tape tape;
  return cross_entropy_loss(tape.constant(probabilities), labels).value().item();
}

double total_loss(double l_pred, double l_n, double l_g, double omega_n, double omega_g) {
  return l_pred + omega_n * l_n + omega_g * l_g;
}

Var total_loss(Var l_pred, Var l_n, Var l_g, double omega_n, double omega_g) {
  return ad::add(l_pred, ad::add(ad::scale(l_n, omega_n), ad::scale(l_g, omega_g)));
}

Trainer::Trainer(Model model, const std::vector<FlowRecord>& flows, const TrainConfig& config)
    : Trainer(std::move(model), build_view_batch(flows, config.model.n, config.model.m),
              flow_labels(flows), config) {}

Trainer::Trainer(Model model, ViewBatch batch, std::vector<int> labels, const TrainConfig& config)
    : model_(std::move(model)),
      batch_(std::move(batch)),
      labels_(LabelSet::from_labels(labels)),
      config_(config),
      optimizer_(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay}) {
  init();
}

void Trainer::init() {
  config_.validate();
  if (labels_.y.size() != batch_.size())
    throw ShapeError("trainer: one label entry per flow required");
  if (labels_.labelled() == 0) throw ConfigError("training set has no labelled flows");
  for (std::size_t i = 0; i < labels_.y.size(); ++i)
    if (labels_.mask[i] && labels_.y[i] >= config_.model.classes)
      throw ConfigError("label " + std::to_string(labels_.y[i]) + " exceeds the class count " +
                        std::to_string(config_.model.classes));
  rebuild_structure();
}

void Trainer::rebuild_structure() {
  const Tensor z = extract_features(model_.params, batch_, config_.model);
  std::vector<int> labels(labels_.y.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels_.mask[i]) labels[i] = static_cast<int>(labels_.y[i]);
  graph_ = build_flow_hypergraph(z, config_.model.k, labels, config_.model.include_self);
  structure_stale_ = false;
}

Trainer::Objective Trainer::build_objective(Tape& tape, Rng& rng) const {
  const auto& c = config_.model;
  const auto& store = model_.params;
  if (config_.freeze_extractor) tape.freeze_prefix("extractor.");

  Objective obj;
  Var z = extract(tape, store, batch_, c, Mode::Train, rng).z_mv;
  auto [view1, view2] = make_views(graph_, config_.aug1, config_.aug2, rng);

  const EncodedVars original = encode(tape, store, graph_, z, c, Mode::Train, rng);
  obj.l_pred = cross_entropy_loss(predict(tape, store, original.node_out()), labels_);

  obj.l_n = tape.constant(Tensor::scalar(0.0));
  obj.l_g = tape.constant(Tensor::scalar(0.0));
  if (config_.omega_n > 0 || config_.omega_g > 0) {
    const double eps = config_.contrast.cosine_eps;
    const EncodedVars enc1 =
        encode(tape, store, view1, ad::scale_rows(z, view1.feature_mask), c, Mode::Train, rng);
    const EncodedVars enc2 =
        encode(tape, store, view2, ad::scale_rows(z, view2.feature_mask), c, Mode::Train, rng);
    if (config_.omega_n > 0) {
      obj.l_n = node_node_loss(project(tape, store, enc1.node_out(), "node"),
                               project(tape, store, enc2.node_out(), "node"),
                               config_.contrast.tau_n, eps);
    }
    if (config_.omega_g > 0 && c.depth > 0) {
      obj.l_g = group_group_loss(project(tape, store, enc1.edge_out(), "edge"),
                                 project(tape, store, enc2.edge_out(), "edge"),
                                 config_.contrast.tau_g, eps);
    }
  }
  obj.total = total_loss(obj.l_pred, obj.l_n, obj.l_g, config_.omega_n, config_.omega_g);
  return obj;
}

LossBreakdown Trainer::step() {
  // Every step draws from its own stream so a run is reproducible from (seed, step).
  Rng rng = Rng(config_.seed).substream(1000 + optimizer_.steps_taken());
  if (structure_stale_) rebuild_structure();
  Tape tape;
  const Objective obj = build_objective(tape, rng);
  LossBreakdown loss{obj.l_pred.value().item(), obj.l_n.value().item(), obj.l_g.value().item(),
                     obj.total.value().item()};
  if (!std::isfinite(loss.total))
    throw NumericError("non-finite training loss at step " +
                       std::to_string(optimizer_.steps_taken() + 1) + "\n" +
                       model_.params.norm_report());
  tape.backward(obj.total);
  model_.params.zero_grad();
  tape.write_param_grads(model_.params);
  std::vector<std::string> frozen;
  if (config_.freeze_extractor) frozen.push_back("extractor.");
  optimizer_.step(model_.params, frozen);
  clamp_fusion_weight(model_.params);
  structure_stale_ = config_.rebuild_structure && !config_.freeze_extractor;
  if (!model_.params.all_finite())
    throw NumericError("non-finite parameters after step " +
                       std::to_string(optimizer_.steps_taken()) + "\n" +
                       model_.params.norm_report());
  return loss;
}

FitResult fit(const std::vector<FlowRecord>& train, const std::vector<FlowRecord>& val,
              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  Trainer trainer(init_model(config.model, config.seed), train, config);
  const bool validate = !val.empty();
  ViewBatch val_batch;
  std::vector<int> val_truth;
  if (validate) {
    val_batch = build_view_batch(val, config.model.n, config.model.m);
    val_truth = flow_labels(val);
  }

  FitResult result;
  std::optional<ParameterStore> best;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.loss = trainer.step();
    if (validate) {
      const auto snapshot = infer_snapshot(trainer.model(), val_batch);
      const auto report =
          evaluate_predictions(snapshot.predicted, val_truth, config.model.classes);
      record.val_macro_f1 = report.macro_f1;
      record.val_accuracy = report.accuracy;
      if (!result.best_val_macro_f1 || report.macro_f1 > *result.best_val_macro_f1) {
        result.best_val_macro_f1 = report.macro_f1;
        result.best_epoch = epoch;
        best = trainer.model().params;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (validate && config.patience > 0 && since_best >= config.patience) break;
  }
  result.model = trainer.model();
  if (best) {
    result.model.params = std::move(*best);
  } else {
    result.best_epoch = result.history.size();
  }
  result.model.params.round_to_f32();
  return result;
}

std::string history_to_json(const FitResult& result, int indent) {
  nlohmann::ordered_json j;
  j["best_epoch"] = result.best_epoch;
  j["best_val_macro_f1"] = result.best_val_macro_f1 ? nlohmann::ordered_json(*result.best_val_macro_f1)
                                                    : nlohmann::ordered_json(nullptr);
  auto epochs = nlohmann::ordered_json::array();
  for (const auto& r : result.history) {
    nlohmann::ordered_json e;
    e["epoch"] = r.epoch;
    e["l_pred"] = r.loss.l_pred;
    e["l_n"] = r.loss.l_n;
    e["l_g"] = r.loss.l_g;
    e["total"] = r.loss.total;
    e["val_macro_f1"] = r.val_macro_f1 ? nlohmann::ordered_json(*r.val_macro_f1)
                                       : nlohmann::ordered_json(nullptr);
    e["val_accuracy"] = r.val_accuracy ? nlohmann::ordered_json(*r.val_accuracy)
                                       : nlohmann::ordered_json(nullptr);
    e["seconds"] = r.seconds;
    epochs.push_back(std::move(e));
  }
  j["epochs"] = std::move(epochs);
  return j.dump(indent);
}

}  // namespace flowid
