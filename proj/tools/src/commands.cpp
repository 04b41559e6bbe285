#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11/CLI11.hpp"
#include "flowid/checkpoint.hpp"
#include "flowid/detect.hpp"
#include "flowid/error.hpp"
#include "flowid/flow_io.hpp"
#include "flowid/metrics.hpp"
#include "flowid/model.hpp"
#include "flowid/parallel.hpp"
#include "flowid/pcap.hpp"

namespace flowid::cli {
namespace {

// "-" is stdout; anything else is opened for writing.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path == "-" || path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw IoError("cannot open '" + path + "' for writing");
    stream_ = &file_;
  }
  std::ostream& get() { return *stream_; }
  void close(const std::string& path) {
    if (file_.is_open()) {
      file_.close();
      if (!file_) throw IoError("failed writing '" + path + "'");
    }
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

void write_flows(const std::string& path, const std::vector<FlowRecord>& flows, std::ostream& out) {
  Sink sink(path, out);
  write_flows_jsonl(sink.get(), flows);
  sink.close(path);
}

std::vector<FlowRecord> truncate_flows(std::vector<FlowRecord> flows, std::size_t n, std::size_t m) {
  for (auto& f : flows) {
    if (f.packets.size() > n) f.packets.resize(n);
    for (auto& p : f.packets)
      if (p.payload_prefix.size() > m) p.payload_prefix.resize(m);
  }
  std::erase_if(flows, [](const FlowRecord& f) { return f.packets.empty(); });
  return flows;
}

std::size_t infer_classes(const std::vector<FlowRecord>& a, const std::vector<FlowRecord>& b) {
  int top = 1;
  for (const auto* set : {&a, &b})
    for (const auto& f : *set)
      if (f.label) top = std::max(top, *f.label);
  return static_cast<std::size_t>(top) + 1;
}

std::string format_epoch(const EpochRecord& r) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << "epoch " << r.epoch << " loss " << r.loss.total
    << " pred " << r.loss.l_pred << " node " << r.loss.l_n << " graph " << r.loss.l_g;
  if (r.val_macro_f1) s << " val_macro_f1 " << *r.val_macro_f1;
  s << std::setprecision(2) << " (" << r.seconds << "s)";
  return s.str();
}

std::vector<FlowRecord> load_input_flows(const std::string& pcap, const std::string& jsonl,
                                         const CaptureLimits& limits) {
  if (!pcap.empty()) return parse_capture(pcap, limits).flows;
  return truncate_flows(read_flows_jsonl(jsonl), limits.max_packets, limits.max_payload_bytes);
}

}  // namespace

int cmd_extract(const ExtractOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.n == 0) throw ConfigError("--n must be >= 1");
  if (!(opts.timeout > 0)) throw ConfigError("--timeout must be > 0");
  std::ostream& log = opts.out == "-" ? err : out;
  std::vector<FlowRecord> flows;
  if (!opts.pcap.empty()) {
    auto result = parse_capture(opts.pcap, CaptureLimits{opts.n, opts.m, opts.timeout});
    flows = std::move(result.flows);
    const auto& s = result.stats;
    log << "records " << s.records << "\npackets_used " << s.packets_used << "\nskipped_non_ip "
        << s.skipped_non_ip << "\nskipped_malformed " << s.skipped_malformed
        << "\ntruncated_records " << s.truncated_records << "\npackets_beyond_n "
        << s.packets_beyond_n << '\n';
  } else {
    flows = truncate_flows(read_flows_jsonl(opts.flows), opts.n, opts.m);
  }
  write_flows(opts.out, flows, out);
  log << "flows " << flows.size() << '\n';
  return kOk;
}

int cmd_train(TrainOptions opts, std::ostream& out, std::ostream& err) {
  const auto train = read_flows_jsonl(opts.flows);
  const auto val = opts.val.empty() ? std::vector<FlowRecord>{} : read_flows_jsonl(opts.val);
  auto& config = opts.config;
  config.model.classes = opts.classes.value_or(infer_classes(train, val));
  config.validate();

  out << "# flowid train\n";
  std::istringstream lines(config.describe());
  for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
  out << "# train_flows=" << train.size() << "\n# val_flows=" << val.size() << '\n';
  out.flush();

  const auto result = fit(train, val, config, [&](const EpochRecord& r) {
    if (!opts.quiet) out << format_epoch(r) << '\n' << std::flush;
  });
  save_checkpoint(result.model, opts.out);
  const std::string history = opts.history.empty() ? opts.out + ".history.json" : opts.history;
  write_text(history, history_to_json(result) + "\n");

  out << "best_epoch " << result.best_epoch;
  if (result.best_val_macro_f1)
    out << " val_macro_f1 " << std::fixed << std::setprecision(4) << *result.best_val_macro_f1;
  out << "\nwrote " << opts.out << " and " << history << '\n';
  (void)err;
  return kOk;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  const Model model = load_checkpoint(opts.model);
  const auto flows = read_flows_jsonl(opts.flows);
  const auto snapshot = infer_snapshot(model, flows);

  if (!opts.predictions.empty()) {
    // same record shape as detect with a single window
    DetectionResult result;
    result.windows = 1;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto row = snapshot.probabilities.row(i);
      result.detections.push_back(
          {flows[i].id, 0, snapshot.predicted[i], std::vector<double>(row.begin(), row.end())});
    }
    write_text(opts.predictions, detections_to_jsonl(result));
  }

  const auto truth = flow_labels(flows);
  const bool any_labelled = std::any_of(truth.begin(), truth.end(), [](int t) { return t >= 0; });
  if (!any_labelled) {
    if (!opts.report.empty()) throw ConfigError("no labelled flows to score");
    err << "no labelled flows; metrics skipped\n";
    return kOk;
  }
  const auto report = evaluate_predictions(snapshot.predicted, truth, model.config.classes);
  out << report_to_text(report);
  if (!opts.report.empty()) write_text(opts.report, report_to_json(report) + "\n");
  return kOk;
}

int cmd_detect(const DetectOptions& opts, std::ostream& out, std::ostream& err) {
  if (!(opts.window > 0)) throw ConfigError("--window must be > 0");
  if (!(opts.timeout > 0)) throw ConfigError("--timeout must be > 0");
  const Model model = load_checkpoint(opts.model);
  const auto flows = load_input_flows(
      opts.pcap, opts.flows, CaptureLimits{model.config.n, model.config.m, opts.timeout});
  const auto result = detect(model, flows, opts.window);
  for (const auto& s : result.skipped)
    err << "warning: window " << s.window << " skipped (" << s.reason << ")\n";

  Sink sink(opts.out, out);
  sink.get() << detections_to_jsonl(result);
  sink.close(opts.out);
  std::ostream& log = opts.out == "-" ? err : out;
  log << "flows " << flows.size() << " windows " << result.windows << " skipped "
      << result.skipped.size() << " detections " << result.detections.size() << '\n';
  return kOk;
}

FlowSplit synthetic_split(const std::string& preset, std::size_t per_class, std::uint64_t seed,
                          std::size_t payload_bytes, const std::vector<double>& fractions,
                          double label_fraction) {
  if (fractions.size() != 2) throw ConfigError("split needs two fractions: train,val");
  auto spec = preset_spec(preset, per_class, seed);
  spec.payload_bytes = payload_bytes;
  auto split = split_flows(generate_synthetic_flows(spec), fractions[0], fractions[1], seed);
  if (label_fraction < 1.0) split.train = keep_label_fraction(std::move(split.train), label_fraction, seed);
  return split;
}

int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err) {
  if (!(opts.label_fraction > 0 && opts.label_fraction <= 1))
    throw ConfigError("--label-fraction must be in (0, 1]");
  std::vector<FlowRecord> all;
  if (opts.split.empty()) {
    auto spec = preset_spec(opts.preset, opts.per_class, opts.seed);
    spec.payload_bytes = opts.m;
    all = generate_synthetic_flows(spec);
    if (opts.label_fraction < 1.0) all = keep_label_fraction(std::move(all), opts.label_fraction, opts.seed);
    write_flows(opts.out, all, out);
    err << "flows " << all.size() << " -> " << opts.out << '\n';
  } else {
    auto split = synthetic_split(opts.preset, opts.per_class, opts.seed, opts.m, opts.split,
                                 opts.label_fraction);
    std::string stem = opts.out;
    if (stem.size() > 6 && stem.ends_with(".jsonl")) stem.resize(stem.size() - 6);
    const std::pair<const char*, const std::vector<FlowRecord>*> parts[] = {
        {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
    for (const auto& [name, flows] : parts) {
      const std::string path = stem + "." + name + ".jsonl";
      write_flows(path, *flows, out);
      err << name << ' ' << flows->size() << " -> " << path << '\n';
      all.insert(all.end(), flows->begin(), flows->end());
    }
  }
  if (!opts.pcap.empty()) {
    std::sort(all.begin(), all.end(),
              [](const FlowRecord& a, const FlowRecord& b) { return a.start_time() < b.start_time(); });
    write_capture(opts.pcap, flows_to_frames(all));
    err << "capture -> " << opts.pcap << '\n';
  }
  return kOk;
}

int cmd_sweep(SweepOptions opts, std::ostream& out, std::ostream& err) {
  if (opts.param != "n" && opts.param != "m" && opts.param != "k")
    throw ConfigError("--param must be one of n, m, k");
  if (opts.values.empty()) throw ConfigError("--values must not be empty");
  if (opts.seeds.empty()) throw ConfigError("--seeds must not be empty");
  if (!opts.flows.empty() && opts.test.empty()) throw ConfigError("--flows needs --test");

  std::size_t payload_bytes = 16;
  if (opts.param == "m")
    payload_bytes = std::max(payload_bytes, *std::max_element(opts.values.begin(), opts.values.end()));
  std::vector<FlowSplit> data;
  for (auto seed : opts.seeds) {
    if (opts.flows.empty()) {
      data.push_back(synthetic_split(opts.preset, opts.per_class, seed, payload_bytes, {0.6, 0.2},
                                     opts.label_fraction));
    } else if (data.empty()) {
      data.push_back({read_flows_jsonl(opts.flows),
                      opts.val.empty() ? std::vector<FlowRecord>{} : read_flows_jsonl(opts.val),
                      read_flows_jsonl(opts.test)});
    } else {
      data.push_back(data.front());
    }
  }

  Sink sink(opts.out, out);
  auto& csv = sink.get();
  csv << "param,value,seed,macro_f1,accuracy,best_epoch,epochs_run\n" << std::flush;
  for (auto value : opts.values) {
    for (std::size_t s = 0; s < opts.seeds.size(); ++s) {
      TrainConfig config = opts.config;
      config.seed = opts.seeds[s];
      auto& model = config.model;
      (opts.param == "n" ? model.n : opts.param == "m" ? model.m : model.k) = value;
      const auto& split = data[s];
      model.classes = opts.classes.value_or(infer_classes(split.train, split.val));
      config.validate();
      const auto start = std::chrono::steady_clock::now();
      const auto result = fit(split.train, split.val, config);
      const auto snapshot = infer_snapshot(result.model, split.test);
      const auto report = evaluate_predictions(snapshot.predicted, flow_labels(split.test), model.classes);
      csv << opts.param << ',' << value << ',' << config.seed << ',' << std::fixed
          << std::setprecision(6) << report.macro_f1 << ',' << report.accuracy << ','
          << result.best_epoch << ',' << result.history.size() << '\n'
          << std::flush;
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      err << opts.param << '=' << value << " seed=" << config.seed << " macro_f1=" << std::fixed
          << std::setprecision(4) << report.macro_f1 << " (" << std::setprecision(1)
          << took.count() << "s)\n";
    }
  }
  sink.close(opts.out);
  return kOk;
}

namespace {

// Flags shared by train and sweep.
struct TrainFlags {
  std::string aug1;
  std::string aug2;
  bool no_self = false;
  bool freeze = false;
  bool fixed_structure = false;

  void add(CLI::App* c, TrainConfig& config, std::optional<std::size_t>& classes) {
    auto& m = config.model;
    c->add_option("--n", m.n, "packets per flow")->capture_default_str();
    c->add_option("--m", m.m, "payload bytes per packet")->capture_default_str();
    c->add_option("--k", m.k, "nearest neighbours per hyperedge")->capture_default_str();
    c->add_flag("--no-self", no_self, "leave the centre flow out of its hyperedge");
    c->add_option("--extractor-dim", m.extractor_dim, "extractor output width")->capture_default_str();
    c->add_option("--fusion-hidden", m.fusion_hidden, "fusion MLP inner width")->capture_default_str();
    c->add_option("--lstm-hidden", m.lstm_hidden)->capture_default_str();
    c->add_option("--gcn-hidden", m.gcn_hidden)->capture_default_str();
    c->add_option("--cnn-channels1", m.cnn_channels1)->capture_default_str();
    c->add_option("--cnn-channels2", m.cnn_channels2)->capture_default_str();
    c->add_option("--kernel", m.kernel)->capture_default_str();
    c->add_option("--stride", m.stride)->capture_default_str();
    c->add_option("--padding", m.padding)->capture_default_str();
    c->add_option("--pool", m.pool)->capture_default_str();
    c->add_option("--length-norm", m.length_norm, "signed lengths are divided by this")->capture_default_str();
    c->add_option("--hidden", m.hidden, "encoder and projection width")->capture_default_str();
    c->add_option("--depth", m.depth, "hypergraph convolution layers")->capture_default_str();
    c->add_option("--dropout", m.dropout)->capture_default_str();
    c->add_option("--classes", classes, "class count (default: from labels)");
    c->add_option("--epochs", config.epochs)->capture_default_str();
    c->add_option("--patience", config.patience, "0 disables early stopping")->capture_default_str();
    c->add_option("--lr", config.learning_rate)->capture_default_str();
    c->add_option("--weight-decay", config.weight_decay)->capture_default_str();
    c->add_option("--omega-n", config.omega_n, "node-level contrast weight")->capture_default_str();
    c->add_option("--omega-g", config.omega_g, "hyperedge-level contrast weight")->capture_default_str();
    c->add_option("--tau-n", config.contrast.tau_n)->capture_default_str();
    c->add_option("--tau-g", config.contrast.tau_g)->capture_default_str();
    c->add_option("--cosine-eps", config.contrast.cosine_eps, "0 = strict cosine")->capture_default_str();
    aug1 = config.aug1.to_string();
    aug2 = config.aug2.to_string();
    c->add_option("--aug1", aug1, "first view pipeline, e.g. nf:0.2,ed:0.4")->capture_default_str();
    c->add_option("--aug2", aug2, "second view pipeline")->capture_default_str();
    c->add_flag("--freeze-extractor", freeze, "keep extractor parameters at their initial values");
    c->add_flag("--fixed-structure", fixed_structure,
                "keep the hypergraph built from the initial extractor for the whole run");
    c->add_option("--seed", config.seed)->capture_default_str();
  }

  void apply(TrainConfig& config) const {
    config.model.include_self = !no_self;
    config.freeze_extractor = freeze;
    config.rebuild_structure = !fixed_structure;
    config.aug1 = AugmentationPipeline::parse(aug1);
    config.aug2 = AugmentationPipeline::parse(aug2);
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Encrypted flow classification with hypergraph contrastive learning", "flowid"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "group packets of a capture into flow records");
  auto* ex_in = extract->add_option_group("input");
  ex_in->add_option("--pcap", ex.pcap, "classic pcap file");
  ex_in->add_option("--flows", ex.flows, "flow JSONL to re-truncate");
  ex_in->require_option(1);
  extract->add_option("--out", ex.out, "flow JSONL ('-' = stdout)")->capture_default_str();
  extract->add_option("--n", ex.n, "packets kept per flow")->capture_default_str();
  extract->add_option("--m", ex.m, "payload bytes kept per packet")->capture_default_str();
  extract->add_option("--timeout", ex.timeout, "idle seconds that split a flow")->capture_default_str();

  TrainOptions tr;
  TrainFlags tr_flags;
  auto* train = app.add_subcommand("train", "fit a model and write a checkpoint");
  train->add_option("--flows", tr.flows, "training flow JSONL")->required();
  train->add_option("--val", tr.val, "validation flow JSONL for model selection");
  train->add_option("--out", tr.out, "checkpoint path")->required();
  train->add_option("--history", tr.history, "history JSON (default: <out>.history.json)");
  train->add_flag("--quiet", tr.quiet, "no per-epoch lines");
  tr_flags.add(train, tr.config, tr.classes);

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on labelled flows");
  eval->add_option("--flows", ev.flows, "test flow JSONL")->required();
  eval->add_option("--model", ev.model, "checkpoint")->required();
  eval->add_option("--report", ev.report, "metrics JSON output");
  eval->add_option("--predictions", ev.predictions, "per-flow predictions JSONL output");

  DetectOptions de;
  auto* det = app.add_subcommand("detect", "windowed snapshot inference over a capture");
  auto* de_in = det->add_option_group("input");
  de_in->add_option("--pcap", de.pcap, "classic pcap file");
  de_in->add_option("--flows", de.flows, "flow JSONL");
  de_in->require_option(1);
  det->add_option("--model", de.model, "checkpoint")->required();
  det->add_option("--window", de.window, "window length in seconds")->capture_default_str();
  det->add_option("--timeout", de.timeout, "idle seconds that split a flow")->capture_default_str();
  det->add_option("--out", de.out, "detections JSONL ('-' = stdout)")->capture_default_str();

  SweepOptions sw;
  TrainFlags sw_flags;
  auto* sweep = app.add_subcommand("sweep", "train and evaluate over a grid of n, m or K");
  sweep->add_option("--param", sw.param, "n, m or k")->required()->check(CLI::IsMember({"n", "m", "k"}));
  sweep->add_option("--values", sw.values, "comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seeds", sw.seeds, "comma-separated seeds")->delimiter(',')->capture_default_str();
  sweep->add_option("--train-flows", sw.flows, "training flow JSONL (default: synthetic)");
  sweep->add_option("--val-flows", sw.val, "validation flow JSONL");
  sweep->add_option("--test-flows", sw.test, "test flow JSONL");
  sweep->add_option("--preset", sw.preset, "synthetic preset")->capture_default_str();
  sweep->add_option("--per-class", sw.per_class, "synthetic flows per class")->capture_default_str();
  sweep->add_option("--label-fraction", sw.label_fraction, "labelled share of synthetic train flows")
      ->capture_default_str();
  sweep->add_option("--csv", sw.out, "CSV output ('-' = stdout)")->capture_default_str();
  sw_flags.add(sweep, sw.config, sw.classes);

  SynthOptions sy;
  auto* synth = app.add_subcommand("synth", "generate labelled synthetic flows");
  synth->add_option("--preset", sy.preset, "separable2 or threeclass")->capture_default_str();
  synth->add_option("--per-class", sy.per_class)->capture_default_str();
  synth->add_option("--seed", sy.seed)->capture_default_str();
  synth->add_option("--m", sy.m, "payload bytes stored per packet")->capture_default_str();
  synth->add_option("--out", sy.out, "flow JSONL; with --split, <stem>.{train,val,test}.jsonl")->required();
  synth->add_option("--pcap", sy.pcap, "also write every flow as a capture");
  synth->add_option("--split", sy.split, "train,val fractions, e.g. 0.6,0.2")->delimiter(',')->expected(2);
  synth->add_option("--label-fraction", sy.label_fraction, "labelled share (train part when split)")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (threads) set_thread_count(threads);
    if (*extract) return cmd_extract(ex, out, err);
    if (*train) {
      tr_flags.apply(tr.config);
      return cmd_train(tr, out, err);
    }
    if (*eval) return cmd_eval(ev, out, err);
    if (*det) return cmd_detect(de, out, err);
    if (*sweep) {
      sw_flags.apply(sw.config);
      return cmd_sweep(sw, out, err);
    }
    if (*synth) return cmd_synth(sy, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kFormatError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericError& e) {
    // divergence is a property of the chosen settings
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DegenerateEmbeddingError& e) {
    err << "error: " << e.what() << " (try --cosine-eps > 0)\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace flowid::cli
