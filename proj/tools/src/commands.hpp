#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowid/synthetic.hpp"
#include "flowid/trainer.hpp"

namespace flowid::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kFormatError = 2, kConfigError = 3 };

struct ExtractOptions {
  std::string pcap;
  std::string flows;
  std::string out = "-";
  std::size_t n = 40;
  std::size_t m = 16;
  double timeout = 64.0;
};

struct TrainOptions {
  std::string flows;
  std::string val;
  std::string out;
  std::string history;  // defaults to <out>.history.json
  TrainConfig config;
  std::optional<std::size_t> classes;  // inferred from labels when unset
  bool quiet = false;
};

struct EvalOptions {
  std::string flows;
  std::string model;
  std::string report;
  std::string predictions;
};

struct DetectOptions {
  std::string pcap;
  std::string flows;
  std::string model;
  double window = 60.0;
  double timeout = 64.0;
  std::string out = "-";
};

struct SynthOptions {
  std::string preset = "separable2";
  std::size_t per_class = 250;
  std::uint64_t seed = 0;
  std::size_t m = 16;
  std::string out;
  std::string pcap;
  std::vector<double> split;  // train,val fractions; empty = no split
  double label_fraction = 1.0;
};

struct SweepOptions {
  std::string param;
  std::vector<std::size_t> values;
  std::vector<std::uint64_t> seeds{0};
  // provided data, or a synthetic preset when flows is empty
  std::string flows;
  std::string val;
  std::string test;
  std::string preset = "separable2";
  std::size_t per_class = 100;
  double label_fraction = 1.0;
  TrainConfig config;
  std::optional<std::size_t> classes;
  std::string out = "-";
};

int cmd_extract(const ExtractOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train(TrainOptions opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_detect(const DetectOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(SweepOptions opts, std::ostream& out, std::ostream& err);

/// The synthetic train/val/test split shared by synth and sweep: one seed
/// drives generation, the stratified split and label thinning of train.
FlowSplit synthetic_split(const std::string& preset, std::size_t per_class, std::uint64_t seed,
                          std::size_t payload_bytes, const std::vector<double>& fractions,
                          double label_fraction);

/// Parses argv-style arguments (without the program name), runs the selected
/// command and maps failures to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowid::cli
