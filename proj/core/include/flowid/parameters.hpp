#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "flowid/tensor.hpp"

namespace flowid {

class Rng;

/// Every trainable tensor of the pipeline, addressed by a unique name.
/// Each value has a gradient slot of identical shape.
class ParameterStore {
 public:
  /// Throws ConfigError if the name already exists.
  void add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& value(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& grad(const std::string& name) const;
  Tensor& grad(const std::string& name);

  /// Names in lexicographic order.
  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return entries_.size(); }
  /// Total number of scalar parameters.
  std::size_t scalar_count() const noexcept;

  void zero_grad();
  /// Rounds every value to the nearest 32-bit float (checkpoint precision).
  void round_to_f32();

  bool all_finite() const;
  /// "name: |value|, |grad|" per entry, for diagnostics.
  std::string norm_report() const;

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  struct Entry {
    Tensor value;
    Tensor grad;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);

  std::map<std::string, Entry> entries_;
};

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(const Tensor::Shape& shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-3;
};

/// Bias-corrected Adam with decoupled weight decay (θ ← θ − lr·wd·θ before the
/// moment update is applied).
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig config = {}) : config_(config) {}

  /// One update using the gradients currently held by the store. The step
  /// counter starts at 1 on the first call. Parameters under a frozen prefix
  /// are left untouched (no decay, no moments).
  void step(ParameterStore& store, const std::vector<std::string>& frozen_prefixes = {});

  std::size_t steps_taken() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  struct Moments {
    Tensor first;
    Tensor second;
  };
  AdamConfig config_;
  std::size_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace flowid
