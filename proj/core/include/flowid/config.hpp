#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace flowid {

enum class Mode { Train, Infer };

/// Architecture of the full pipeline. Defaults follow the published setup
/// where one exists; the remaining sizes are local choices.
struct ModelConfig {
  // views
  std::size_t n = 40;  // packets per flow
  std::size_t m = 16;  // payload bytes per packet
  double length_norm = 1500.0;  // signed lengths are divided by this before the LSTM/GCN

  // extractors
  std::size_t extractor_dim = 512;
  std::size_t fusion_hidden = 512;
  std::size_t lstm_hidden = 64;
  std::size_t gcn_hidden = 64;
  std::size_t cnn_channels1 = 16;
  std::size_t cnn_channels2 = 32;
  std::size_t kernel = 25;
  std::size_t stride = 1;
  std::size_t padding = 12;
  std::size_t pool = 2;

  // hypergraph + encoder
  std::size_t k = 3;
  bool include_self = true;
  std::size_t hidden = 128;  // encoder and projection width
  std::size_t depth = 2;
  double dropout = 0.2;

  std::size_t classes = 2;

  /// Throws ConfigError on an unusable combination.
  void validate() const;
};

}  // namespace flowid
