#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "flowid/flow.hpp"
#include "flowid/tensor.hpp"

namespace flowid {

/// Signed packet lengths (direction × length), zero padded to n.
struct LengthSequence {
  std::vector<std::int64_t> values;
};

/// n×m payload bytes, row-major, zero padded.
struct PayloadMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Traffic interaction graph of one flow. Packets are nodes; layers are maximal
/// runs of equal direction, given as half-open [begin, end) index ranges.
struct Tig {
  std::size_t node_count = 0;
  std::vector<std::uint8_t> adjacency;  // node_count², symmetric, zero diagonal
  std::vector<std::pair<double, double>> features;  // (signed length, direction)
  std::vector<std::pair<std::size_t, std::size_t>> layers;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j

  bool adjacent(std::size_t i, std::size_t j) const { return adjacency[i * node_count + j] != 0; }
};

LengthSequence flow_to_length_sequence(const FlowRecord& flow, std::size_t n);
PayloadMatrix flow_to_payload_matrix(const FlowRecord& flow, std::size_t n, std::size_t m);
/// Edges chain consecutive packets inside a layer and join the last packet of
/// each layer to the first packet of the next. Throws ConfigError on an empty flow.
Tig flow_to_tig(const FlowRecord& flow, std::size_t n);

/// The three views of N flows, row-aligned.
struct ViewBatch {
  std::size_t n = 0;
  std::size_t m = 0;
  Tensor lengths;   // N×n
  Tensor payloads;  // N×n×m, raw byte values
  std::vector<Tig> tigs;

  std::size_t size() const noexcept { return tigs.size(); }
  /// Rows `indices` of this batch, in that order.
  ViewBatch subset(const std::vector<std::size_t>& indices) const;
};

/// Derives every view of every flow; runs across flows in parallel, output is
/// independent of the thread count.
ViewBatch build_view_batch(const std::vector<FlowRecord>& flows, std::size_t n, std::size_t m);

}  // namespace flowid
