#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flowid/flow.hpp"

namespace flowid {

/// Per-packet frame length: Normal(mean, stddev) clamped to [min, max] and
/// rounded; stddev 0 gives a fixed length.
struct LengthDistribution {
  double mean = 100.0;
  double stddev = 0.0;
  std::uint32_t min = 60;
  std::uint32_t max = 1514;
};

/// Payload bytes: the signature (if any) is emitted first, the rest drawn
/// uniformly from [byte_lo, byte_hi].
struct PayloadDistribution {
  std::vector<std::uint8_t> signature;
  std::uint8_t byte_lo = 0;
  std::uint8_t byte_hi = 255;
};

/// Packet i takes direction cycle[i % cycle.size()], flipped with flip_probability.
/// The first packet is always -1 (the initiator speaks first).
struct DirectionPattern {
  std::vector<int> cycle{-1, +1};
  double flip_probability = 0.0;
};

struct SyntheticClass {
  std::size_t count = 10;
  std::size_t min_packets = 4;
  std::size_t max_packets = 40;
  LengthDistribution request_length;   // direction -1
  LengthDistribution response_length;  // direction +1
  PayloadDistribution payload;
  DirectionPattern directions;
  Protocol protocol = Protocol::Tcp;
  std::uint16_t server_port = 443;
  double mean_gap = 0.05;  // seconds, exponential inter-arrival
};

struct SyntheticSpec {
  std::vector<SyntheticClass> classes;
  std::uint64_t seed = 0;
  std::size_t payload_bytes = 16;  // m: prefix bytes stored per packet
  double start_time = 1'700'000'000.0;
  double span = 600.0;  // flow start times are spread over this many seconds
};

/// Labelled flows, label = index of the generating class, in a seeded
/// shuffled order. Timestamps are whole microseconds so pcap round trips are
/// exact. Throws ConfigError on fewer than two classes or a zero count.
std::vector<FlowRecord> generate_synthetic_flows(const SyntheticSpec& spec);

/// Two classes with disjoint length and payload signatures.
SyntheticSpec separable2_spec(std::size_t per_class, std::uint64_t seed);
/// Three classes with overlapping marginals; each is distinguishable only from
/// a combination of length, payload and direction structure.
SyntheticSpec threeclass_spec(std::size_t per_class, std::uint64_t seed);
/// Preset by name ("separable2", "threeclass"); throws ConfigError otherwise.
SyntheticSpec preset_spec(const std::string& name, std::size_t per_class, std::uint64_t seed);

struct FlowSplit {
  std::vector<FlowRecord> train;
  std::vector<FlowRecord> val;
  std::vector<FlowRecord> test;
};

/// Stratified split by label (unlabelled flows form their own stratum).
/// Fractions are train/val; test receives the remainder.
FlowSplit split_flows(const std::vector<FlowRecord>& flows, double train_fraction,
                      double val_fraction, std::uint64_t seed);

/// Keeps the label on a stratified `fraction` of flows (at least one per
/// class) and clears the rest.
std::vector<FlowRecord> keep_label_fraction(std::vector<FlowRecord> flows, double fraction,
                                            std::uint64_t seed);

}  // namespace flowid
