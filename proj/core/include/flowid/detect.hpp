#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "flowid/model.hpp"

namespace flowid {

/// Tumbling windows of `duration` seconds starting at the earliest flow start
/// of the capture; each flow belongs to the window holding its first packet.
std::vector<std::size_t> assign_windows(const std::vector<FlowRecord>& flows, double duration);

struct Detection {
  std::string flow_id;
  std::size_t window = 0;
  int predicted = 0;
  std::vector<double> probabilities;
};

struct SkippedWindow {
  std::size_t window = 0;
  std::size_t flows = 0;
  std::string reason;
};

struct DetectionResult {
  std::vector<Detection> detections;  // flow order of the input
  std::vector<SkippedWindow> skipped;  // ascending window index
  std::size_t windows = 0;            // non-empty windows seen
};

/// One hypergraph snapshot per window, inferred in parallel. Windows with at
/// most K flows are skipped and reported.
DetectionResult detect(const Model& model, const std::vector<FlowRecord>& flows, double duration);

/// {"flow_id","window","predicted","probabilities"} per flow, then
/// {"window","skipped":true,"flows","reason"} per skipped window.
std::string detections_to_jsonl(const DetectionResult& result);

}  // namespace flowid
