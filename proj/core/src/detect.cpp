#include "flowid/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "flowid/error.hpp"
#include "flowid/parallel.hpp"
#include <nlohmann/json.hpp>

namespace flowid {

std::vector<std::size_t> assign_windows(const std::vector<FlowRecord>& flows, double duration) {
  if (!(duration > 0) || !std::isfinite(duration))
    throw ConfigError("window duration must be a positive number of seconds");
  std::vector<std::size_t> out(flows.size(), 0);
  if (flows.empty()) return out;
  double origin = flows.front().start_time();
  for (const auto& f : flows) origin = std::min(origin, f.start_time());
  for (std::size_t i = 0; i < flows.size(); ++i)
    out[i] = static_cast<std::size_t>(std::floor((flows[i].start_time() - origin) / duration));
  return out;
}

DetectionResult detect(const Model& model, const std::vector<FlowRecord>& flows, double duration) {
  const auto windows = assign_windows(flows, duration);
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < flows.size(); ++i) members[windows[i]].push_back(i);

  DetectionResult result;
  result.windows = members.size();
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> runnable;
  for (auto& [w, idx] : members) {
    if (idx.size() <= model.config.k) {
      result.skipped.push_back({w, idx.size(),
                                "window has " + std::to_string(idx.size()) +
                                    " flows; a snapshot needs more than K=" +
                                    std::to_string(model.config.k)});
    } else {
      runnable.emplace_back(w, std::move(idx));
    }
  }

  std::vector<SnapshotPrediction> predictions(runnable.size());
  parallel_for(runnable.size(), [&](std::size_t s) {
    std::vector<FlowRecord> subset;
    subset.reserve(runnable[s].second.size());
    for (auto i : runnable[s].second) subset.push_back(flows[i]);
    predictions[s] = infer_snapshot(model, subset);
  });

  std::vector<Detection> by_flow(flows.size());
  std::vector<bool> present(flows.size(), false);
  for (std::size_t s = 0; s < runnable.size(); ++s) {
    const auto& [w, idx] = runnable[s];
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto row = predictions[s].probabilities.row(r);
      by_flow[idx[r]] = Detection{flows[idx[r]].id, w, predictions[s].predicted[r],
                                  std::vector<double>(row.begin(), row.end())};
      present[idx[r]] = true;
    }
  }
  for (std::size_t i = 0; i < flows.size(); ++i)
    if (present[i]) result.detections.push_back(std::move(by_flow[i]));
  return result;
}

std::string detections_to_jsonl(const DetectionResult& result) {
  std::string out;
  for (const auto& d : result.detections) {
    nlohmann::ordered_json j;
    j["flow_id"] = d.flow_id;
    j["window"] = d.window;
    j["predicted"] = d.predicted;
    j["probabilities"] = d.probabilities;
    out += j.dump() + '\n';
  }
  for (const auto& s : result.skipped) {
    nlohmann::ordered_json j;
    j["window"] = s.window;
    j["skipped"] = true;
    j["flows"] = s.flows;
    j["reason"] = s.reason;
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace flowid
