#include "flowid/augment.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "flowid/error.hpp"
#include "flowid/rng.hpp"

namespace flowid {

namespace {

void check_probability(double p, const char* op) {
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError(std::string(op) + ": probability must be in [0, 1), got " + std::to_string(p));
}

}  // namespace

FlowHypergraph node_feature_mask(const FlowHypergraph& graph, double p, Rng& rng) {
  check_probability(p, "nf");
  FlowHypergraph out = graph;
  if (out.feature_mask.size() != out.node_count()) out.feature_mask.assign(out.node_count(), 1.0);
  for (std::size_t i = 0; i < out.node_count(); ++i) {
    if (rng.bernoulli(p)) {
      out.feature_mask[i] = 0.0;
      auto row = out.features.row(i);
      std::fill(row.begin(), row.end(), 0.0);
    }
  }
  return out;
}

FlowHypergraph hyperedge_weight_perturb(const FlowHypergraph& graph, double p, double noise_mean,
                                        double noise_std, Rng& rng) {
  check_probability(p, "ew");
  if (!(noise_std > 0)) throw ConfigError("ew: noise standard deviation must be positive");
  FlowHypergraph out = graph;
  for (auto& w : out.edge_weights)
    if (rng.bernoulli(p)) w = std::max(0.0, rng.normal(noise_mean, noise_std));
  out.recompute_degrees();
  return out;
}

FlowHypergraph membership_mask(const FlowHypergraph& graph, double p, Rng& rng) {
  check_probability(p, "ed");
  FlowHypergraph out = graph;
  for (auto& members : out.edges) {
    std::vector<std::size_t> kept;
    kept.reserve(members.size());
    for (auto i : members)
      if (!rng.bernoulli(p)) kept.push_back(i);
    members = std::move(kept);
  }
  out.recompute_degrees();
  return out;
}

AugmentationPipeline AugmentationPipeline::parse(const std::string& text) {
  AugmentationPipeline pipeline;
  if (text.empty() || text == "none") return pipeline;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const std::size_t comma = std::min(text.find(',', begin), text.size());
    const std::string item = text.substr(begin, comma - begin);
    begin = comma + 1;
    if (item.empty()) throw ConfigError("empty augmentation step in '" + text + "'");
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("augmentation step '" + item + "' must look like nf:<p>, ew:<p> or ed:<p>");
    const std::string name = item.substr(0, colon);
    const std::string value = item.substr(colon + 1);
    AugmentStep step;
    if (name == "nf") {
      step.kind = AugmentStep::Kind::NodeFeature;
    } else if (name == "ew") {
      step.kind = AugmentStep::Kind::EdgeWeight;
    } else if (name == "ed") {
      step.kind = AugmentStep::Kind::EdgeDrop;
    } else {
      throw ConfigError("unknown augmentation '" + name + "' (expected nf, ew or ed)");
    }
    const char* first = value.data();
    const char* last = first + value.size();
    auto [ptr, ec] = std::from_chars(first, last, step.p);
    if (ec != std::errc() || ptr != last || value.empty())
      throw ConfigError("augmentation probability '" + value + "' is not a number");
    check_probability(step.p, name.c_str());
    pipeline.steps.push_back(step);
  }
  return pipeline;
}

std::string AugmentationPipeline::to_string() const {
  if (steps.empty()) return "none";
  std::string out;
  for (const auto& s : steps) {
    if (!out.empty()) out += ',';
    out += s.kind == AugmentStep::Kind::NodeFeature  ? "nf:"
           : s.kind == AugmentStep::Kind::EdgeWeight ? "ew:"
                                                      : "ed:";
    std::ostringstream p;
    p << s.p;
    out += p.str();
  }
  return out;
}

FlowHypergraph AugmentationPipeline::apply(const FlowHypergraph& graph, Rng& rng) const {
  FlowHypergraph out = graph;
  for (const auto& s : steps) {
    switch (s.kind) {
      case AugmentStep::Kind::NodeFeature:
        out = node_feature_mask(out, s.p, rng);
        break;
      case AugmentStep::Kind::EdgeWeight:
        out = hyperedge_weight_perturb(out, s.p, s.noise_mean, s.noise_std, rng);
        break;
      case AugmentStep::Kind::EdgeDrop:
        out = membership_mask(out, s.p, rng);
        break;
    }
  }
  return out;
}

std::pair<FlowHypergraph, FlowHypergraph> make_views(const FlowHypergraph& graph,
                                                     const AugmentationPipeline& t1,
                                                     const AugmentationPipeline& t2, Rng& rng) {
  Rng r1(mix_seed(rng.next_u64()));
  Rng r2(mix_seed(rng.next_u64()));
  return {t1.apply(graph, r1), t2.apply(graph, r2)};
}

}  // namespace flowid
