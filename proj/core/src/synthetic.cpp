#include "flowid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "flowid/error.hpp"
#include "flowid/pcap.hpp"
#include "flowid/rng.hpp"

namespace flowid {

namespace {

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(items[i - 1], items[j]);
  }
}

std::uint32_t draw_length(const LengthDistribution& d, Rng& rng) {
  double v = d.stddev > 0 ? rng.normal(d.mean, d.stddev) : d.mean;
  v = std::clamp(std::round(v), static_cast<double>(d.min), static_cast<double>(d.max));
  return static_cast<std::uint32_t>(v);
}

double quantize_micros(double t) {
  const double sec = std::floor(t);
  const double usec = std::round((t - sec) * 1e6);
  return sec + usec / 1e6;
}

void validate(const SyntheticSpec& spec) {
  if (spec.classes.size() < 2) throw ConfigError("synthetic spec needs at least two classes");
  if (spec.payload_bytes == 0) throw ConfigError("payload_bytes must be >= 1");
  for (const auto& c : spec.classes) {
    if (c.count == 0) throw ConfigError("synthetic class count must be >= 1");
    if (c.min_packets == 0 || c.min_packets > c.max_packets)
      throw ConfigError("synthetic class needs 1 <= min_packets <= max_packets");
    if (c.directions.cycle.empty()) throw ConfigError("direction cycle must be non-empty");
    if (c.payload.byte_lo > c.payload.byte_hi) throw ConfigError("payload byte range is empty");
  }
}

}  // namespace

std::vector<FlowRecord> generate_synthetic_flows(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  std::vector<FlowRecord> flows;
  for (std::size_t label = 0; label < spec.classes.size(); ++label) {
    const auto& cls = spec.classes[label];
    for (std::size_t k = 0; k < cls.count; ++k) {
      FlowRecord flow;
      flow.label = static_cast<int>(label);
      flow.key.protocol = cls.protocol;
      flow.key.src_addr = Ipv4{0x0a000000u | static_cast<std::uint32_t>(rng.uniform_int(1, 0xfffe))};
      flow.key.dst_addr = Ipv4{0xc0a80000u | static_cast<std::uint32_t>(rng.uniform_int(1, 0xfffe))};
      flow.key.src_port = static_cast<std::uint16_t>(rng.uniform_int(1024, 65535));
      flow.key.dst_port = cls.server_port;

      const auto packets = static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(cls.min_packets), static_cast<std::int64_t>(cls.max_packets)));
      double t = spec.start_time + rng.uniform() * spec.span;
      const std::uint32_t overhead = header_overhead(cls.protocol);
      for (std::size_t i = 0; i < packets; ++i) {
        PacketView p;
        int dir = cls.directions.cycle[i % cls.directions.cycle.size()];
        if (i > 0 && rng.bernoulli(cls.directions.flip_probability)) dir = -dir;
        if (i == 0) dir = -1;
        p.direction = dir;
        p.length = std::max(overhead, draw_length(dir < 0 ? cls.request_length
                                                          : cls.response_length, rng));
        const std::size_t carried =
            std::min<std::size_t>(spec.payload_bytes, p.length - overhead);
        p.payload_prefix.resize(carried);
        for (std::size_t b = 0; b < carried; ++b) {
          p.payload_prefix[b] =
              b < cls.payload.signature.size()
                  ? cls.payload.signature[b]
                  : static_cast<std::uint8_t>(rng.uniform_int(cls.payload.byte_lo, cls.payload.byte_hi));
        }
        if (i > 0) t += -std::log1p(-rng.uniform()) * cls.mean_gap;
        p.timestamp = quantize_micros(t);
        flow.packets.push_back(std::move(p));
      }
      flows.push_back(std::move(flow));
    }
  }
  shuffle(flows, rng);
  for (std::size_t i = 0; i < flows.size(); ++i) flows[i].id = "s" + std::to_string(i);
  return flows;
}

SyntheticSpec separable2_spec(std::size_t per_class, std::uint64_t seed) {
  SyntheticClass web;
  web.count = per_class;
  web.min_packets = 8;
  web.max_packets = 40;
  web.request_length = {120, 30, 60, 400};
  web.response_length = {1200, 150, 600, 1514};
  web.payload = {{0x16, 0x03, 0x01}, 0, 255};
  web.directions = {{-1, +1, +1}, 0.1};
  web.server_port = 443;

  SyntheticClass dns;
  dns.count = per_class;
  dns.min_packets = 2;
  dns.max_packets = 12;
  dns.request_length = {80, 8, 60, 120};
  dns.response_length = {180, 40, 80, 512};
  dns.payload = {{0x00, 0x01}, 0, 63};
  dns.directions = {{-1, +1}, 0.0};
  dns.protocol = Protocol::Udp;
  dns.server_port = 53;
  dns.mean_gap = 0.01;

  SyntheticSpec spec;
  spec.classes = {web, dns};
  spec.seed = seed;
  return spec;
}

SyntheticSpec threeclass_spec(std::size_t per_class, std::uint64_t seed) {
  // Shared port, protocol and packet-count range; means overlap within about
  // one standard deviation so no single view separates the classes cleanly.
  SyntheticClass base;
  base.count = per_class;
  base.min_packets = 6;
  base.max_packets = 30;
  base.server_port = 443;
  base.payload = {{}, 0, 255};

  SyntheticClass a = base;
  a.request_length = {300, 180, 60, 1514};
  a.response_length = {900, 350, 60, 1514};
  a.payload = {{}, 0, 200};
  a.directions = {{-1, +1, +1}, 0.25};

  SyntheticClass b = base;
  b.request_length = {450, 180, 60, 1514};
  b.response_length = {700, 350, 60, 1514};
  b.payload = {{}, 40, 240};
  b.directions = {{-1, +1}, 0.25};

  SyntheticClass c = base;
  c.request_length = {380, 180, 60, 1514};
  c.response_length = {1000, 350, 60, 1514};
  c.payload = {{}, 20, 255};
  c.directions = {{-1, -1, +1}, 0.25};

  SyntheticSpec spec;
  spec.classes = {a, b, c};
  spec.seed = seed;
  return spec;
}

SyntheticSpec preset_spec(const std::string& name, std::size_t per_class, std::uint64_t seed) {
  if (name == "separable2") return separable2_spec(per_class, seed);
  if (name == "threeclass") return threeclass_spec(per_class, seed);
  throw ConfigError("unknown synthetic preset '" + name + "' (expected separable2 or threeclass)");
}

namespace {

std::map<int, std::vector<std::size_t>> strata(const std::vector<FlowRecord>& flows, Rng& rng) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < flows.size(); ++i) groups[flows[i].label.value_or(-1)].push_back(i);
  for (auto& [_, idx] : groups) shuffle(idx, rng);
  return groups;
}

}  // namespace

FlowSplit split_flows(const std::vector<FlowRecord>& flows, double train_fraction,
                      double val_fraction, std::uint64_t seed) {
  if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0)
    throw ConfigError("split fractions must be nonnegative and sum to at most 1");
  Rng rng(seed);
  std::vector<std::size_t> train, val, test;
  for (const auto& [_, idx] : strata(flows, rng)) {
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
    const auto n_val = std::min(idx.size() - n_train,
                                static_cast<std::size_t>(std::llround(n * val_fraction)));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_train ? train : k < n_train + n_val ? val : test).push_back(idx[k]);
    }
  }
  // Restore the original relative order inside each part.
  FlowSplit split;
  auto take = [&](std::vector<std::size_t>& idx, std::vector<FlowRecord>& out) {
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) out.push_back(flows[i]);
  };
  take(train, split.train);
  take(val, split.val);
  take(test, split.test);
  return split;
}

std::vector<FlowRecord> keep_label_fraction(std::vector<FlowRecord> flows, double fraction,
                                            std::uint64_t seed) {
  if (fraction <= 0 || fraction > 1) throw ConfigError("label fraction must be in (0, 1]");
  Rng rng(seed);
  for (const auto& [label, idx] : strata(flows, rng)) {
    if (label < 0) continue;
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * fraction)));
    for (std::size_t k = keep; k < idx.size(); ++k) flows[idx[k]].label.reset();
  }
  return flows;
}

}  // namespace flowid
