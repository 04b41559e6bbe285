#include "flowid/views.hpp"

#include <algorithm>

#include "flowid/error.hpp"
#include "flowid/parallel.hpp"

namespace flowid {

LengthSequence flow_to_length_sequence(const FlowRecord& flow, std::size_t n) {
  if (n == 0) throw ConfigError("n must be >= 1");
  LengthSequence seq;
  seq.values.assign(n, 0);
  const std::size_t used = std::min(n, flow.packets.size());
  for (std::size_t i = 0; i < used; ++i) {
    const auto& p = flow.packets[i];
    seq.values[i] = static_cast<std::int64_t>(p.direction) * static_cast<std::int64_t>(p.length);
  }
  return seq;
}

PayloadMatrix flow_to_payload_matrix(const FlowRecord& flow, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw ConfigError("n and m must be >= 1");
  PayloadMatrix out{n, m, std::vector<std::uint8_t>(n * m, 0)};
  const std::size_t used = std::min(n, flow.packets.size());
  for (std::size_t i = 0; i < used; ++i) {
    const auto& bytes = flow.packets[i].payload_prefix;
    const std::size_t take = std::min(m, bytes.size());
    std::copy_n(bytes.begin(), take, out.values.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  return out;
}

Tig flow_to_tig(const FlowRecord& flow, std::size_t n) {
  if (n == 0) throw ConfigError("n must be >= 1");
  if (flow.packets.empty()) throw ConfigError("flow " + flow.id + " has no packets");
  Tig tig;
  const std::size_t count = std::min(n, flow.packets.size());
  tig.node_count = count;
  tig.adjacency.assign(count * count, 0);
  tig.features.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = flow.packets[i];
    tig.features.emplace_back(static_cast<double>(p.direction) * p.length,
                              static_cast<double>(p.direction));
  }
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= count; ++i) {
    if (i == count || flow.packets[i].direction != flow.packets[begin].direction) {
      tig.layers.emplace_back(begin, i);
      begin = i;
    }
  }
  // Within a layer packets are chained; across layers the last packet of one
  // layer meets the first of the next. Both cases join i and i+1.
  for (std::size_t i = 0; i + 1 < count; ++i) {
    tig.edges.emplace_back(i, i + 1);
    tig.adjacency[i * count + i + 1] = 1;
    tig.adjacency[(i + 1) * count + i] = 1;
  }
  return tig;
}

ViewBatch ViewBatch::subset(const std::vector<std::size_t>& indices) const {
  ViewBatch out;
  out.n = n;
  out.m = m;
  out.lengths = Tensor::matrix(indices.size(), n);
  out.payloads = Tensor({indices.size(), n, m});
  out.tigs.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    if (src >= size()) throw ShapeError("view batch index out of range");
    std::copy_n(lengths.row(src).begin(), n, out.lengths.row(r).begin());
    std::copy_n(payloads.data() + src * n * m, n * m, out.payloads.data() + r * n * m);
    out.tigs.push_back(tigs[src]);
  }
  return out;
}

ViewBatch build_view_batch(const std::vector<FlowRecord>& flows, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw ConfigError("n and m must be >= 1");
  ViewBatch batch;
  batch.n = n;
  batch.m = m;
  batch.lengths = Tensor::matrix(flows.size(), n);
  batch.payloads = Tensor({flows.size(), n, m});
  batch.tigs.resize(flows.size());
  parallel_for(flows.size(), [&](std::size_t i) {
    const auto seq = flow_to_length_sequence(flows[i], n);
    for (std::size_t t = 0; t < n; ++t) batch.lengths(i, t) = static_cast<double>(seq.values[t]);
    const auto bytes = flow_to_payload_matrix(flows[i], n, m);
    double* dst = batch.payloads.data() + i * n * m;
    for (std::size_t k = 0; k < n * m; ++k) dst[k] = bytes.values[k];
    batch.tigs[i] = flow_to_tig(flows[i], n);
  });
  return batch;
}

}  // namespace flowid
