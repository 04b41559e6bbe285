#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "flowid/error.hpp"
#include "flowid/flow_io.hpp"
#include "flowid/parallel.hpp"
#include "flowid/pcap.hpp"
#include "flowid/rng.hpp"
#include "flowid/synthetic.hpp"
#include "flowid/views.hpp"
#include "../support/testing.hpp"

using namespace flowid;
using flowid::testing::make_flow;

namespace {

const Ipv4 kA = Ipv4::parse("10.0.0.1");
const Ipv4 kB = Ipv4::parse("10.0.0.2");

CaptureFrame tcp_frame(double ts, bool a_to_b, std::uint32_t len,
                       std::vector<std::uint8_t> payload = {}) {
  CaptureFrame f;
  f.timestamp = ts;
  f.bytes = a_to_b ? build_frame(kA, 40000, kB, 443, Protocol::Tcp, len, payload)
                   : build_frame(kB, 443, kA, 40000, Protocol::Tcp, len, payload);
  f.original_length = static_cast<std::uint32_t>(f.bytes.size());
  return f;
}

CaptureFrame udp_frame(double ts, Ipv4 src, std::uint16_t sport, Ipv4 dst, std::uint16_t dport,
                       std::uint32_t len) {
  CaptureFrame f;
  f.timestamp = ts;
  f.bytes = build_frame(src, sport, dst, dport, Protocol::Udp, len, {});
  f.original_length = static_cast<std::uint32_t>(f.bytes.size());
  return f;
}

CaptureLimits limits(std::size_t n = 40, std::size_t m = 16, double timeout = 64.0) {
  return CaptureLimits{n, m, timeout};
}

void swap_u32(std::vector<std::uint8_t>& b, std::size_t at) { std::reverse(&b[at], &b[at] + 4); }
void swap_u16(std::vector<std::uint8_t>& b, std::size_t at) { std::swap(b[at], b[at + 1]); }

// Rewrites a little-endian capture into its big-endian twin.
std::vector<std::uint8_t> to_big_endian(std::vector<std::uint8_t> b) {
  swap_u32(b, 0);
  swap_u16(b, 4);
  swap_u16(b, 6);
  for (std::size_t at : {8, 12, 16, 20}) swap_u32(b, at);
  std::size_t off = 24;
  while (off + 16 <= b.size()) {
    std::uint32_t incl;
    std::memcpy(&incl, &b[off + 8], 4);
    for (std::size_t k = 0; k < 4; ++k) swap_u32(b, off + 4 * k);
    off += 16 + incl;
  }
  return b;
}

std::vector<int> directions(const FlowRecord& f) {
  std::vector<int> d;
  for (const auto& p : f.packets) d.push_back(p.direction);
  return d;
}

// Edge rule computed independently from the layer list: chain inside a layer,
// then last of layer i to first of layer i+1.
std::set<std::pair<std::size_t, std::size_t>> oracle_edges(const std::vector<int>& dirs) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < dirs.size(); ++i) edges.insert({i, i + 1});
  return edges;
}

}  // namespace

TEST(ParseCapture, ThreeTcpPacketsOneFlow) {
  const auto bytes = encode_capture({tcp_frame(1.0, true, 60), tcp_frame(1.1, false, 1500),
                                     tcp_frame(1.2, true, 54)});
  const auto result = parse_capture(bytes, limits());
  ASSERT_EQ(result.flows.size(), 1u);
  const auto& flow = result.flows[0];
  EXPECT_EQ(flow.id, "f0");
  EXPECT_EQ(directions(flow), (std::vector<int>{-1, 1, -1}));
  EXPECT_EQ(flow.key.src_addr, kA);
  EXPECT_EQ(flow.key.dst_port, 443);
  EXPECT_EQ(flow.packets[1].length, 1500u);
  EXPECT_FALSE(flow.label.has_value());
}

TEST(ParseCapture, HeaderOnlyGivesNoFlows) {
  const auto bytes = encode_capture({});
  ASSERT_EQ(bytes.size(), 24u);
  const auto result = parse_capture(bytes, limits());
  EXPECT_TRUE(result.flows.empty());
  EXPECT_EQ(result.stats.records, 0u);
}

TEST(ParseCapture, InterleavedUdpKeysKeepPerKeyOrder) {
  const Ipv4 c = Ipv4::parse("10.0.0.3"), d = Ipv4::parse("10.0.0.4");
  const auto bytes = encode_capture({udp_frame(1.0, kA, 5000, kB, 53, 70),
                                     udp_frame(1.1, c, 6000, d, 53, 80),
                                     udp_frame(1.2, kB, 53, kA, 5000, 90),
                                     udp_frame(1.3, d, 53, c, 6000, 100)});
  const auto result = parse_capture(bytes, limits());
  ASSERT_EQ(result.flows.size(), 2u);
  EXPECT_EQ(result.flows[0].key.src_addr, kA);
  EXPECT_EQ(result.flows[1].key.src_addr, c);
  for (const auto& f : result.flows) {
    ASSERT_EQ(f.packets.size(), 2u);
    EXPECT_EQ(directions(f), (std::vector<int>{-1, 1}));
    EXPECT_LT(f.packets[0].timestamp, f.packets[1].timestamp);
  }
  EXPECT_EQ(result.flows[0].packets[1].length, 90u);
  EXPECT_EQ(result.flows[1].packets[1].length, 100u);
}

TEST(ParseCapture, BadMagicIsParseErrorAtOffsetZero) {
  auto bytes = encode_capture({tcp_frame(1.0, true, 60)});
  bytes[0] ^= 0xff;
  try {
    parse_capture(bytes, limits());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(ParseCapture, ShortHeaderAndLinkTypeAreParseErrors) {
  const std::vector<std::uint8_t> tiny(10, 0);
  EXPECT_THROW(parse_capture(tiny, limits()), ParseError);
  auto bytes = encode_capture({});
  bytes[20] = 101;  // raw IP link type
  try {
    parse_capture(bytes, limits());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 20u);
  }
}

TEST(ParseCapture, MissingFileIsIoError) {
  EXPECT_THROW(parse_capture(std::filesystem::path("/nonexistent/x.pcap"), limits()), IoError);
}

TEST(ParseCapture, TruncatedRecordIsCountedAndSkipped) {
  auto bytes = encode_capture({tcp_frame(1.0, true, 60), tcp_frame(1.1, false, 80)});
  bytes.resize(bytes.size() - 5);
  const auto result = parse_capture(bytes, limits());
  EXPECT_EQ(result.stats.truncated_records, 1u);
  ASSERT_EQ(result.flows.size(), 1u);
  EXPECT_EQ(result.flows[0].packets.size(), 1u);
}

TEST(ParseCapture, BigEndianMatchesLittleEndian) {
  const auto le = encode_capture({tcp_frame(1.0, true, 60, {1, 2, 3}), tcp_frame(1.5, false, 90)});
  const auto a = parse_capture(le, limits());
  const auto b = parse_capture(to_big_endian(le), limits());
  EXPECT_EQ(a.flows, b.flows);
}

TEST(ParseCapture, NanosecondMagic) {
  auto bytes = encode_capture({tcp_frame(7.25, true, 60)});
  bytes[0] = 0x4d;
  bytes[1] = 0x3c;  // 0xa1b23c4d little endian
  const std::uint32_t ns = 250'000'000;
  std::memcpy(&bytes[24 + 4], &ns, 4);
  const auto result = parse_capture(bytes, limits());
  ASSERT_EQ(result.flows.size(), 1u);
  EXPECT_DOUBLE_EQ(result.flows[0].packets[0].timestamp, 7.25);
}

TEST(ParseCapture, IdleGapStartsNewFlow) {
  const auto bytes = encode_capture({tcp_frame(0.0, true, 60), tcp_frame(10.0, false, 60),
                                     tcp_frame(100.0, false, 60), tcp_frame(101.0, true, 60)});
  const auto result = parse_capture(bytes, limits(40, 16, 64.0));
  ASSERT_EQ(result.flows.size(), 2u);
  EXPECT_EQ(result.flows[0].packets.size(), 2u);
  // The second flow is initiated by B.
  EXPECT_EQ(result.flows[1].key.src_addr, kB);
  EXPECT_EQ(directions(result.flows[1]), (std::vector<int>{-1, 1}));
  // A gap equal to the timeout does not split.
  const auto exact = parse_capture(bytes, limits(40, 16, 90.0));
  EXPECT_EQ(exact.flows.size(), 1u);
}

TEST(ParseCapture, KeepsFirstNPacketsAndMBytes) {
  std::vector<CaptureFrame> frames;
  for (int i = 0; i < 6; ++i)
    frames.push_back(tcp_frame(i * 0.1, i % 2 == 0, 100, {9, 8, 7, 6, 5, 4}));
  const auto result = parse_capture(encode_capture(frames), limits(4, 3));
  ASSERT_EQ(result.flows.size(), 1u);
  ASSERT_EQ(result.flows[0].packets.size(), 4u);
  EXPECT_EQ(result.stats.packets_beyond_n, 2u);
  EXPECT_EQ(result.flows[0].packets[3].payload_prefix, (std::vector<std::uint8_t>{9, 8, 7}));
}

TEST(ParseCapture, SyntheticRoundTripIsExact) {
  auto flows = flowid::testing::toy_flows(6, 3);
  std::sort(flows.begin(), flows.end(),
            [](const auto& a, const auto& b) { return a.start_time() < b.start_time(); });
  const auto parsed = parse_capture(encode_capture(flows_to_frames(flows)), limits(40, 16, 1e9));
  ASSERT_EQ(parsed.flows.size(), flows.size());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    EXPECT_EQ(parsed.flows[i].key, flows[i].key);
    EXPECT_EQ(parsed.flows[i].packets, flows[i].packets) << "flow " << i;
  }
}

TEST(ParseCapture, SwappingEndpointsPreservesPartition) {
  // Swapping src/dst on every packet also swaps who the initiator is, so flows
  // keep the same packets, reversed keys, and identical direction signs.
  auto flows = flowid::testing::toy_flows(5, 11);
  auto swapped = flows;
  for (auto& f : swapped) f.key = f.key.reversed();
  const auto a = parse_capture(encode_capture(flows_to_frames(flows)), limits(40, 16, 1e9));
  const auto b = parse_capture(encode_capture(flows_to_frames(swapped)), limits(40, 16, 1e9));
  ASSERT_EQ(a.flows.size(), b.flows.size());
  for (std::size_t i = 0; i < a.flows.size(); ++i) {
    EXPECT_EQ(a.flows[i].key.reversed(), b.flows[i].key);
    EXPECT_TRUE(a.flows[i].key.same_flow(b.flows[i].key));
    EXPECT_EQ(a.flows[i].packets, b.flows[i].packets);
  }
}

TEST(ParseCapture, GoldenFixture) {
  const std::filesystem::path dir = FLOWID_FIXTURE_DIR;
  const auto result = parse_capture(dir / "golden.pcap", limits(3, 4, 64.0));
  const auto expected = read_flows_jsonl(dir / "golden.jsonl");
  ASSERT_EQ(result.flows.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(flow_to_json_line(result.flows[i]), flow_to_json_line(expected[i]));
    EXPECT_EQ(result.flows[i], expected[i]);
  }
  EXPECT_EQ(result.stats.skipped_non_ip, 1u);
  EXPECT_EQ(result.stats.truncated_records, 1u);
  EXPECT_EQ(result.stats.packets_beyond_n, 1u);
  EXPECT_EQ(result.stats.records, 12u);

  std::ifstream golden(dir / "golden.jsonl", std::ios::binary);
  const std::string want((std::istreambuf_iterator<char>(golden)), {});
  std::ostringstream got;
  write_flows_jsonl(got, result.flows);
  EXPECT_EQ(got.str(), want);
}

TEST(FiveTuple, BidirectionalEquality) {
  const FiveTuple k{kA, kB, 1, 2, Protocol::Udp};
  EXPECT_TRUE(k.same_flow(k.reversed()));
  EXPECT_FALSE(k == k.reversed());
  FiveTuple other = k;
  other.protocol = Protocol::Tcp;
  EXPECT_FALSE(k.same_flow(other));
  EXPECT_EQ(Ipv4::parse("192.168.0.255").to_string(), "192.168.0.255");
  EXPECT_THROW(Ipv4::parse("1.2.3"), FormatError);
  EXPECT_THROW(Ipv4::parse("1.2.3.256"), FormatError);
}

TEST(LengthSequence, Examples) {
  EXPECT_EQ(flow_to_length_sequence(make_flow({{-1, 60}, {1, 1500}, {-1, 40}}), 5).values,
            (std::vector<std::int64_t>{-60, 1500, -40, 0, 0}));
  EXPECT_EQ(flow_to_length_sequence(make_flow({{1, 64}}), 2).values,
            (std::vector<std::int64_t>{64, 0}));
  EXPECT_EQ(flow_to_length_sequence(make_flow({{-1, 60}, {1, 1500}, {-1, 40}}), 2).values,
            (std::vector<std::int64_t>{-60, 1500}));
}

TEST(PayloadMatrix, Examples) {
  const auto a = flow_to_payload_matrix(make_flow({{-1, 60}}, {{0x41, 0x42}}), 1, 4);
  EXPECT_EQ(a.values, (std::vector<std::uint8_t>{65, 66, 0, 0}));
  const auto ack = flow_to_payload_matrix(make_flow({{-1, 54}}), 1, 4);
  EXPECT_EQ(ack.values, (std::vector<std::uint8_t>{0, 0, 0, 0}));
  const auto pad = flow_to_payload_matrix(make_flow({{-1, 60}}, {{1, 2, 3, 4, 5}}), 3, 4);
  ASSERT_EQ(pad.rows, 3u);
  EXPECT_EQ(pad(0, 3), 4);
  for (std::size_t r = 1; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pad(r, c), 0);
}

TEST(Tig, LayeredExample) {
  const auto tig = flow_to_tig(make_flow({{-1, 60}, {-1, 60}, {1, 60}, {-1, 60}}), 40);
  EXPECT_EQ(tig.node_count, 4u);
  using R = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(tig.layers, (std::vector<R>{{0, 2}, {2, 3}, {3, 4}}));
  EXPECT_EQ(tig.edges, (std::vector<R>{{0, 1}, {1, 2}, {2, 3}}));
  EXPECT_TRUE(tig.adjacent(2, 1));
  EXPECT_FALSE(tig.adjacent(0, 2));
}

TEST(Tig, SinglePacketAndFeatures) {
  const auto one = flow_to_tig(make_flow({{1, 64}}), 5);
  EXPECT_EQ(one.node_count, 1u);
  EXPECT_TRUE(one.edges.empty());
  EXPECT_EQ(one.layers.size(), 1u);

  const auto two = flow_to_tig(make_flow({{-1, 60}, {1, 1500}}), 5);
  using F = std::pair<double, double>;
  EXPECT_EQ(two.features, (std::vector<F>{{-60, -1}, {1500, 1}}));
  EXPECT_EQ(two.edges.size(), 1u);
  EXPECT_THROW(flow_to_tig(FlowRecord{}, 5), ConfigError);
}

TEST(Tig, LayerAndEdgeProperties) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto count = static_cast<std::size_t>(rng.uniform_int(1, 30));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 25));
    std::vector<std::pair<int, std::uint32_t>> packets;
    for (std::size_t i = 0; i < count; ++i)
      packets.push_back({rng.bernoulli(0.5) ? 1 : -1,
                         static_cast<std::uint32_t>(rng.uniform_int(40, 1500))});
    const auto flow = make_flow(packets);
    const auto tig = flow_to_tig(flow, n);
    const std::size_t nodes = std::min(n, count);
    ASSERT_EQ(tig.node_count, nodes);

    std::size_t expect_begin = 0;
    for (std::size_t l = 0; l < tig.layers.size(); ++l) {
      const auto [b, e] = tig.layers[l];
      ASSERT_EQ(b, expect_begin);
      ASSERT_LT(b, e);
      for (std::size_t i = b; i < e; ++i) ASSERT_EQ(packets[i].first, packets[b].first);
      if (l > 0) ASSERT_NE(packets[b].first, packets[tig.layers[l - 1].first].first);
      expect_begin = e;
    }
    ASSERT_EQ(expect_begin, nodes);

    std::vector<int> dirs;
    for (std::size_t i = 0; i < nodes; ++i) dirs.push_back(packets[i].first);
    const std::set<std::pair<std::size_t, std::size_t>> got(tig.edges.begin(), tig.edges.end());
    ASSERT_EQ(got, oracle_edges(dirs));
    for (std::size_t i = 0; i < nodes; ++i) {
      ASSERT_FALSE(tig.adjacent(i, i));
      for (std::size_t j = 0; j < nodes; ++j) ASSERT_EQ(tig.adjacent(i, j), tig.adjacent(j, i));
    }
  }
}

TEST(ViewBatch, ShapesAndPadding) {
  const auto flows = flowid::testing::toy_flows(4, 2);
  const auto batch = build_view_batch(flows, 7, 5);
  EXPECT_EQ(batch.lengths.shape(), (Tensor::Shape{flows.size(), 7}));
  EXPECT_EQ(batch.payloads.shape(), (Tensor::Shape{flows.size(), 7, 5}));
  for (std::size_t i = 0; i < flows.size(); ++i) {
    EXPECT_LE(batch.tigs[i].node_count, 7u);
    const auto seq = flow_to_length_sequence(flows[i], 7);
    for (std::size_t j = 0; j < 7; ++j)
      EXPECT_EQ(batch.lengths(i, j), static_cast<double>(seq.values[j]));
  }
  const auto sub = batch.subset({2, 0});
  EXPECT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.lengths(1, 0), batch.lengths(0, 0));
}

TEST(ViewBatch, IndependentOfThreadCount) {
  const auto flows = flowid::testing::toy_flows(10, 4);
  set_thread_count(1);
  const auto one = build_view_batch(flows, 40, 16);
  set_thread_count(3);
  const auto three = build_view_batch(flows, 40, 16);
  set_thread_count(0);
  EXPECT_EQ(one.lengths, three.lengths);
  EXPECT_EQ(one.payloads, three.payloads);
}

TEST(FlowJson, CanonicalLine) {
  FlowRecord f = make_flow({{-1, 60}}, {{0xab, 0x01}});
  f.id = "x";
  f.label = 2;
  f.packets[0].timestamp = 1.5;
  EXPECT_EQ(flow_to_json_line(f),
            R"({"id":"x","five_tuple":{"src":"10.0.0.1","sport":40000,"dst":"10.0.0.2",)"
            R"("dport":443,"proto":"tcp"},"label":2,"packets":[{"ts":1.5,"dir":-1,"len":60,)"
            R"("payload_hex":"ab01"}]})");
}

TEST(FlowJson, RoundTripRandomFlows) {
  Rng rng(23);
  std::vector<FlowRecord> flows;
  for (int i = 0; i < 50; ++i) {
    FlowRecord f;
    f.id = "id" + std::to_string(i);
    f.key = FiveTuple{Ipv4{static_cast<std::uint32_t>(rng.next_u64())},
                      Ipv4{static_cast<std::uint32_t>(rng.next_u64())},
                      static_cast<std::uint16_t>(rng.uniform_int(0, 65535)),
                      static_cast<std::uint16_t>(rng.uniform_int(0, 65535)),
                      rng.bernoulli(0.5) ? Protocol::Tcp : Protocol::Udp};
    if (rng.bernoulli(0.7)) f.label = static_cast<int>(rng.uniform_int(0, 5));
    const auto count = rng.uniform_int(1, 8);
    double ts = rng.uniform(0, 2e9);
    for (int k = 0; k < count; ++k) {
      PacketView p;
      ts += rng.uniform(0, 1);
      p.timestamp = ts;
      p.direction = rng.bernoulli(0.5) ? 1 : -1;
      p.length = static_cast<std::uint32_t>(rng.uniform_int(1, 9000));
      const auto bytes = rng.uniform_int(0, 16);
      for (int b = 0; b < bytes; ++b) p.payload_prefix.push_back(std::uint8_t(rng.uniform_int(0, 255)));
      f.packets.push_back(std::move(p));
    }
    flows.push_back(std::move(f));
  }
  std::stringstream buffer;
  write_flows_jsonl(buffer, flows);
  EXPECT_EQ(read_flows_jsonl(buffer), flows);
}

TEST(FlowJson, ErrorsNameTheLine) {
  std::stringstream in;
  in << flow_to_json_line(make_flow({{-1, 60}})) << "\n\n{\"id\":3}\n";
  try {
    read_flows_jsonl(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(flow_from_json_line("not json"), FormatError);
  EXPECT_THROW(from_hex("abc"), FormatError);
  EXPECT_EQ(to_hex({0x00, 0xff, 0x1a}), "00ff1a");
  EXPECT_EQ(from_hex("00FF1a"), (std::vector<std::uint8_t>{0x00, 0xff, 0x1a}));
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  const auto a = generate_synthetic_flows(separable2_spec(10, 7));
  const auto b = generate_synthetic_flows(separable2_spec(10, 7));
  ASSERT_EQ(a.size(), 20u);
  std::stringstream sa, sb;
  write_flows_jsonl(sa, a);
  write_flows_jsonl(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  const auto c = generate_synthetic_flows(separable2_spec(10, 8));
  EXPECT_NE(a, c);
}

TEST(Synthetic, FixedLengthSingleDirectionClass) {
  SyntheticSpec spec;
  spec.seed = 3;
  SyntheticClass fixed;
  fixed.count = 15;
  fixed.request_length = {100, 0, 60, 1514};
  fixed.response_length = {100, 0, 60, 1514};
  fixed.directions.cycle = {-1};
  SyntheticClass other = fixed;
  other.directions.cycle = {-1, 1};
  spec.classes = {fixed, other};
  for (const auto& f : generate_synthetic_flows(spec)) {
    ASSERT_TRUE(f.label.has_value());
    if (*f.label != 0) continue;
    for (auto v : flow_to_length_sequence(f, 40).values) EXPECT_TRUE(v == -100 || v == 0) << v;
  }
}

TEST(Synthetic, LabelsCountsAndErrors) {
  const auto flows = generate_synthetic_flows(threeclass_spec(12, 1));
  std::vector<int> counts(3, 0);
  for (const auto& f : flows) {
    ++counts.at(static_cast<std::size_t>(*f.label));
    EXPECT_FALSE(f.packets.empty());
    EXPECT_EQ(f.packets.front().direction, -1);
    EXPECT_TRUE(std::is_sorted(f.packets.begin(), f.packets.end(), [](auto& x, auto& y) {
      return x.timestamp < y.timestamp;
    }));
  }
  EXPECT_EQ(counts, (std::vector<int>{12, 12, 12}));
  SyntheticSpec one;
  one.classes.resize(1);
  EXPECT_THROW(generate_synthetic_flows(one), ConfigError);
  auto zero = separable2_spec(3, 1);
  zero.classes[0].count = 0;
  EXPECT_THROW(generate_synthetic_flows(zero), ConfigError);
  EXPECT_THROW(preset_spec("nope", 3, 1), ConfigError);
}

TEST(Synthetic, SplitAndLabelFraction) {
  const auto flows = generate_synthetic_flows(separable2_spec(50, 5));
  const auto split = split_flows(flows, 0.6, 0.2, 9);
  EXPECT_EQ(split.train.size() + split.val.size() + split.test.size(), flows.size());
  EXPECT_EQ(split.train.size(), 60u);
  EXPECT_EQ(split.val.size(), 20u);
  const auto partial = keep_label_fraction(flows, 0.1, 4);
  std::vector<int> kept(2, 0);
  for (const auto& f : partial)
    if (f.label) ++kept[static_cast<std::size_t>(*f.label)];
  EXPECT_EQ(kept, (std::vector<int>{5, 5}));
}
