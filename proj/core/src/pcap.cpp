#include "flowid/pcap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <tuple>

#include "flowid/error.hpp"

namespace flowid {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::size_t kGlobalHeader = 24;
constexpr std::size_t kRecordHeader = 16;
constexpr std::size_t kEthernetHeader = 14;
constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherVlan = 0x8100;

std::uint32_t bswap32(std::uint32_t v) {
  return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}

std::uint32_t read_le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_be16(const std::uint8_t* p) { return std::uint16_t((p[0] << 8) | p[1]); }

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

struct Endpoint {
  std::uint32_t addr;
  std::uint16_t port;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

// Orientation-free key: (protocol, lower endpoint, higher endpoint).
using CanonicalKey = std::tuple<std::uint8_t, Endpoint, Endpoint>;

struct DecodedPacket {
  Ipv4 src, dst;
  std::uint16_t sport = 0, dport = 0;
  Protocol protocol = Protocol::Tcp;
  std::span<const std::uint8_t> payload;
};

enum class Decode { Ok, NotIp, Malformed };

Decode decode_frame(std::span<const std::uint8_t> frame, DecodedPacket& out) {
  if (frame.size() < kEthernetHeader) return Decode::Malformed;
  std::size_t offset = 12;
  std::uint16_t ether_type = read_be16(&frame[offset]);
  offset += 2;
  if (ether_type == kEtherVlan) {
    if (frame.size() < offset + 4) return Decode::Malformed;
    ether_type = read_be16(&frame[offset + 2]);
    offset += 4;
  }
  if (ether_type != kEtherIpv4) return Decode::NotIp;
  if (frame.size() < offset + 20) return Decode::Malformed;
  const std::uint8_t* ip = &frame[offset];
  if ((ip[0] >> 4) != 4) return Decode::NotIp;
  const std::size_t ihl = std::size_t(ip[0] & 0x0f) * 4;
  if (ihl < 20) return Decode::Malformed;
  const std::size_t total_length = read_be16(ip + 2);
  const std::uint16_t fragment = read_be16(ip + 6) & 0x1fff;
  if (fragment != 0) return Decode::NotIp;
  const std::uint8_t proto = ip[9];
  if (proto != 6 && proto != 17) return Decode::NotIp;
  out.protocol = proto == 6 ? Protocol::Tcp : Protocol::Udp;
  out.src = Ipv4{read_be32(ip + 12)};
  out.dst = Ipv4{read_be32(ip + 16)};

  // IPv4 total length bounds the datagram; trailing Ethernet padding is excluded.
  const std::size_t ip_end = std::min(frame.size(), offset + std::max(total_length, ihl));
  const std::size_t l4 = offset + ihl;
  std::size_t l4_header = 0;
  if (out.protocol == Protocol::Tcp) {
    if (ip_end < l4 + 20) return Decode::Malformed;
    l4_header = std::size_t(frame[l4 + 12] >> 4) * 4;
    if (l4_header < 20) return Decode::Malformed;
  } else {
    l4_header = 8;
    if (ip_end < l4 + 8) return Decode::Malformed;
  }
  out.sport = read_be16(&frame[l4]);
  out.dport = read_be16(&frame[l4 + 2]);
  const std::size_t payload_begin = std::min(ip_end, l4 + l4_header);
  out.payload = frame.subspan(payload_begin, ip_end - payload_begin);
  return Decode::Ok;
}

struct ActiveFlow {
  std::size_t index;
  double last_seen;
};

struct PendingPacket {
  PacketView view;
  std::size_t order;
};

}  // namespace

CaptureResult parse_capture(const std::filesystem::path& path, const CaptureLimits& limits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open capture file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading capture file: " + path.string());
  return parse_capture(std::span<const std::uint8_t>(bytes), limits);
}

CaptureResult parse_capture(std::span<const std::uint8_t> bytes, const CaptureLimits& limits) {
  if (limits.max_packets == 0 || limits.max_payload_bytes == 0) {
    throw ConfigError("capture limits n and m must be >= 1");
  }
  if (bytes.size() < kGlobalHeader) {
    throw ParseError("pcap global header truncated", bytes.size());
  }
  const std::uint32_t raw_magic = read_le32(bytes.data());
  bool swapped = false;
  bool nanos = false;
  if (raw_magic == kMagicMicro || raw_magic == kMagicNano) {
    nanos = raw_magic == kMagicNano;
  } else if (bswap32(raw_magic) == kMagicMicro || bswap32(raw_magic) == kMagicNano) {
    swapped = true;
    nanos = bswap32(raw_magic) == kMagicNano;
  } else {
    throw ParseError("not a classic pcap file (bad magic)", 0);
  }
  auto u32 = [&](std::size_t at) {
    const std::uint32_t v = read_le32(bytes.data() + at);
    return swapped ? bswap32(v) : v;
  };
  if (u32(20) != kLinkEthernet) {
    throw ParseError("unsupported link type " + std::to_string(u32(20)) + " (Ethernet required)",
                     20);
  }

  CaptureResult result;
  auto& stats = result.stats;
  std::map<CanonicalKey, ActiveFlow> active;
  std::vector<std::vector<PendingPacket>> pending;
  std::vector<FiveTuple> keys;

  std::size_t offset = kGlobalHeader;
  std::size_t order = 0;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < kRecordHeader) {
      ++stats.truncated_records;
      break;
    }
    const std::uint32_t ts_sec = u32(offset);
    const std::uint32_t ts_frac = u32(offset + 4);
    const std::uint32_t incl_len = u32(offset + 8);
    const std::uint32_t orig_len = u32(offset + 12);
    offset += kRecordHeader;
    if (incl_len > bytes.size() - offset) {
      ++stats.truncated_records;
      break;
    }
    ++stats.records;
    const auto frame = bytes.subspan(offset, incl_len);
    offset += incl_len;

    DecodedPacket pkt;
    const Decode status = decode_frame(frame, pkt);
    if (status == Decode::NotIp) {
      ++stats.skipped_non_ip;
      continue;
    }
    if (status == Decode::Malformed) {
      ++stats.skipped_malformed;
      continue;
    }

    const double ts = static_cast<double>(ts_sec) +
                      (nanos ? static_cast<double>(ts_frac) / 1e9
                             : static_cast<double>(ts_frac) / 1e6);
    const Endpoint a{pkt.src.value, pkt.sport};
    const Endpoint b{pkt.dst.value, pkt.dport};
    const CanonicalKey key{static_cast<std::uint8_t>(pkt.protocol), std::min(a, b),
                           std::max(a, b)};

    auto it = active.find(key);
    if (it == active.end() || ts - it->second.last_seen > limits.idle_timeout) {
      const std::size_t index = pending.size();
      pending.emplace_back();
      keys.push_back(FiveTuple{pkt.src, pkt.dst, pkt.sport, pkt.dport, pkt.protocol});
      if (it == active.end()) {
        it = active.emplace(key, ActiveFlow{index, ts}).first;
      } else {
        it->second = ActiveFlow{index, ts};
      }
    }
    it->second.last_seen = std::max(it->second.last_seen, ts);

    const FiveTuple& flow_key = keys[it->second.index];
    PacketView view;
    view.timestamp = ts;
    view.direction =
        (pkt.src == flow_key.src_addr && pkt.sport == flow_key.src_port) ? -1 : +1;
    view.length = incl_len < orig_len ? incl_len : orig_len;
    const std::size_t take = std::min(pkt.payload.size(), limits.max_payload_bytes);
    view.payload_prefix.assign(pkt.payload.begin(), pkt.payload.begin() + take);
    pending[it->second.index].push_back(PendingPacket{std::move(view), order++});
  }

  result.flows.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto& packets = pending[i];
    if (packets.empty()) {
      ++stats.dropped_empty_flows;
      continue;
    }
    std::stable_sort(packets.begin(), packets.end(), [](const auto& x, const auto& y) {
      return x.view.timestamp < y.view.timestamp;
    });
    FlowRecord flow;
    flow.id = "f" + std::to_string(result.flows.size());
    flow.key = keys[i];
    const std::size_t keep = std::min(packets.size(), limits.max_packets);
    stats.packets_beyond_n += packets.size() - keep;
    flow.packets.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) flow.packets.push_back(std::move(packets[k].view));
    stats.packets_used += keep;
    result.flows.push_back(std::move(flow));
  }
  return result;
}

std::uint32_t header_overhead(Protocol protocol) {
  return static_cast<std::uint32_t>(kEthernetHeader + 20 + (protocol == Protocol::Tcp ? 20 : 8));
}

std::vector<std::uint8_t> build_frame(Ipv4 src, std::uint16_t src_port, Ipv4 dst,
                                      std::uint16_t dst_port, Protocol protocol,
                                      std::uint32_t frame_length,
                                      std::span<const std::uint8_t> payload) {
  const std::uint32_t overhead = header_overhead(protocol);
  frame_length = std::max<std::uint32_t>(
      {frame_length, overhead, overhead + static_cast<std::uint32_t>(payload.size())});
  std::vector<std::uint8_t> f(frame_length, 0);
  auto put16 = [&](std::size_t at, std::uint32_t v) {
    f[at] = std::uint8_t(v >> 8);
    f[at + 1] = std::uint8_t(v);
  };
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    put16(at, v >> 16);
    put16(at + 2, v & 0xffff);
  };
  // Locally administered MACs derived from the addresses.
  f[0] = 0x02;
  put32(2, dst.value);
  f[6] = 0x02;
  put32(8, src.value);
  put16(12, kEtherIpv4);
  const std::size_t ip = kEthernetHeader;
  const std::uint32_t ip_total = frame_length - static_cast<std::uint32_t>(kEthernetHeader);
  f[ip] = 0x45;
  put16(ip + 2, std::min<std::uint32_t>(ip_total, 0xffff));
  f[ip + 8] = 64;
  f[ip + 9] = static_cast<std::uint8_t>(protocol);
  put32(ip + 12, src.value);
  put32(ip + 16, dst.value);
  std::uint32_t checksum = 0;
  for (std::size_t i = 0; i < 20; i += 2) checksum += read_be16(&f[ip + i]);
  while (checksum >> 16) checksum = (checksum & 0xffff) + (checksum >> 16);
  put16(ip + 10, ~checksum & 0xffff);
  const std::size_t l4 = ip + 20;
  put16(l4, src_port);
  put16(l4 + 2, dst_port);
  std::size_t payload_at = 0;
  if (protocol == Protocol::Tcp) {
    f[l4 + 12] = 5 << 4;
    f[l4 + 13] = 0x18;  // PSH|ACK
    put16(l4 + 14, 0xffff);
    payload_at = l4 + 20;
  } else {
    put16(l4 + 4, frame_length - static_cast<std::uint32_t>(l4));
    payload_at = l4 + 8;
  }
  std::copy(payload.begin(), payload.end(), f.begin() + static_cast<std::ptrdiff_t>(payload_at));
  return f;
}

std::vector<CaptureFrame> flows_to_frames(const std::vector<FlowRecord>& flows) {
  std::vector<CaptureFrame> frames;
  for (const auto& flow : flows) {
    for (const auto& p : flow.packets) {
      const FiveTuple& k = flow.key;
      std::vector<std::uint8_t> bytes =
          p.direction < 0
              ? build_frame(k.src_addr, k.src_port, k.dst_addr, k.dst_port, k.protocol, p.length,
                            p.payload_prefix)
              : build_frame(k.dst_addr, k.dst_port, k.src_addr, k.src_port, k.protocol, p.length,
                            p.payload_prefix);
      const auto size = static_cast<std::uint32_t>(bytes.size());
      frames.push_back(CaptureFrame{p.timestamp, std::move(bytes), size});
    }
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return frames;
}

std::vector<std::uint8_t> encode_capture(const std::vector<CaptureFrame>& frames) {
  std::vector<std::uint8_t> out;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
  };
  put32(kMagicMicro);
  put16(2);
  put16(4);
  put32(0);
  put32(0);
  put32(65535);
  put32(kLinkEthernet);
  for (const auto& frame : frames) {
    if (frame.timestamp < 0) throw FormatError("negative timestamp cannot be written to pcap");
    auto seconds = static_cast<std::uint32_t>(std::floor(frame.timestamp));
    auto micros = static_cast<std::uint32_t>(
        std::llround((frame.timestamp - static_cast<double>(seconds)) * 1e6));
    if (micros >= 1000000) {
      ++seconds;
      micros -= 1000000;
    }
    put32(seconds);
    put32(micros);
    put32(static_cast<std::uint32_t>(frame.bytes.size()));
    put32(std::max<std::uint32_t>(frame.original_length,
                                  static_cast<std::uint32_t>(frame.bytes.size())));
    out.insert(out.end(), frame.bytes.begin(), frame.bytes.end());
  }
  return out;
}

void write_capture(const std::filesystem::path& path, const std::vector<CaptureFrame>& frames) {
  const auto bytes = encode_capture(frames);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write capture file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing capture file: " + path.string());
}

}  // namespace flowid
