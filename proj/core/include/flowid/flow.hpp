#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowid {

enum class Protocol : std::uint8_t { Tcp = 6, Udp = 17 };

/// IPv4 address in host byte order.
struct Ipv4 {
  std::uint32_t value = 0;

  static Ipv4 parse(const std::string& dotted);
  std::string to_string() const;
  friend auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

/// Flow key, oriented so that src is the initiator (sender of the first packet).
struct FiveTuple {
  Ipv4 src_addr;
  Ipv4 dst_addr;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::Tcp;

  FiveTuple reversed() const { return {dst_addr, src_addr, dst_port, src_port, protocol}; }
  /// Orientation-free equality: A→B matches B→A.
  bool same_flow(const FiveTuple& other) const {
    return *this == other || *this == other.reversed();
  }
  friend bool operator==(const FiveTuple&, const FiveTuple&) = default;
};

/// One packet as seen by the flow views. direction is -1 for initiator→responder
/// (client to server) and +1 for the reverse.
struct PacketView {
  double timestamp = 0.0;
  int direction = -1;
  std::uint32_t length = 0;
  std::vector<std::uint8_t> payload_prefix;

  friend bool operator==(const PacketView&, const PacketView&) = default;
};

struct FlowRecord {
  std::string id;
  FiveTuple key;
  std::vector<PacketView> packets;
  std::optional<int> label;

  double start_time() const { return packets.empty() ? 0.0 : packets.front().timestamp; }
  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

std::string protocol_name(Protocol protocol);

}  // namespace flowid
