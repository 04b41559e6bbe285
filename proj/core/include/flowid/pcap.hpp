#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowid/flow.hpp"

namespace flowid {

struct CaptureLimits {
  std::size_t max_packets = 40;       // n
  std::size_t max_payload_bytes = 16;  // m
  double idle_timeout = 64.0;          // seconds
};

struct CaptureStats {
  std::size_t records = 0;
  std::size_t packets_used = 0;
  std::size_t skipped_non_ip = 0;     // not Ethernet/IPv4/TCP/UDP, or non-first fragment
  std::size_t skipped_malformed = 0;  // headers cut short by the snap length
  std::size_t truncated_records = 0;  // record header or body runs past end of file
  std::size_t packets_beyond_n = 0;
  std::size_t dropped_empty_flows = 0;
};

struct CaptureResult {
  std::vector<FlowRecord> flows;
  CaptureStats stats;
};

/// Groups the packets of a classic pcap (Ethernet link type, either byte order,
/// microsecond or nanosecond timestamps) into bidirectional flows. A gap longer
/// than idle_timeout between consecutive packets of one key opens a new flow.
/// Flow ids are "f<k>" in order of first appearance.
///
/// Throws IoError if the file cannot be read and ParseError on a malformed
/// global header or unsupported link type.
CaptureResult parse_capture(const std::filesystem::path& path, const CaptureLimits& limits);
CaptureResult parse_capture(std::span<const std::uint8_t> bytes, const CaptureLimits& limits);

/// One frame for writing. original_length >= bytes.size().
struct CaptureFrame {
  double timestamp = 0.0;
  std::vector<std::uint8_t> bytes;
  std::uint32_t original_length = 0;
};

/// Ethernet/IPv4/TCP-or-UDP frame from `src` to `dst` of total size
/// frame_length, whose transport payload starts with `payload` and is zero
/// filled. frame_length is raised to the minimum header size if smaller.
std::vector<std::uint8_t> build_frame(Ipv4 src, std::uint16_t src_port, Ipv4 dst,
                                      std::uint16_t dst_port, Protocol protocol,
                                      std::uint32_t frame_length,
                                      std::span<const std::uint8_t> payload);

/// Minimum frame size carrying the given transport header (no payload).
std::uint32_t header_overhead(Protocol protocol);

/// Frames for every packet of every flow, ordered by timestamp (stable).
std::vector<CaptureFrame> flows_to_frames(const std::vector<FlowRecord>& flows);

/// Little-endian microsecond pcap, link type Ethernet.
std::vector<std::uint8_t> encode_capture(const std::vector<CaptureFrame>& frames);
void write_capture(const std::filesystem::path& path, const std::vector<CaptureFrame>& frames);

}  // namespace flowid
