#include "flowid/flow.hpp"

#include <charconv>

#include "flowid/error.hpp"

namespace flowid {

Ipv4 Ipv4::parse(const std::string& dotted) {
  std::uint32_t value = 0;
  const char* p = dotted.data();
  const char* end = p + dotted.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc() || next == p || part > 255) {
      throw FormatError("invalid IPv4 address: '" + dotted + "'");
    }
    value = (value << 8) | part;
    p = next;
    if (octet < 3) {
      if (p == end || *p != '.') throw FormatError("invalid IPv4 address: '" + dotted + "'");
      ++p;
    }
  }
  if (p != end) throw FormatError("invalid IPv4 address: '" + dotted + "'");
  return Ipv4{value};
}

std::string Ipv4::to_string() const {
  return std::to_string((value >> 24) & 0xff) + '.' + std::to_string((value >> 16) & 0xff) + '.' +
         std::to_string((value >> 8) & 0xff) + '.' + std::to_string(value & 0xff);
}

std::string protocol_name(Protocol protocol) {
  return protocol == Protocol::Tcp ? "tcp" : "udp";
}

}  // namespace flowid
