#include "flowid/flow_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "flowid/error.hpp"

namespace flowid {

using ordered_json = nlohmann::ordered_json;

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  if (hex.size() % 2) throw FormatError("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw FormatError(std::string("invalid hex digit '") + c + "'");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

std::string flow_to_json_line(const FlowRecord& flow) {
  ordered_json j;
  j["id"] = flow.id;
  ordered_json key;
  key["src"] = flow.key.src_addr.to_string();
  key["sport"] = flow.key.src_port;
  key["dst"] = flow.key.dst_addr.to_string();
  key["dport"] = flow.key.dst_port;
  key["proto"] = protocol_name(flow.key.protocol);
  j["five_tuple"] = std::move(key);
  j["label"] = flow.label ? ordered_json(*flow.label) : ordered_json(nullptr);
  ordered_json packets = ordered_json::array();
  for (const auto& p : flow.packets) {
    ordered_json pj;
    pj["ts"] = p.timestamp;
    pj["dir"] = p.direction;
    pj["len"] = p.length;
    pj["payload_hex"] = to_hex(p.payload_prefix);
    packets.push_back(std::move(pj));
  }
  j["packets"] = std::move(packets);
  return j.dump();
}

namespace {

const ordered_json& field(const ordered_json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw FormatError(std::string("missing field \"") + name + "\"");
  return *it;
}

template <typename T>
T integer_field(const ordered_json& obj, const char* name, long long lo, long long hi) {
  const auto& v = field(obj, name);
  if (!v.is_number_integer()) throw FormatError(std::string("field \"") + name + "\" must be an integer");
  const auto x = v.get<long long>();
  if (x < lo || x > hi) throw FormatError(std::string("field \"") + name + "\" out of range");
  return static_cast<T>(x);
}

}  // namespace

FlowRecord flow_from_json_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("flow record must be a JSON object");
  FlowRecord flow;
  const auto& id = field(j, "id");
  if (!id.is_string()) throw FormatError("field \"id\" must be a string");
  flow.id = id.get<std::string>();

  const auto& key = field(j, "five_tuple");
  if (!key.is_object()) throw FormatError("field \"five_tuple\" must be an object");
  const auto& src = field(key, "src");
  const auto& dst = field(key, "dst");
  const auto& proto = field(key, "proto");
  if (!src.is_string() || !dst.is_string() || !proto.is_string())
    throw FormatError("five_tuple addresses and proto must be strings");
  flow.key.src_addr = Ipv4::parse(src.get<std::string>());
  flow.key.dst_addr = Ipv4::parse(dst.get<std::string>());
  flow.key.src_port = integer_field<std::uint16_t>(key, "sport", 0, 65535);
  flow.key.dst_port = integer_field<std::uint16_t>(key, "dport", 0, 65535);
  const auto p = proto.get<std::string>();
  if (p == "tcp") {
    flow.key.protocol = Protocol::Tcp;
  } else if (p == "udp") {
    flow.key.protocol = Protocol::Udp;
  } else {
    throw FormatError("unknown proto \"" + p + "\"");
  }

  const auto& label = field(j, "label");
  if (!label.is_null()) flow.label = integer_field<int>(j, "label", 0, 1 << 30);

  const auto& packets = field(j, "packets");
  if (!packets.is_array()) throw FormatError("field \"packets\" must be an array");
  for (const auto& pj : packets) {
    if (!pj.is_object()) throw FormatError("packet must be an object");
    PacketView pkt;
    const auto& ts = field(pj, "ts");
    if (!ts.is_number()) throw FormatError("field \"ts\" must be a number");
    pkt.timestamp = ts.get<double>();
    pkt.direction = integer_field<int>(pj, "dir", -1, 1);
    if (pkt.direction == 0) throw FormatError("field \"dir\" must be -1 or 1");
    pkt.length = integer_field<std::uint32_t>(pj, "len", 1, 0xffffffffLL);
    const auto& hex = field(pj, "payload_hex");
    if (!hex.is_string()) throw FormatError("field \"payload_hex\" must be a string");
    pkt.payload_prefix = from_hex(hex.get<std::string>());
    flow.packets.push_back(std::move(pkt));
  }
  if (flow.packets.empty()) throw FormatError("flow " + flow.id + " has no packets");
  return flow;
}

void write_flows_jsonl(std::ostream& out, const std::vector<FlowRecord>& flows) {
  for (const auto& flow : flows) out << flow_to_json_line(flow) << '\n';
}

void write_flows_jsonl(const std::filesystem::path& path, const std::vector<FlowRecord>& flows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write flows file: " + path.string());
  write_flows_jsonl(out, flows);
  if (!out) throw IoError("error writing flows file: " + path.string());
}

std::vector<FlowRecord> read_flows_jsonl(std::istream& in) {
  std::vector<FlowRecord> flows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      flows.push_back(flow_from_json_line(line));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return flows;
}

std::vector<FlowRecord> read_flows_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open flows file: " + path.string());
  return read_flows_jsonl(in);
}

}  // namespace flowid
