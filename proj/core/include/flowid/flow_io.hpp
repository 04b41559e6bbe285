#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowid/flow.hpp"

namespace flowid {

/// One compact JSON object, fields in canonical order:
/// {"id","five_tuple":{"src","sport","dst","dport","proto"},"label","packets":[{"ts","dir","len","payload_hex"}]}
std::string flow_to_json_line(const FlowRecord& flow);
/// Throws FormatError on malformed JSON or missing/mistyped fields.
FlowRecord flow_from_json_line(const std::string& line);

void write_flows_jsonl(std::ostream& out, const std::vector<FlowRecord>& flows);
void write_flows_jsonl(const std::filesystem::path& path, const std::vector<FlowRecord>& flows);
/// Blank lines are ignored. Errors name the offending line number.
std::vector<FlowRecord> read_flows_jsonl(std::istream& in);
std::vector<FlowRecord> read_flows_jsonl(const std::filesystem::path& path);

std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);

}  // namespace flowid
