#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowid/model.hpp"

namespace flowid {

/// Binary checkpoint layout:
///   "FLOWID01" | u32 LE manifest length | manifest JSON |
///   f32 LE payloads | u64 LE CRC-64/XZ of all preceding bytes.
/// The manifest lists {"name","shape","dtype":"f32","offset"} per tensor in
/// name order; offset counts bytes from the start of the payload section.
/// Architecture settings travel as 1×1 tensors named "meta.<field>".
std::vector<std::uint8_t> encode_checkpoint(const Model& model);
/// Throws FormatError naming the offending tensor on any inconsistency.
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
/// Throws IoError if the file cannot be read, FormatError if it is invalid.
Model load_checkpoint(const std::filesystem::path& path);

/// CRC-64/XZ (reflected ECMA-182 polynomial, init and xorout all ones).
std::uint64_t crc64(std::span<const std::uint8_t> bytes);

}  // namespace flowid
