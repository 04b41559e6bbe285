#include "flowid/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <boost/crc.hpp>

#include "flowid/error.hpp"
#include <nlohmann/json.hpp>

namespace flowid {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'I', 'D', '0', '1'};


// Integer and boolean fields are converted through doubles below.
struct MetaAccess {
  std::string name;
  double (*get)(const ModelConfig&);
  void (*set)(ModelConfig&, double);
};

#define FLOWID_META_SIZE(field)                                                        \
  MetaAccess{#field, [](const ModelConfig& c) { return static_cast<double>(c.field); }, \
             [](ModelConfig& c, double v) { c.field = static_cast<std::size_t>(v); }}
#define FLOWID_META_REAL(field)                                \
  MetaAccess{#field, [](const ModelConfig& c) { return c.field; }, \
             [](ModelConfig& c, double v) { c.field = v; }}

const std::vector<MetaAccess>& meta_fields() {
  static const std::vector<MetaAccess> fields = {
      FLOWID_META_SIZE(n),
      FLOWID_META_SIZE(m),
      FLOWID_META_REAL(length_norm),
      FLOWID_META_SIZE(extractor_dim),
      FLOWID_META_SIZE(fusion_hidden),
      FLOWID_META_SIZE(lstm_hidden),
      FLOWID_META_SIZE(gcn_hidden),
      FLOWID_META_SIZE(cnn_channels1),
      FLOWID_META_SIZE(cnn_channels2),
      FLOWID_META_SIZE(kernel),
      FLOWID_META_SIZE(stride),
      FLOWID_META_SIZE(padding),
      FLOWID_META_SIZE(pool),
      FLOWID_META_SIZE(k),
      MetaAccess{"include_self",
                 [](const ModelConfig& c) { return c.include_self ? 1.0 : 0.0; },
                 [](ModelConfig& c, double v) { c.include_self = v != 0.0; }},
      FLOWID_META_SIZE(hidden),
      FLOWID_META_SIZE(depth),
      FLOWID_META_REAL(dropout),
      FLOWID_META_SIZE(classes),
  };
  return fields;
}

#undef FLOWID_META_SIZE
#undef FLOWID_META_REAL

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  std::map<std::string, Tensor> tensors;
  for (const auto& name : model.params.names()) tensors.emplace(name, model.params.value(name));
  for (const auto& f : meta_fields())
    tensors.emplace("meta." + f.name, Tensor::scalar(f.get(model.config)));

  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& [name, t] : tensors) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"},
                        {"offset", payload.size()}});
    for (double v : t.values()) put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u64(out, crc64(out));
  return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic (expected FLOWID01)");
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t stored = get_le(bytes, body, 8);
  if (crc64(bytes.first(body)) != stored) throw FormatError("checkpoint: CRC-64 mismatch");

  const std::size_t manifest_len = get_le(bytes, sizeof(kMagic), 4);
  const std::size_t manifest_at = sizeof(kMagic) + 4;
  if (manifest_len > body - manifest_at) throw FormatError("checkpoint: manifest truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(manifest_at),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(manifest_at + manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: invalid manifest: ") + e.what());
  }
  if (!manifest.is_array()) throw FormatError("checkpoint: manifest must be an array");
  const std::size_t payload_at = manifest_at + manifest_len;
  const std::size_t payload_len = body - payload_at;

  std::map<std::string, Tensor> tensors;
  std::size_t expected_offset = 0;
  for (const auto& entry : manifest) {
    std::string name = "<unnamed>";
    try {
      name = entry.at("name").get<std::string>();
      if (entry.at("dtype").get<std::string>() != "f32")
        throw FormatError("checkpoint: tensor " + name + " has unsupported dtype");
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      std::size_t count = 1;
      for (auto s : shape) count *= s;
      if (shape.empty() || count == 0)
        throw FormatError("checkpoint: tensor " + name + " has an empty shape");
      if (offset != expected_offset)
        throw FormatError("checkpoint: tensor " + name + " has an unexpected offset");
      if (offset + count * 4 > payload_len)
        throw FormatError("checkpoint: tensor " + name + " runs past the payload");
      Tensor t(shape);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::uint32_t>(get_le(bytes, payload_at + offset + 4 * i, 4));
        t[i] = static_cast<double>(std::bit_cast<float>(raw));
      }
      if (!t.all_finite()) throw FormatError("checkpoint: tensor " + name + " holds non-finite values");
      if (!tensors.emplace(name, std::move(t)).second)
        throw FormatError("checkpoint: duplicate tensor " + name);
      expected_offset = offset + count * 4;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("checkpoint: malformed manifest entry for tensor " + name + ": " + e.what());
    }
  }
  if (expected_offset != payload_len) throw FormatError("checkpoint: payload size mismatch");

  Model model;
  for (const auto& f : meta_fields()) {
    auto it = tensors.find("meta." + f.name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor meta." + f.name);
    f.set(model.config, it->second.item());
    tensors.erase(it);
  }
  try {
    model.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid architecture: ") + e.what());
  }
  // Compare against a freshly initialised layout so missing, extra or
  // reshaped tensors are reported by name.
  const Model reference = init_model(model.config, 0);
  for (const auto& name : reference.params.names()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor " + name);
    if (it->second.shape() != reference.params.value(name).shape())
      throw FormatError("checkpoint: tensor " + name + " has shape " +
                        shape_string(it->second.shape()) + ", expected " +
                        shape_string(reference.params.value(name).shape()));
    model.params.add(name, std::move(it->second));
    tensors.erase(it);
  }
  if (!tensors.empty()) throw FormatError("checkpoint: unexpected tensor " + tensors.begin()->first);
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace flowid
