// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pwemoe/error.hpp"

namespace pwemoe::io {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'W', 'E', 'M', 'O', 'E', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
  for (double d : values) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

class PayloadReader {
 public:
  PayloadReader(std::string_view bytes) : bytes_(bytes) {}
  std::vector<double> take(std::size_t n) {
    if (bytes_.size() - pos_ < n * 8) throw FileError("checkpoint payload is truncated");
    std::vector<double> out(n);
    for (auto& d : out) {
      d = std::bit_cast<double>(get_u64(bytes_, pos_));
      pos_ += 8;
    }
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json layout_json(const Layout& layout) {
  json arr = json::array();
  for (const auto& e : layout.entries())
    arr.push_back({{"name", e.name}, {"shape", e.shape}, {"kind", std::string(to_string(e.kind))}});
  return arr;
}

Layout layout_from_json(const json& arr) {
  std::vector<LayoutEntry> entries;
  for (const auto& e : arr)
    entries.push_back({e.at("name").get<std::string>(), e.at("shape").get<std::vector<std::size_t>>(),
                       segment_kind_from_string(e.at("kind").get<std::string>())});
  return Layout(std::move(entries));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const ParamVector& Checkpoint::plain() const {
  if (is_upscaled()) throw FileError("checkpoint holds an up-scaled model, not plain parameters");
  return std::get<ParamVector>(content);
}

const moe::UpscaledModel& Checkpoint::upscaled() const {
  if (!is_upscaled()) throw FileError("checkpoint holds plain parameters, not an up-scaled model");
  return std::get<moe::UpscaledModel>(content);
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["provenance"] = {{"config_hash", hex64(checkpoint.provenance.config_hash)},
                          {"seed", checkpoint.provenance.seed},
                          {"producer", checkpoint.provenance.producer}};
  std::string payload;
  if (!checkpoint.is_upscaled()) {
    const auto& p = checkpoint.plain();
    header["kind"] = "plain";
    header["layout"] = layout_json(p.layout());
    header["payload_doubles"] = p.size();
    put_doubles(payload, p.values());
  } else {
    const auto& m = checkpoint.upscaled();
    header["kind"] = "upscaled";
    header["layout"] = layout_json(m.layout());
    header["lambda"] = m.lambda();
    header["task_count"] = m.task_count();
    header["moe_layers"] = m.moe_layer_names();
    header["static_layout"] = layout_json(m.static_params().layout());
    put_doubles(payload, m.static_params().values());
    for (const auto& l : m.moe_layers()) {
      put_doubles(payload, l.dictionary.base().values());
      for (const auto& c : l.dictionary.columns()) put_doubles(payload, c);
      put_doubles(payload, l.router.flat());
    }
    header["payload_doubles"] = payload.size() / 8;
  }
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out += payload;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FileError("not a checkpoint file (bad magic)");
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (bytes.size() - 16 < header_len) throw FileError("checkpoint header is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw FileError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw FileError("unsupported checkpoint format version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    Checkpoint ck;
    const auto& prov = header.at("provenance");
    ck.provenance.config_hash = std::stoull(prov.at("config_hash").get<std::string>(), nullptr, 16);
    ck.provenance.seed = prov.at("seed").get<std::uint64_t>();
    ck.provenance.producer = prov.at("producer").get<std::string>();
    const Layout layout = layout_from_json(header.at("layout"));
    const std::string_view payload = bytes.substr(16 + header_len);
    if (payload.size() != header.at("payload_doubles").get<std::size_t>() * 8)
      throw FileError("checkpoint payload size does not match its header");
    PayloadReader reader(payload);
    const std::string kind = header.at("kind").get<std::string>();
    if (kind == "plain") {
      ck.content = ParamVector(layout, reader.take(layout.total()));
    } else if (kind == "upscaled") {
      const auto T = header.at("task_count").get<std::size_t>();
      const double lambda = header.at("lambda").get<double>();
      const Layout static_layout = layout_from_json(header.at("static_layout"));
      ParamVector static_params(static_layout, reader.take(static_layout.total()));
      std::vector<moe::PweMoeLayer> layers;
      for (const auto& name : header.at("moe_layers").get<std::vector<std::string>>()) {
        const auto& entry = layout.entries()[layout.index_of(name)];
        ParamVector base(Layout({entry}), reader.take(entry.count()));
        std::vector<std::vector<double>> cols;
        for (std::size_t t = 0; t < T; ++t) cols.push_back(reader.take(entry.count()));
        moe::Router router = moe::init_router(T, lambda, 0);
        router.assign(reader.take(router.parameter_count()));
        layers.push_back({name, merge::TaskVectorDictionary(std::move(base), std::move(cols)),
                          std::move(router)});
      }
      ck.content = moe::UpscaledModel(layout, std::move(layers), std::move(static_params), lambda);
    } else {
      throw FileError("unknown checkpoint kind '" + kind + "'");
    }
    if (!reader.done()) throw FileError("checkpoint payload has trailing data");
    return ck;
  } catch (const json::exception& e) {
    throw FileError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const LayoutError& e) {
    throw FileError(std::string("malformed checkpoint layout: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("missing checkpoint '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return decode_checkpoint(os.str());
}

}  // namespace pwemoe::io
