#include "cogload/model_io.hpp"

#include "cogload/error.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace cogload::model {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

json stats_to_json(const windowing::NormalizationStats& s) {
  return {{"mean", std::vector<double>(s.mean.begin(), s.mean.end())},
          {"std", std::vector<double>(s.std.begin(), s.std.end())}};
}

windowing::NormalizationStats stats_from_json(const json& j) {
  windowing::NormalizationStats s;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("std").get<std::vector<double>>();
  if (mean.size() != kFeatureCount || sd.size() != kFeatureCount) {
    throw Error(ErrorCode::SchemaViolation, "model file: normalization stats must have 28 entries");
  }
  std::copy(mean.begin(), mean.end(), s.mean.begin());
  std::copy(sd.begin(), sd.end(), s.std.begin());
  return s;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_model(std::ostream& out, const ModelBundle& bundle) {
  const ModelParams& p = bundle.params;
  std::vector<float> payload(static_cast<std::size_t>(p.values().size()));
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<float>(p.values()[static_cast<Eigen::Index>(i)]);
  }
  const std::size_t payload_bytes = payload.size() * sizeof(float);

  const ModelConfig& c = p.config();
  json header;
  header["format_version"] = kModelFormatVersion;
  header["config"] = {{"input_dim", c.input_dim}, {"seq_len", c.seq_len},   {"hidden", c.hidden},
                      {"head_hidden", c.head_hidden}, {"dropout", c.dropout}, {"classes", c.classes}};
  json features = json::array();
  for (std::string_view name : feature_manifest()) {
    features.push_back(std::string(name));
  }
  header["features"] = features;
  const windowing::Normalizer& n = bundle.normalizer;
  json per = json::object();
  for (const auto& [id, stats] : n.per_participant) {
    per[id] = stats_to_json(stats);
  }
  header["normalization"] = {
      {"scope", n.scope == windowing::NormalizationScope::Global ? "global" : "per_participant"},
      {"global", stats_to_json(n.global)},
      {"per_participant", per}};
  header["seed"] = bundle.seed;
  json blocks = json::array();
  for (const ParamBlock& b : p.blocks()) {
    blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  }
  header["blocks"] = blocks;
  header["dtype"] = "float32-le";
  header["checksum"] = "fnv1a64:" + hex64(fnv1a64(payload.data(), payload_bytes));

  const std::string text = header.dump();
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(kModelMagic, sizeof kModelMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload_bytes));
  if (!out) {
    throw Error(ErrorCode::IoFailure, "model file: write failed");
  }
}

void save_model(const std::string& path, const ModelBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write model file " + path);
  }
  save_model(out, bundle);
}

ModelBundle load_model(std::istream& in) {
  char magic[sizeof kModelMagic];
  std::uint32_t len = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::SchemaViolation, "model file: bad magic");
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len)) {
    throw Error(ErrorCode::SchemaViolation, "model file: truncated header length");
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) {
    throw Error(ErrorCode::SchemaViolation, "model file: truncated header");
  }
  ModelBundle bundle;
  try {
    const json header = json::parse(text);
    if (header.at("format_version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::SchemaViolation, "model file: unsupported format version");
    }
    const json& jc = header.at("config");
    ModelConfig c;
    c.input_dim = jc.at("input_dim").get<int>();
    c.seq_len = jc.at("seq_len").get<int>();
    c.hidden = jc.at("hidden").get<int>();
    c.head_hidden = jc.at("head_hidden").get<int>();
    c.dropout = jc.at("dropout").get<double>();
    c.classes = jc.at("classes").get<int>();

    const auto names = header.at("features").get<std::vector<std::string>>();
    const auto& manifest = feature_manifest();
    if (names.size() != manifest.size() || !std::equal(names.begin(), names.end(), manifest.begin())) {
      throw Error(ErrorCode::SchemaViolation, "model file: feature manifest does not match this build");
    }

    ModelParams params(c);
    const json& blocks = header.at("blocks");
    if (blocks.size() != params.blocks().size()) {
      throw Error(ErrorCode::ShapeMismatch, "model file: unexpected parameter block count");
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const ParamBlock& b = params.blocks()[i];
      if (blocks[i].at("name") != b.name || blocks[i].at("rows") != b.rows || blocks[i].at("cols") != b.cols) {
        throw Error(ErrorCode::ShapeMismatch, "model file: block " + b.name + " has unexpected shape");
      }
    }
    std::vector<float> payload(static_cast<std::size_t>(params.values().size()));
    const std::size_t payload_bytes = payload.size() * sizeof(float);
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes))) {
      throw Error(ErrorCode::SchemaViolation, "model file: truncated parameter blocks");
    }
    const std::string expected = header.at("checksum").get<std::string>();
    if (expected != "fnv1a64:" + hex64(fnv1a64(payload.data(), payload_bytes))) {
      throw Error(ErrorCode::SchemaViolation, "model file: checksum mismatch");
    }
    for (std::size_t i = 0; i < payload.size(); ++i) {
      params.values()[static_cast<Eigen::Index>(i)] = static_cast<double>(payload[i]);
    }
    bundle.params = std::move(params);

    const json& jn = header.at("normalization");
    bundle.normalizer.scope = jn.at("scope") == "global" ? windowing::NormalizationScope::Global
                                                         : windowing::NormalizationScope::PerParticipant;
    bundle.normalizer.global = stats_from_json(jn.at("global"));
    for (const auto& [id, stats] : jn.at("per_participant").items()) {
      bundle.normalizer.per_participant[id] = stats_from_json(stats);
    }
    bundle.seed = header.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("model file: ") + e.what());
  }
  return bundle;
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open model file " + path);
  }
  return load_model(in);
}

}  // namespace cogload::model
