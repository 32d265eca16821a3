#include "ezcrop/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ezcrop/error.hpp"

namespace ezcrop {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kScoresFormat = "ezcrop-scores";
constexpr const char* kPlanFormat = "ezcrop-plan";
constexpr int kDocumentVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | bytes[offset + static_cast<std::size_t>(k)];
  return v;
}

[[noreturn]] void schema_error(const std::string& path, const std::string& message) {
  throw FormatError(FormatError::Kind::Schema, path + ": " + message);
}

// Field access on a JSON object with the path kept for error messages.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) schema_error(path_, "expected an object");
  }

  const json& field(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) schema_error(path_ + "." + key, "missing field");
    return *it;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  std::string string(const std::string& key) {
    const json& v = field(key);
    if (!v.is_string()) schema_error(path(key), "expected a string");
    return v.get<std::string>();
  }

  std::uint64_t unsigned_int(const std::string& key) {
    const json& v = field(key);
    if (!v.is_number_unsigned()) schema_error(path(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  double number(const std::string& key) {
    const json& v = field(key);
    if (!v.is_number()) schema_error(path(key), "expected a number");
    return v.get<double>();
  }

  const json& array(const std::string& key) {
    const json& v = field(key);
    if (!v.is_array()) schema_error(path(key), "expected an array");
    return v;
  }

  void reject_unknown() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) schema_error(path_ + "." + it.key(), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::size_t> index_list(const json& array, const std::string& path) {
  std::vector<std::size_t> out;
  out.reserve(array.size());
  for (std::size_t k = 0; k < array.size(); ++k) {
    if (!array[k].is_number_unsigned()) {
      schema_error(path + "[" + std::to_string(k) + "]", "expected a positive integer");
    }
    out.push_back(array[k].get<std::size_t>());
  }
  return out;
}

void check_header(ObjectReader& doc, const char* format) {
  if (doc.string("format") != format) schema_error(doc.path("format"), std::string("expected \"") + format + "\"");
  if (doc.unsigned_int("version") != kDocumentVersion) schema_error(doc.path("version"), "unsupported version");
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(FormatError::Kind::Schema, std::string("invalid JSON: ") + e.what());
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

bool has_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 &&
         std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin(),
                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

// Dims from a container header without loading the payload.
std::vector<std::uint32_t> read_header_dims(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<std::uint8_t, 8 + 4 * kMaxTensorRank> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  const std::string name = path.filename().string();
  if (got < 8) throw FormatError(FormatError::Kind::LengthMismatch, name + ": length mismatch");
  if (!has_magic(head)) throw FormatError(FormatError::Kind::BadMagic, name + ": bad magic");
  const std::uint32_t ndim = get_u32(head, 4);
  if (ndim < 1 || ndim > kMaxTensorRank) throw FormatError(FormatError::Kind::BadRank, name + ": bad ndim");
  if (got < 8 + 4 * ndim) throw FormatError(FormatError::Kind::LengthMismatch, name + ": length mismatch");
  std::vector<std::uint32_t> dims;
  for (std::uint32_t d = 0; d < ndim; ++d) dims.push_back(get_u32(head, 8 + 4 * d));
  return dims;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint32_t> dims,
                                        std::span<const float> values) {
  if (dims.empty() || dims.size() > kMaxTensorRank) {
    throw std::invalid_argument("tensor rank must lie in 1..4");
  }
  std::size_t count = 1;
  for (std::uint32_t d : dims) count *= d;
  if (count != values.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match dims product " + std::to_string(count));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("tensor contains non-finite values");
  }

  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * dims.size() + 4 * values.size());
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::uint32_t d : dims) put_u32(out, d);
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

TensorData decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError(FormatError::Kind::LengthMismatch, "length mismatch: header truncated");
  if (!has_magic(bytes)) {
    throw FormatError(FormatError::Kind::BadMagic, "bad magic");
  }
  const std::uint32_t ndim = get_u32(bytes, 4);
  if (ndim < 1 || ndim > kMaxTensorRank) {
    throw FormatError(FormatError::Kind::BadRank, "bad ndim " + std::to_string(ndim));
  }
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw FormatError(FormatError::Kind::LengthMismatch, "length mismatch: dims truncated");

  TensorData out;
  std::uint64_t count = 1;
  for (std::uint32_t k = 0; k < ndim; ++k) {
    out.dims.push_back(get_u32(bytes, 8 + 4 * k));
    count *= out.dims.back();
  }
  if (bytes.size() != header + 4 * count) {
    throw FormatError(FormatError::Kind::LengthMismatch,
                      "length mismatch: expected " + std::to_string(header + 4 * count) +
                          " bytes, found " + std::to_string(bytes.size()));
  }
  out.values.resize(static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const float v = std::bit_cast<float>(get_u32(bytes, header + 4 * k));
    if (!std::isfinite(v)) {
      throw FormatError(FormatError::Kind::NonFinite, "non-finite value at element " + std::to_string(k));
    }
    out.values[k] = v;
  }
  return out;
}

void write_tensor(const fs::path& path, std::span<const std::uint32_t> dims,
                  std::span<const float> values) {
  const auto bytes = encode_tensor(dims, values);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed: " + path.string());
}

TensorData read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.filename().string() + ": " + e.what());
  }
}

FeatureMapBatch to_feature_maps(const TensorData& tensor) {
  if (tensor.dims.size() != 4) {
    throw FormatError(FormatError::Kind::BadRank, "feature maps need a rank-4 tensor, got rank " +
                                                      std::to_string(tensor.dims.size()));
  }
  for (std::uint32_t d : tensor.dims) {
    if (d == 0) throw FormatError(FormatError::Kind::Schema, "feature map dimension is zero");
  }
  return FeatureMapBatch(tensor.dims[0], tensor.dims[1], tensor.dims[2], tensor.dims[3],
                         std::vector<double>(tensor.values.begin(), tensor.values.end()));
}

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) throw FormatError(FormatError::Kind::Io, "missing manifest " + path.string());
  const json doc = parse_json(read_text(path));
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    schema_error("manifest", "expected an object with a \"layers\" array");
  }

  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  const json& layers = doc["layers"];
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string where = "manifest.layers[" + std::to_string(k) + "]";
    ObjectReader row(layers[k], where);
    ManifestEntry e;
    e.layer = row.string("layer");
    e.file = row.string("file");
    const json& dims = row.array("dims");
    if (dims.size() != 4) schema_error(row.path("dims"), "expected [B, T, H, W]");
    for (std::size_t d = 0; d < 4; ++d) {
      if (!dims[d].is_number_unsigned() || dims[d].get<std::uint64_t>() == 0 ||
          dims[d].get<std::uint64_t>() > UINT32_MAX) {
        schema_error(row.path("dims") + "[" + std::to_string(d) + "]", "expected a positive integer");
      }
      e.dims[d] = dims[d].get<std::uint32_t>();
    }
    if (layers[k].contains("source")) e.source = row.string("source");
    if (!ids.insert(e.layer).second) schema_error(row.path("layer"), "duplicate layer id " + e.layer);

    const fs::path file = dir / e.file;
    if (!fs::exists(file)) throw FormatError(FormatError::Kind::Io, where + ": missing file " + e.file);
    const std::vector<std::uint32_t> header_dims = read_header_dims(file);
    if (header_dims.size() != 4 || !std::equal(header_dims.begin(), header_dims.end(), e.dims.begin())) {
      schema_error(row.path("dims"), "does not match header of " + e.file);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const fs::path& dir, std::span<const ManifestEntry> entries) {
  json layers = json::array();
  for (const ManifestEntry& e : entries) {
    layers.push_back({{"layer", e.layer},
                      {"file", e.file},
                      {"dims", {e.dims[0], e.dims[1], e.dims[2], e.dims[3]}},
                      {"source", e.source}});
  }
  write_text(dir / kManifestName, dump(json{{"layers", layers}}));
}

std::string scores_to_json(std::span<const LayerImportance> layers) {
  json rows = json::array();
  for (const LayerImportance& l : layers) {
    rows.push_back({{"layer", l.layer},
                    {"metric", std::string(to_string(l.metric))},
                    {"beta", l.beta},
                    {"batch", l.batch},
                    {"scores", l.scores},
                    {"order", l.order}});
  }
  return dump(json{{"format", kScoresFormat}, {"version", kDocumentVersion}, {"layers", rows}});
}

std::vector<LayerImportance> scores_from_json(const std::string& text) {
  const json doc = parse_json(text);
  ObjectReader top(doc, "scores");
  check_header(top, kScoresFormat);
  const json& rows = top.array("layers");
  top.reject_unknown();

  std::vector<LayerImportance> out;
  std::set<std::string> ids;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ObjectReader row(rows[k], "scores.layers[" + std::to_string(k) + "]");
    LayerImportance l;
    l.layer = row.string("layer");
    if (!ids.insert(l.layer).second) schema_error(row.path("layer"), "duplicate layer id " + l.layer);
    const auto metric = parse_metric(row.string("metric"));
    if (!metric) schema_error(row.path("metric"), "expected energy, rank or circle");
    l.metric = *metric;
    l.beta = row.number("beta");
    if (!(l.beta > 0.0 && l.beta < 1.0)) schema_error(row.path("beta"), "must lie in (0, 1)");
    l.batch = row.unsigned_int("batch");
    if (l.batch == 0) schema_error(row.path("batch"), "must be positive");

    const json& scores = row.array("scores");
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (!scores[j].is_number()) {
        schema_error(row.path("scores") + "[" + std::to_string(j) + "]", "expected a number");
      }
      l.scores.push_back(scores[j].get<double>());
    }
    if (l.scores.empty()) schema_error(row.path("scores"), "empty");
    l.order = index_list(row.array("order"), row.path("order"));
    row.reject_unknown();

    if (l.order.size() != l.scores.size()) schema_error(row.path("order"), "length differs from scores");
    std::vector<bool> seen(l.scores.size(), false);
    for (std::size_t j = 0; j < l.order.size(); ++j) {
      const std::size_t c = l.order[j];
      const std::string where = row.path("order") + "[" + std::to_string(j) + "]";
      if (c < 1 || c > l.scores.size()) schema_error(where, "index out of range");
      if (seen[c - 1]) schema_error(where, "duplicate channel " + std::to_string(c));
      seen[c - 1] = true;
      if (j > 0 && l.scores[c - 1] > l.scores[l.order[j - 1] - 1]) {
        schema_error(where, "order not descending by score");
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::string plan_to_json(const PrunePlan& plan) {
  json rows = json::array();
  for (const PlanEntry& e : plan.layers) {
    rows.push_back({{"layer", e.layer}, {"channels", e.channels}, {"keep", e.keep}});
  }
  return dump(json{{"format", kPlanFormat}, {"version", kDocumentVersion}, {"layers", rows}});
}

PrunePlan plan_from_json(const std::string& text) {
  const json doc = parse_json(text);
  ObjectReader top(doc, "plan");
  check_header(top, kPlanFormat);
  const json& rows = top.array("layers");
  top.reject_unknown();

  PrunePlan plan;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ObjectReader row(rows[k], "plan.layers[" + std::to_string(k) + "]");
    PlanEntry e;
    e.layer = row.string("layer");
    if (plan.find(e.layer) != nullptr) schema_error(row.path("layer"), "duplicate layer id " + e.layer);
    e.channels = row.unsigned_int("channels");
    if (e.channels == 0) schema_error(row.path("channels"), "must be positive");
    e.keep = index_list(row.array("keep"), row.path("keep"));
    row.reject_unknown();

    if (e.keep.empty()) schema_error(row.path("keep"), "empty");
    for (std::size_t j = 0; j < e.keep.size(); ++j) {
      const std::string where = row.path("keep") + "[" + std::to_string(j) + "]";
      if (e.keep[j] < 1 || e.keep[j] > e.channels) schema_error(where, "index out of range");
      if (j > 0 && e.keep[j] <= e.keep[j - 1]) schema_error(where, "keep not ascending");
    }
    plan.layers.push_back(std::move(e));
  }
  return plan;
}

void write_scores(const fs::path& path, std::span<const LayerImportance> layers) {
  write_text(path, scores_to_json(layers));
}

std::vector<LayerImportance> read_scores(const fs::path& path) {
  return scores_from_json(read_text(path));
}

void write_plan(const fs::path& path, const PrunePlan& plan) { write_text(path, plan_to_json(plan)); }

PrunePlan read_plan(const fs::path& path) { return plan_from_json(read_text(path)); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw FormatError(FormatError::Kind::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw FormatError(FormatError::Kind::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace ezcrop
