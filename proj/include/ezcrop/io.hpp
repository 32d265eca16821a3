#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ezcrop/importance.hpp"
#include "ezcrop/pruner.hpp"

namespace ezcrop {

// Tensor container ("EZT1"), little-endian throughout:
//
//   offset 0        4 bytes   magic "EZT1"
//   offset 4        u32       ndim, 1..4
//   offset 8        u32[ndim] dims
//   offset 8+4*ndim f32[prod] payload, row-major (last dim fastest)
//
// File length is exactly 8 + 4*ndim + 4*prod(dims); every float is finite.

inline constexpr std::array<char, 4> kTensorMagic{'E', 'Z', 'T', '1'};
inline constexpr std::uint32_t kMaxTensorRank = 4;

struct TensorData {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

std::vector<std::uint8_t> encode_tensor(std::span<const std::uint32_t> dims,
                                        std::span<const float> values);
TensorData decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                  std::span<const float> values);
TensorData read_tensor(const std::filesystem::path& path);

/// Widens a rank-4 container to a B x T x H x W feature map batch.
FeatureMapBatch to_feature_maps(const TensorData& tensor);

/// One manifest row: dump file of a single layer and its B, T, H, W.
struct ManifestEntry {
  std::string layer;
  std::string file;
  std::array<std::uint32_t, 4> dims{};
  std::string source;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Reads <dir>/manifest.json and checks each referenced file exists and that
/// its header dims agree with the manifest.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, std::span<const ManifestEntry> entries);

/// Canonical JSON text for scores and plans: sorted keys, two-space indent,
/// trailing newline, shortest round-trip decimal for reals. Parsing rejects
/// unknown fields and reports the offending field path.
std::string scores_to_json(std::span<const LayerImportance> layers);
std::vector<LayerImportance> scores_from_json(const std::string& text);
std::string plan_to_json(const PrunePlan& plan);
PrunePlan plan_from_json(const std::string& text);

void write_scores(const std::filesystem::path& path, std::span<const LayerImportance> layers);
std::vector<LayerImportance> read_scores(const std::filesystem::path& path);
void write_plan(const std::filesystem::path& path, const PrunePlan& plan);
PrunePlan read_plan(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ezcrop
