#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ezcrop/tensor.hpp"

namespace ezcrop {

inline constexpr double kDefaultBeta = 0.25;
inline constexpr double kDefaultCircleFraction = 0.7;

/// Geometry of the energy-zoned square for one H x W spectrum.
///
/// `center_row`/`center_col` are 1-based: H/2 + 1 for even H, (H + 1)/2 for
/// odd H. Both collapse to the 0-based index H/2 (integer division), which is
/// exactly where fftshift places the DC bin. The square covers the bins whose
/// Chebyshev distance from the centre is at most `distance`.
struct ZoneGeometry {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t center_row = 0;
  std::size_t center_col = 0;
  std::size_t extent_rows = 0;  // rows - center_row
  std::size_t extent_cols = 0;  // cols - center_col
  std::size_t distance = 0;
  double beta = kDefaultBeta;

  static ZoneGeometry compute(std::size_t rows, std::size_t cols, double beta);
};

struct ZoneCenter {
  std::size_t row = 0;  // 1-based
  std::size_t col = 0;  // 1-based
  friend bool operator==(const ZoneCenter&, const ZoneCenter&) = default;
};

ZoneCenter zone_center(std::size_t rows, std::size_t cols);

/// Expanding distance d: 0 when the centre sits on the first row or column,
/// otherwise ceil(beta * min(rows - x, cols - y)). beta must lie in (0, 1).
std::size_t zone_distance(std::size_t rows, std::size_t cols, double beta);

/// Share of spectral magnitude outside the zone for one slice, 1 - S_zone/S_tot.
/// A slice with zero spectral energy scores 0.
double slice_zone_ratio(const RealMatrix& slice, const ZoneGeometry& zone);

/// Batch-averaged energy-zone ratio: (1/B) * sum_b (1 - S_zone[b] / S_tot[b]).
/// All slices must share one shape.
double energy_zone_ratio(std::span<const RealMatrix> slices, double beta);

enum class Metric { Energy, Rank, Circle };

std::string_view to_string(Metric metric) noexcept;
std::optional<Metric> parse_metric(std::string_view text) noexcept;

/// Scores and descending ordering for the channels of one layer.
///
/// Energy scores lie in [0, 1]; rank scores are batch-mean numerical ranks in
/// [0, min(H, W)]; circle scores are batch-mean 70%-energy radii. `order`
/// holds 1-based channel indices, highest score first, ties by lower index.
struct LayerImportance {
  std::string layer;
  Metric metric = Metric::Energy;
  double beta = kDefaultBeta;
  std::size_t batch = 0;
  std::vector<double> scores;
  std::vector<std::size_t> order;

  std::size_t channels() const noexcept { return scores.size(); }
  friend bool operator==(const LayerImportance&, const LayerImportance&) = default;
};

/// One layer's post-activation outputs, B x T x H x W, row-major.
class FeatureMapBatch {
 public:
  FeatureMapBatch() = default;
  FeatureMapBatch(std::size_t batch, std::size_t channels, std::size_t rows, std::size_t cols,
                  std::vector<double> data);

  std::size_t batch() const noexcept { return batch_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  /// Slice for sample b and channel j, both 0-based.
  RealMatrix slice(std::size_t b, std::size_t j) const;
  /// The B slices of channel j (0-based).
  std::vector<RealMatrix> channel(std::size_t j) const;

  /// Copy restricted to the first `limit` samples.
  FeatureMapBatch first_samples(std::size_t limit) const;

  std::span<const double> values() const noexcept { return data_; }

 private:
  std::size_t batch_ = 0;
  std::size_t channels_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Channels are scored independently; `workers` > 1 spreads them over threads
/// with results identical to the sequential path.
LayerImportance layer_energy_scores(const FeatureMapBatch& maps, double beta = kDefaultBeta,
                                    unsigned workers = 1);

inline constexpr double kDoubleEpsilon = std::numeric_limits<double>::epsilon();
/// Machine epsilon of the 32-bit container payload.
inline constexpr double kFloatEpsilon = std::numeric_limits<float>::epsilon();

/// Count of singular values above max(H, W) * sigma_max * epsilon, where
/// epsilon is the precision the data was stored in.
std::size_t numerical_rank(const RealMatrix& m, double epsilon = kDoubleEpsilon);
std::size_t numerical_rank(const ComplexMatrix& m, double epsilon = kDoubleEpsilon);

LayerImportance rank_score(const FeatureMapBatch& maps, unsigned workers = 1,
                           double epsilon = kDoubleEpsilon);

/// Smallest radius r such that the spectral magnitude within Euclidean
/// distance r of the DC centre reaches `fraction` of the total. The radius is
/// always the distance of some bin from the centre. Zero-energy slices give 0.
double circle_radius(const RealMatrix& slice, double fraction);

LayerImportance circle_scores(const FeatureMapBatch& maps,
                              double fraction = kDefaultCircleFraction, unsigned workers = 1);

/// 1-based channel indices sorted by descending score; ties keep the lower
/// index first.
std::vector<std::size_t> sort_channels(std::span<const double> scores);

}  // namespace ezcrop
