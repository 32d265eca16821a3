#include "ezcrop/importance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <lapacke.h>

#include "ezcrop/error.hpp"
#include "ezcrop/spectral.hpp"
#include "parallel.hpp"

namespace ezcrop {
namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("beta must lie in (0, 1), got " + std::to_string(beta));
  }
}

// Singular values only (jobz = 'N') from LAPACK's divide-and-conquer SVD.
// Row-major storage reads as the column-major transpose, which has the same
// singular values.
std::vector<double> singular_values(const RealMatrix& m) {
  const auto rows = static_cast<lapack_int>(m.rows());
  const auto cols = static_cast<lapack_int>(m.cols());
  std::vector<double> a(m.values().begin(), m.values().end());
  std::vector<double> sigma(std::min(m.rows(), m.cols()));
  const lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', cols, rows, a.data(), cols,
                                         sigma.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw NumericError("SVD failed to converge (info " + std::to_string(info) + ")");
  return sigma;
}

std::vector<double> singular_values(const ComplexMatrix& m) {
  const auto rows = static_cast<lapack_int>(m.rows());
  const auto cols = static_cast<lapack_int>(m.cols());
  std::vector<lapack_complex_double> a(m.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = lapack_make_complex_double(m.values()[k].real(), m.values()[k].imag());
  std::vector<double> sigma(std::min(m.rows(), m.cols()));
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', cols, rows, a.data(), cols,
                                         sigma.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw NumericError("SVD failed to converge (info " + std::to_string(info) + ")");
  return sigma;
}

// sigma is sorted descending by LAPACK.
std::size_t rank_from(const std::vector<double>& sigma, std::size_t rows, std::size_t cols,
                      double epsilon) {
  for (double s : sigma) {
    if (!std::isfinite(s)) throw NumericError("SVD produced non-finite singular values");
  }
  if (sigma.empty()) return 0;
  const double tol = static_cast<double>(std::max(rows, cols)) * sigma.front() * epsilon;
  return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [tol](double s) { return s > tol; }));
}

template <typename Score>
LayerImportance score_channels(const FeatureMapBatch& maps, Metric metric, double beta,
                               unsigned workers, Score&& score) {
  LayerImportance out;
  out.metric = metric;
  out.beta = beta;
  out.batch = maps.batch();
  out.scores.assign(maps.channels(), 0.0);
  detail::parallel_for(maps.channels(), workers, [&](std::size_t j) {
    const std::vector<RealMatrix> slices = maps.channel(j);
    out.scores[j] = score(std::span<const RealMatrix>(slices));
  });
  out.order = sort_channels(out.scores);
  return out;
}

}  // namespace

ZoneCenter zone_center(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("zone_center: empty dimensions");
  auto centre = [](std::size_t n) { return n % 2 == 0 ? n / 2 + 1 : (n + 1) / 2; };
  return {centre(rows), centre(cols)};
}

std::size_t zone_distance(std::size_t rows, std::size_t cols, double beta) {
  check_beta(beta);
  const ZoneCenter c = zone_center(rows, cols);
  if (c.row == 1 || c.col == 1) return 0;
  const std::size_t extent = std::min(rows - c.row, cols - c.col);
  return static_cast<std::size_t>(std::ceil(beta * static_cast<double>(extent)));
}

ZoneGeometry ZoneGeometry::compute(std::size_t rows, std::size_t cols, double beta) {
  const ZoneCenter c = zone_center(rows, cols);
  ZoneGeometry g;
  g.rows = rows;
  g.cols = cols;
  g.center_row = c.row;
  g.center_col = c.col;
  g.extent_rows = rows - c.row;
  g.extent_cols = cols - c.col;
  g.distance = zone_distance(rows, cols, beta);
  g.beta = beta;
  return g;
}

double slice_zone_ratio(const RealMatrix& slice, const ZoneGeometry& zone) {
  if (slice.rows() != zone.rows || slice.cols() != zone.cols) {
    throw std::invalid_argument("slice shape does not match zone geometry");
  }
  const RingEnergy energy = ring_energy(slice, zone.distance);
  if (energy.total <= 0.0) return 0.0;

  // Ring-by-ring accumulation keeps S_zone monotone in the distance, even
  // under rounding; ring sums and the total do not depend on the distance.
  double in_zone = 0.0;
  for (double ring : energy.rings) in_zone += ring;

  return std::clamp(1.0 - in_zone / energy.total, 0.0, 1.0);
}

double energy_zone_ratio(std::span<const RealMatrix> slices, double beta) {
  if (slices.empty()) throw std::invalid_argument("energy_zone_ratio: empty batch");
  for (const RealMatrix& s : slices) {
    if (!s.same_shape(slices.front())) {
      throw std::invalid_argument("energy_zone_ratio: slices differ in shape");
    }
  }
  const ZoneGeometry zone = ZoneGeometry::compute(slices.front().rows(), slices.front().cols(), beta);
  double sum = 0.0;
  for (const RealMatrix& s : slices) sum += slice_zone_ratio(s, zone);
  return sum / static_cast<double>(slices.size());
}

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::Energy: return "energy";
    case Metric::Rank: return "rank";
    case Metric::Circle: return "circle";
  }
  return "energy";
}

std::optional<Metric> parse_metric(std::string_view text) noexcept {
  if (text == "energy") return Metric::Energy;
  if (text == "rank") return Metric::Rank;
  if (text == "circle") return Metric::Circle;
  return std::nullopt;
}

FeatureMapBatch::FeatureMapBatch(std::size_t batch, std::size_t channels, std::size_t rows,
                                 std::size_t cols, std::vector<double> data)
    : batch_(batch), channels_(channels), rows_(rows), cols_(cols), data_(std::move(data)) {
  if (batch_ == 0 || channels_ == 0 || rows_ == 0 || cols_ == 0) {
    throw std::invalid_argument("feature map dimensions must be positive");
  }
  if (data_.size() != batch_ * channels_ * rows_ * cols_) {
    throw std::invalid_argument("feature map data length does not match B*T*H*W");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature map contains non-finite values");
  }
}

RealMatrix FeatureMapBatch::slice(std::size_t b, std::size_t j) const {
  const std::size_t area = rows_ * cols_;
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>((b * channels_ + j) * area);
  return RealMatrix(rows_, cols_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(area)));
}

std::vector<RealMatrix> FeatureMapBatch::channel(std::size_t j) const {
  std::vector<RealMatrix> out;
  out.reserve(batch_);
  for (std::size_t b = 0; b < batch_; ++b) out.push_back(slice(b, j));
  return out;
}

FeatureMapBatch FeatureMapBatch::first_samples(std::size_t limit) const {
  const std::size_t keep = std::clamp<std::size_t>(limit, 1, batch_);
  const std::size_t stride = channels_ * rows_ * cols_;
  return FeatureMapBatch(keep, channels_, rows_, cols_,
                         std::vector<double>(data_.begin(),
                                             data_.begin() + static_cast<std::ptrdiff_t>(keep * stride)));
}

LayerImportance layer_energy_scores(const FeatureMapBatch& maps, double beta, unsigned workers) {
  check_beta(beta);
  return score_channels(maps, Metric::Energy, beta, workers,
                        [beta](std::span<const RealMatrix> s) { return energy_zone_ratio(s, beta); });
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("rank epsilon must lie in (0, 1)");
}

std::size_t numerical_rank(const RealMatrix& m, double epsilon) {
  check_epsilon(epsilon);
  if (!all_finite(m)) throw std::invalid_argument("numerical_rank: non-finite input");
  return rank_from(singular_values(m), m.rows(), m.cols(), epsilon);
}

std::size_t numerical_rank(const ComplexMatrix& m, double epsilon) {
  check_epsilon(epsilon);
  return rank_from(singular_values(m), m.rows(), m.cols(), epsilon);
}

LayerImportance rank_score(const FeatureMapBatch& maps, unsigned workers, double epsilon) {
  check_epsilon(epsilon);
  return score_channels(maps, Metric::Rank, kDefaultBeta, workers,
                        [epsilon](std::span<const RealMatrix> slices) {
                          double sum = 0.0;
                          for (const RealMatrix& s : slices) {
                            sum += static_cast<double>(numerical_rank(s, epsilon));
                          }
                          return sum / static_cast<double>(slices.size());
                        });
}

double circle_radius(const RealMatrix& slice, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("circle fraction must lie in (0, 1]");
  }
  const RealMatrix e = energy_map(slice);
  const auto cr = static_cast<std::ptrdiff_t>(slice.rows() / 2);
  const auto cc = static_cast<std::ptrdiff_t>(slice.cols() / 2);

  struct Bin {
    std::ptrdiff_t dist2;
    double energy;
  };
  std::vector<Bin> bins;
  bins.reserve(e.size());
  for (std::size_t r = 0; r < e.rows(); ++r) {
    for (std::size_t c = 0; c < e.cols(); ++c) {
      const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(r) - cr;
      const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(c) - cc;
      bins.push_back({dr * dr + dc * dc, e(r, c)});
    }
  }
  std::stable_sort(bins.begin(), bins.end(),
                   [](const Bin& a, const Bin& b) { return a.dist2 < b.dist2; });

  // Summing in the same order as the scan makes the final prefix equal the
  // total exactly, so fraction 1.0 always terminates on the farthest ring.
  double total = 0.0;
  for (const Bin& b : bins) total += b.energy;
  if (total <= 0.0) return 0.0;

  const double target = fraction * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < bins.size();) {
    const std::ptrdiff_t d2 = bins[k].dist2;
    for (; k < bins.size() && bins[k].dist2 == d2; ++k) acc += bins[k].energy;
    if (acc >= target) return std::sqrt(static_cast<double>(d2));
  }
  return std::sqrt(static_cast<double>(bins.back().dist2));
}

LayerImportance circle_scores(const FeatureMapBatch& maps, double fraction, unsigned workers) {
  LayerImportance out =
      score_channels(maps, Metric::Circle, kDefaultBeta, workers,
                     [fraction](std::span<const RealMatrix> slices) {
                       double sum = 0.0;
                       for (const RealMatrix& s : slices) sum += circle_radius(s, fraction);
                       return sum / static_cast<double>(slices.size());
                     });
  return out;
}

std::vector<std::size_t> sort_channels(std::span<const double> scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("sort_channels: non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t& k : order) ++k;
  return order;
}

}  // namespace ezcrop
