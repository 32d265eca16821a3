#include "ezcrop/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace ezcrop {
namespace {

template <typename Fn>
double time_median(std::size_t reps, Fn&& fn) {
  volatile double sink = fn();  // warm-up, discarded
  std::vector<double> seconds;
  seconds.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    sink = sink + fn();
    const auto stop = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return std::max(median(std::move(seconds)), 1e-9);
}

}  // namespace

double BenchReport::seconds(Metric metric, std::size_t size) const {
  for (const TimingRecord& r : records) {
    if (r.metric == metric && r.size == size) return r.median_seconds;
  }
  throw std::out_of_range("no timing for size " + std::to_string(size));
}

double fit_loglog_slope(std::span<const double> sizes, std::span<const double> times) {
  if (sizes.size() != times.size() || sizes.size() < 2) {
    throw std::invalid_argument("slope fit needs matching series of at least two points");
  }
  const double n = static_cast<double>(sizes.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (!(sizes[k] > 0.0) || !(times[k] > 0.0)) throw std::invalid_argument("slope fit needs positive values");
    const double x = std::log(sizes[k]);
    const double y = std::log(times[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("slope fit needs at least two distinct sizes");
  return (n * sxy - sx * sy) / denom;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

BenchReport run_bench(std::span<const std::size_t> sizes, std::size_t reps, std::uint64_t seed,
                      double beta) {
  if (sizes.size() < 4) throw std::invalid_argument("bench needs at least 4 sizes");
  for (std::size_t n : sizes) {
    if (n < 16) throw std::invalid_argument("bench sizes must be >= 16");
  }
  if (reps < 5) throw std::invalid_argument("bench needs reps >= 5");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  BenchReport report;
  std::vector<double> xs, energy_t, rank_t;
  for (std::size_t n : sizes) {
    RealMatrix slice(n, n);
    for (double& v : slice.values()) v = normal(rng);
    const RealMatrix batch[] = {slice};

    const double e = time_median(reps, [&] { return energy_zone_ratio(batch, beta); });
    const double r = time_median(reps, [&] { return static_cast<double>(numerical_rank(slice)); });
    report.records.push_back({Metric::Energy, n, reps, e, 0.0});
    report.records.push_back({Metric::Rank, n, reps, r, 0.0});
    xs.push_back(static_cast<double>(n));
    energy_t.push_back(e);
    rank_t.push_back(r);
  }

  report.energy_slope = fit_loglog_slope(xs, energy_t);
  report.rank_slope = fit_loglog_slope(xs, rank_t);
  for (TimingRecord& rec : report.records) {
    rec.slope = rec.metric == Metric::Energy ? report.energy_slope : report.rank_slope;
  }
  return report;
}

std::string bench_to_json(const BenchReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const TimingRecord& r : report.records) {
    records.push_back({{"metric", std::string(to_string(r.metric))},
                       {"size", r.size},
                       {"reps", r.reps},
                       {"median_seconds", r.median_seconds},
                       {"slope", r.slope}});
  }
  nlohmann::json doc{
      {"note", "wall time of metric computation on one n x n slice; I/O and data generation excluded"},
      {"records", records},
      {"slopes", {{"energy", report.energy_slope}, {"rank", report.rank_slope}}},
  };
  return doc.dump(2) + "\n";
}

}  // namespace ezcrop
