#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ezcrop/importance.hpp"

namespace ezcrop {

/// Median timing of one metric at one slice size.
struct TimingRecord {
  Metric metric = Metric::Energy;
  std::size_t size = 0;
  std::size_t reps = 0;
  double median_seconds = 0.0;
  double slope = 0.0;  // fitted log-log slope of this metric across all sizes
};

struct BenchReport {
  std::vector<TimingRecord> records;
  double energy_slope = 0.0;
  double rank_slope = 0.0;

  /// Median time of `metric` at `size`; throws if absent.
  double seconds(Metric metric, std::size_t size) const;
};

/// Least-squares slope of log(times) against log(sizes). Needs >= 2 points
/// with positive values.
double fit_loglog_slope(std::span<const double> sizes, std::span<const double> times);

double median(std::vector<double> values);

/// Times the energy-zone ratio and the numerical rank of the same random n x n
/// slice for every n (one discarded warm-up, then `reps` timed runs, median
/// kept). Only metric computation is timed; slice generation is excluded.
/// Requires at least 4 sizes, each >= 16, and reps >= 5.
BenchReport run_bench(std::span<const std::size_t> sizes, std::size_t reps, std::uint64_t seed,
                      double beta = kDefaultBeta);

/// JSON document of the report (records plus fitted slopes).
std::string bench_to_json(const BenchReport& report);

}  // namespace ezcrop
