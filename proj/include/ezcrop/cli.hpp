#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ezcrop::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumeric = 1;
inline constexpr int kExitUsage = 2;

/// Worker count for parallel scoring: hardware concurrency, capped by the
/// EZCROP_THREADS environment variable when it holds a positive integer.
unsigned worker_count();

struct ConvCheck {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_error = 0.0;
};

/// Randomised spectral-vs-spatial circular convolution comparison over
/// S, T in [1, 4], D in {1, 3, 5}, H, W in [4, 32]. Deterministic in `seed`.
ConvCheck verify_conv(std::uint64_t seed, std::size_t trials, double tolerance = 1e-6);

/// Entry point; `args` excludes the program name. Returns the exit code.
///
///   analyze <dumps> [--beta B] [--metric energy|rank|circle] [--batch-limit N]
///           [--fraction F] [--beta-sweep B1,B2,...] -o scores.json
///   plan <scores.json> <keep.json> -o plan.json
///   compose <plan.json>... -o plan.json
///   verify-conv [--seed S] [--trials N] [-o report.txt]
///   report <scores.json>... --out-dir DIR [--dumps DIR --heatmap LAYER:CH[:SAMPLE]]
///   bench [--sizes N,...] [--reps R] [--seed S] [-o bench.json]
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ezcrop::cli
