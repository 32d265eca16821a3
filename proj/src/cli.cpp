#include "ezcrop/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ezcrop/bench.hpp"
#include "ezcrop/error.hpp"
#include "ezcrop/importance.hpp"
#include "ezcrop/io.hpp"
#include "ezcrop/pruner.hpp"
#include "ezcrop/report.hpp"
#include "ezcrop/spectral.hpp"

namespace ezcrop::cli {
namespace {

namespace fs = std::filesystem;

// Input problems map to kExitUsage, numeric failures to kExitNumeric.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string beta_suffix(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ".beta%.4g", beta);
  return buf;
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path out = path.parent_path() / path.stem();
  out += suffix;
  out += path.extension();
  return out;
}

void check_beta_arg(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw UsageError("--beta must lie in (0, 1)");
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string dumps;
  double beta = kDefaultBeta;
  std::string metric = "energy";
  std::size_t batch_limit = 0;
  double fraction = kDefaultCircleFraction;
  std::vector<double> beta_sweep;
  std::string output;
};

LayerImportance score_layer(const FeatureMapBatch& maps, Metric metric, double beta,
                            double fraction, unsigned workers) {
  switch (metric) {
    case Metric::Energy: return layer_energy_scores(maps, beta, workers);
    // Dumps hold 32-bit floats; rounding at that precision is not rank.
    case Metric::Rank: return rank_score(maps, workers, kFloatEpsilon);
    case Metric::Circle: return circle_scores(maps, fraction, workers);
  }
  return {};
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const auto metric = parse_metric(a.metric);
  if (!metric) throw UsageError("--metric must be energy, rank or circle");
  check_beta_arg(a.beta);
  for (double b : a.beta_sweep) check_beta_arg(b);
  if (!(a.fraction > 0.0 && a.fraction <= 1.0)) throw UsageError("--fraction must lie in (0, 1]");

  const std::vector<ManifestEntry> manifest = read_manifest(a.dumps);
  std::vector<FeatureMapBatch> layers;
  layers.reserve(manifest.size());
  for (const ManifestEntry& e : manifest) {
    FeatureMapBatch maps = to_feature_maps(read_tensor(fs::path(a.dumps) / e.file));
    if (a.batch_limit > 0) maps = maps.first_samples(a.batch_limit);
    layers.push_back(std::move(maps));
  }

  const unsigned workers = worker_count();
  auto score_all = [&](double beta) {
    std::vector<LayerImportance> scores;
    for (std::size_t k = 0; k < manifest.size(); ++k) {
      try {
        LayerImportance l = score_layer(layers[k], *metric, beta, a.fraction, workers);
        l.layer = manifest[k].layer;
        scores.push_back(std::move(l));
      } catch (const NumericError& e) {
        throw NumericError("layer " + manifest[k].layer + ": " + e.what());
      }
    }
    return scores;
  };

  // Everything is scored before the first file is written.
  std::vector<std::pair<fs::path, std::vector<LayerImportance>>> outputs;
  outputs.emplace_back(a.output, score_all(a.beta));
  if (*metric == Metric::Energy) {
    for (double b : a.beta_sweep) outputs.emplace_back(with_suffix(a.output, beta_suffix(b)), score_all(b));
  }
  for (const auto& [path, scores] : outputs) {
    write_scores(path, scores);
    out << "wrote " << path.string() << " (" << scores.size() << " layers, metric "
        << to_string(*metric) << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- plan

struct KeepRule {
  std::optional<double> ratio;
  std::optional<std::size_t> count;
};

std::map<std::string, KeepRule> read_keep_spec(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw UsageError(path.string() + ": expected {\"layers\": [...]}");
  }
  std::map<std::string, KeepRule> rules;
  for (const auto& row : doc["layers"]) {
    if (!row.is_object() || !row.contains("layer") || !row["layer"].is_string()) {
      throw UsageError(path.string() + ": each rule needs a \"layer\" string");
    }
    const std::string id = row["layer"].get<std::string>();
    KeepRule rule;
    if (row.contains("ratio")) {
      if (!row["ratio"].is_number()) throw UsageError("layer " + id + ": ratio must be a number");
      rule.ratio = row["ratio"].get<double>();
    }
    if (row.contains("count")) {
      if (!row["count"].is_number_unsigned()) throw UsageError("layer " + id + ": count must be a positive integer");
      rule.count = row["count"].get<std::size_t>();
    }
    if (rule.ratio.has_value() == rule.count.has_value()) {
      throw UsageError("layer " + id + ": give exactly one of ratio or count");
    }
    if (!rules.emplace(id, rule).second) throw UsageError("layer " + id + ": duplicate rule");
  }
  return rules;
}

int cmd_plan(const std::string& scores_path, const std::string& keep_path, const std::string& output,
             std::ostream& out) {
  const std::vector<LayerImportance> scores = read_scores(scores_path);
  const auto rules = read_keep_spec(keep_path);
  for (const auto& [id, rule] : rules) {
    const bool known = std::any_of(scores.begin(), scores.end(),
                                   [&](const LayerImportance& l) { return l.layer == id; });
    if (!known) throw UsageError("keep spec names unknown layer " + id);
  }

  PrunePlan plan;
  for (const LayerImportance& l : scores) {
    const auto it = rules.find(l.layer);
    std::size_t keep = l.channels();
    if (it != rules.end()) {
      try {
        keep = it->second.ratio ? keep_count_for_ratio(*it->second.ratio, l.channels()) : *it->second.count;
        plan.layers.push_back(make_plan(l, keep));
      } catch (const std::invalid_argument& e) {
        throw UsageError("layer " + l.layer + ": " + e.what());
      }
    } else {
      plan.layers.push_back(keep_all(l.layer, l.channels()));
    }
  }
  write_plan(output, plan);
  for (const PlanEntry& e : plan.layers) {
    out << e.layer << ": keep " << e.keep.size() << " of " << e.channels << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- compose

int cmd_compose(const std::vector<std::string>& plans, const std::string& output, std::ostream& out) {
  if (plans.empty()) throw UsageError("compose needs at least one plan");
  PrunePlan acc = read_plan(plans.front());
  for (std::size_t k = 1; k < plans.size(); ++k) {
    try {
      acc = compose_plans(acc, read_plan(plans[k]));
    } catch (const std::invalid_argument& e) {
      throw UsageError(plans[k] + ": " + e.what());
    }
  }
  write_plan(output, acc);
  for (const PlanEntry& e : acc.layers) {
    out << e.layer << ": keep " << e.keep.size() << " of " << e.channels << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- verify-conv

int cmd_verify_conv(std::uint64_t seed, long long trials, const std::string& output, std::ostream& out) {
  if (trials < 1) throw UsageError("--trials must be >= 1");
  constexpr double kTolerance = 1e-6;
  const ConvCheck check = verify_conv(seed, static_cast<std::size_t>(trials), kTolerance);
  std::ostringstream report;
  report << "verify-conv seed " << seed << " trials " << check.trials << "\n"
         << "max_err " << format_sci(check.max_error) << "\n"
         << "tolerance " << format_sci(kTolerance) << "\n"
         << "failures " << check.failures << "\n"
         << (check.failures == 0 ? "status ok" : "status FAILED") << "\n";
  out << report.str();
  if (!output.empty()) write_text(output, report.str());
  return check.failures == 0 ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------- report

struct HeatmapRequest {
  std::string layer;
  std::size_t channel = 0;  // 1-based
  std::size_t sample = 1;   // 1-based
};

HeatmapRequest parse_heatmap(const std::string& text) {
  HeatmapRequest req;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  auto number = [&](const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0) {
      throw UsageError("--heatmap expects LAYER:CHANNEL[:SAMPLE] with 1-based indices, got " + text);
    }
    return v;
  };
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty()) {
    throw UsageError("--heatmap expects LAYER:CHANNEL[:SAMPLE], got " + text);
  }
  req.layer = parts[0];
  req.channel = number(parts[1]);
  if (parts.size() == 3) req.sample = number(parts[2]);
  return req;
}

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

int cmd_report(const std::vector<std::string>& score_paths, const std::string& out_dir,
               const std::string& dumps, const std::vector<std::string>& heatmaps, std::ostream& out) {
  if (score_paths.empty()) throw UsageError("report needs at least one scores file");
  if (!heatmaps.empty() && dumps.empty()) throw UsageError("--heatmap requires --dumps");

  std::vector<std::vector<LayerImportance>> files;
  for (const std::string& p : score_paths) files.push_back(read_scores(p));
  for (std::size_t f = 1; f < files.size(); ++f) {
    bool same = files[f].size() == files[0].size();
    for (std::size_t k = 0; same && k < files[0].size(); ++k) {
      same = files[f][k].layer == files[0][k].layer &&
             files[f][k].channels() == files[0][k].channels();
    }
    if (!same) throw UsageError(score_paths[f] + ": layer set differs from " + score_paths[0]);
  }
  std::vector<HeatmapRequest> requests;
  for (const std::string& h : heatmaps) requests.push_back(parse_heatmap(h));

  fs::create_directories(out_dir);
  std::ostringstream text;
  for (std::size_t f = 0; f < files.size(); ++f) {
    text << "== " << fs::path(score_paths[f]).filename().string() << "\n";
    for (const LayerImportance& l : files[f]) text << ranked_table(l) << "\n";
  }

  if (files.size() >= 2) {
    text << "== spearman correlation against " << fs::path(score_paths[0]).filename().string() << "\n";
    for (std::size_t f = 1; f < files.size(); ++f) {
      for (std::size_t k = 0; k < files[0].size(); ++k) {
        const LayerImportance& a = files[0][k];
        const LayerImportance& b = files[f][k];
        char line[160];
        const double rho = a.channels() >= 2 ? spearman(a.scores, b.scores) : 1.0;
        std::snprintf(line, sizeof line, "%s  %s vs %s  rho %.6f\n", a.layer.c_str(),
                      std::string(to_string(a.metric)).c_str(), std::string(to_string(b.metric)).c_str(), rho);
        text << line;
        const fs::path chart = fs::path(out_dir) / ("compare_" + safe_name(a.layer) + "_" + std::to_string(f) + ".ppm");
        write_text(chart, to_ppm(comparison_chart(a, b)));
      }
    }
    text << "\n";
  }

  if (!requests.empty()) {
    const std::vector<ManifestEntry> manifest = read_manifest(dumps);
    text << "== heatmaps\n";
    for (const HeatmapRequest& req : requests) {
      const auto it = std::find_if(manifest.begin(), manifest.end(),
                                   [&](const ManifestEntry& e) { return e.layer == req.layer; });
      if (it == manifest.end()) throw UsageError("--heatmap names unknown layer " + req.layer);
      const FeatureMapBatch maps = to_feature_maps(read_tensor(fs::path(dumps) / it->file));
      if (req.channel > maps.channels() || req.sample > maps.batch()) {
        throw UsageError("--heatmap index out of range for layer " + req.layer);
      }
      const RealMatrix slice = maps.slice(req.sample - 1, req.channel - 1);
      const fs::path file = fs::path(out_dir) / ("heatmap_" + safe_name(req.layer) + "_c" +
                                                 std::to_string(req.channel) + "_s" +
                                                 std::to_string(req.sample) + ".pgm");
      write_text(file, to_pgm(energy_map(slice)));
      char line[200];
      std::snprintf(line, sizeof line, "%s channel %zu sample %zu: 70%% energy radius %.4f -> %s\n",
                    req.layer.c_str(), req.channel, req.sample,
                    circle_radius(slice, kDefaultCircleFraction), file.filename().string().c_str());
      text << line;
    }
  }

  write_text(fs::path(out_dir) / "report.txt", text.str());
  out << "wrote " << (fs::path(out_dir) / "report.txt").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const std::vector<std::size_t>& sizes, std::size_t reps, std::uint64_t seed,
              const std::string& output, std::ostream& out) {
  BenchReport report;
  try {
    report = run_bench(sizes, reps, seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  char line[128];
  out << "   n    energy_s      rank_s   speedup\n";
  for (std::size_t n : sizes) {
    const double e = report.seconds(Metric::Energy, n);
    const double r = report.seconds(Metric::Rank, n);
    std::snprintf(line, sizeof line, "%4zu  %10.3e  %10.3e  %8.2f\n", n, e, r, r / e);
    out << line;
  }
  std::snprintf(line, sizeof line, "slope energy %.3f  rank %.3f\n", report.energy_slope, report.rank_slope);
  out << line;
  if (!output.empty()) write_text(output, bench_to_json(report));
  return kExitOk;
}

}  // namespace

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EZCROP_THREADS")) {
    unsigned cap = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec == std::errc{} && ptr == s.data() + s.size() && cap > 0) n = std::min(n, cap);
  }
  return n;
}

ConvCheck verify_conv(std::uint64_t seed, std::size_t trials, double tolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> channels(1, 4);
  std::uniform_int_distribution<std::size_t> extent(4, 32);
  std::uniform_int_distribution<std::size_t> kernel_pick(0, 2);
  std::uniform_real_distribution<double> value(-1.0, 1.0);

  ConvCheck check;
  check.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t s = channels(rng);
    const std::size_t o = channels(rng);
    const std::size_t d = 2 * kernel_pick(rng) + 1;
    const std::size_t h = extent(rng);
    const std::size_t w = extent(rng);

    std::vector<RealMatrix> x(s, RealMatrix(h, w));
    for (RealMatrix& m : x) {
      for (double& v : m.values()) v = value(rng);
    }
    std::vector<double> weights(d * d * s * o);
    for (double& v : weights) v = value(rng);
    const KernelTensor kernel(d, s, o, std::move(weights));

    const auto spectral = spectral_conv(x, kernel);
    const auto spatial = spatial_circular_conv(x, kernel);
    double err = 0.0;
    for (std::size_t j = 0; j < o; ++j) {
      for (std::size_t n = 0; n < spectral[j].size(); ++n) {
        err = std::max(err, std::abs(spectral[j].values()[n] - spatial[j].values()[n]));
      }
    }
    check.max_error = std::max(check.max_error, err);
    if (err > tolerance) ++check.failures;
  }
  return check;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-zone channel importance for CNN pruning", "ezcrop"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Score every layer listed in a dump manifest");
  analyze_cmd->add_option("dumps", analyze.dumps, "Directory holding manifest.json and tensors")->required();
  analyze_cmd->add_option("--beta", analyze.beta, "Zone size hyper-parameter in (0, 1)");
  analyze_cmd->add_option("--metric", analyze.metric, "energy, rank or circle");
  analyze_cmd->add_option("--batch-limit", analyze.batch_limit, "Use only the first N samples (0 = all)");
  analyze_cmd->add_option("--fraction", analyze.fraction, "Energy fraction for the circle metric");
  analyze_cmd->add_option("--beta-sweep", analyze.beta_sweep, "Extra betas; one scores file each")->delimiter(',');
  analyze_cmd->add_option("-o,--output", analyze.output, "Scores file")->required();

  std::string plan_scores, plan_keep, plan_out;
  auto* plan_cmd = app.add_subcommand("plan", "Turn scores and a keep spec into a prune plan");
  plan_cmd->add_option("scores", plan_scores)->required();
  plan_cmd->add_option("keep", plan_keep, "JSON: {\"layers\": [{\"layer\": id, \"ratio\" | \"count\": v}]}")->required();
  plan_cmd->add_option("-o,--output", plan_out)->required();

  std::vector<std::string> compose_in;
  std::string compose_out;
  auto* compose_cmd = app.add_subcommand("compose", "Compose prune plans left to right");
  compose_cmd->add_option("plans", compose_in)->required();
  compose_cmd->add_option("-o,--output", compose_out)->required();

  std::uint64_t verify_seed = 1;
  long long verify_trials = 200;
  std::string verify_out;
  auto* verify_cmd = app.add_subcommand("verify-conv", "Check spectral against spatial circular convolution");
  verify_cmd->add_option("--seed", verify_seed);
  verify_cmd->add_option("--trials", verify_trials);
  verify_cmd->add_option("-o,--output", verify_out);

  std::vector<std::string> report_in, report_heatmaps;
  std::string report_dir, report_dumps;
  auto* report_cmd = app.add_subcommand("report", "Ranked tables, metric correlation and heatmaps");
  report_cmd->add_option("scores", report_in)->required();
  report_cmd->add_option("--out-dir", report_dir)->required();
  report_cmd->add_option("--dumps", report_dumps, "Dump directory for heatmaps");
  report_cmd->add_option("--heatmap", report_heatmaps, "LAYER:CHANNEL[:SAMPLE], 1-based");

  std::vector<std::size_t> bench_sizes{64, 128, 256, 512, 1024};
  std::size_t bench_reps = 9;
  std::uint64_t bench_seed = 1;
  std::string bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "Time the energy metric against the rank metric");
  bench_cmd->add_option("--sizes", bench_sizes)->delimiter(',');
  bench_cmd->add_option("--reps", bench_reps);
  bench_cmd->add_option("--seed", bench_seed);
  bench_cmd->add_option("-o,--output", bench_out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(analyze, out);
    if (plan_cmd->parsed()) return cmd_plan(plan_scores, plan_keep, plan_out, out);
    if (compose_cmd->parsed()) return cmd_compose(compose_in, compose_out, out);
    if (verify_cmd->parsed()) return cmd_verify_conv(verify_seed, verify_trials, verify_out, out);
    if (report_cmd->parsed()) return cmd_report(report_in, report_dir, report_dumps, report_heatmaps, out);
    if (bench_cmd->parsed()) return cmd_bench(bench_sizes, bench_reps, bench_seed, bench_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace ezcrop::cli
