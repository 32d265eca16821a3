#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "ezcrop/cli.hpp"
#include "ezcrop/io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ezcrop;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_layer(const fs::path& dir, const std::string& file, const FeatureMapBatch& maps) {
  const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(maps.batch()),
                                        static_cast<std::uint32_t>(maps.channels()),
                                        static_cast<std::uint32_t>(maps.rows()),
                                        static_cast<std::uint32_t>(maps.cols())};
  const std::vector<float> values(maps.values().begin(), maps.values().end());
  write_tensor(dir / file, dims, values);
}

// Two layers: one with controlled ranks, one with a constant channel first.
void make_dumps(const fs::path& dir) {
  fs::create_directories(dir);
  std::mt19937_64 rng(42);
  const FeatureMapBatch ranked = synthetic::rank_batch(rng, 4, 8, {1, 6, 3, 8, 2});
  write_layer(dir, "conv1.ezt", ranked);

  std::vector<double> data;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t j = 0; j < 3; ++j) {
      const RealMatrix m = j == 0 ? RealMatrix(8, 8, 1.0) : oracle::random_matrix(rng, 8, 8, 0.0, 1.0);
      data.insert(data.end(), m.values().begin(), m.values().end());
    }
  }
  write_layer(dir, "conv2.ezt", FeatureMapBatch(2, 3, 8, 8, data));

  const std::vector<ManifestEntry> manifest{{"conv1", "conv1.ezt", {4, 5, 8, 8}, "features.0"},
                                            {"conv2", "conv2.ezt", {2, 3, 8, 8}, "features.3"}};
  write_manifest(dir, manifest);
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run_cli({"verify-conv", "--trials", "0"}).code == cli::kExitUsage);
  CHECK(run_cli({"analyze", "x"}).code == cli::kExitUsage);
  CHECK(run_cli({"bench", "--sizes", "16,32,64"}).code == cli::kExitUsage);
}

TEST_CASE("verify-conv passes and is deterministic") {
  oracle::TempDir dir("cli");
  const Result a = run_cli({"verify-conv", "--seed", "7", "--trials", "200", "-o", (dir / "a.txt").string()});
  const Result b = run_cli({"verify-conv", "--seed", "7", "--trials", "200", "-o", (dir / "b.txt").string()});
  CHECK(a.code == cli::kExitOk);
  CHECK(a.out.find("status ok") != std::string::npos);
  CHECK(read_text(dir / "a.txt") == read_text(dir / "b.txt"));
  CHECK(a.out == b.out);

  const std::string text = read_text(dir / "a.txt");
  const auto at = text.find("max_err ");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(text.substr(at + 8)) <= 1e-6);
}

TEST_CASE("analyze writes scores for every manifest layer") {
  oracle::TempDir dir("cli");
  make_dumps(dir / "dumps");
  const std::string scores = (dir / "energy.json").string();
  const Result r = run_cli({"analyze", (dir / "dumps").string(), "--beta", "0.25", "--metric", "energy", "-o", scores});
  CHECK(r.code == cli::kExitOk);
  const auto layers = read_scores(scores);
  REQUIRE(layers.size() == 2);
  CHECK(layers[0].layer == "conv1");
  CHECK(layers[0].batch == 4);
  CHECK(layers[1].scores[0] == 0.0);  // constant channel
  CHECK(layers[1].order.back() == 1);

  const std::string first = read_text(scores);
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "-o", scores}).code == cli::kExitOk);
  CHECK(read_text(scores) == first);

  const std::string rank = (dir / "rank.json").string();
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "--metric", "rank", "-o", rank}).code == cli::kExitOk);
  CHECK(read_scores(rank)[0].scores == std::vector<double>{1, 6, 3, 8, 2});

  const std::string limited = (dir / "limited.json").string();
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "--batch-limit", "1", "-o", limited}).code == cli::kExitOk);
  CHECK(read_scores(limited)[0].batch == 1);

  const std::string circle = (dir / "circle.json").string();
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "--metric", "circle", "-o", circle}).code == cli::kExitOk);
  CHECK(read_scores(circle)[1].scores[0] == 0.0);
}

TEST_CASE("beta sweep writes one file per beta") {
  oracle::TempDir dir("cli");
  make_dumps(dir / "dumps");
  const Result r = run_cli({"analyze", (dir / "dumps").string(), "--beta-sweep", "0.1,0.5", "-o",
                            (dir / "s.json").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(fs::exists(dir / "s.json"));
  const auto lo = read_scores(dir / "s.beta0.1.json");
  const auto hi = read_scores(dir / "s.beta0.5.json");
  CHECK(lo[0].beta == 0.1);
  for (std::size_t j = 0; j < lo[0].scores.size(); ++j) CHECK(lo[0].scores[j] >= hi[0].scores[j]);
}

TEST_CASE("analyze input errors") {
  oracle::TempDir dir("cli");
  fs::create_directories(dir / "empty");
  const std::string out = (dir / "scores.json").string();
  CHECK(run_cli({"analyze", (dir / "empty").string(), "-o", out}).code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(out));

  make_dumps(dir / "dumps");
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "--beta", "1.5", "-o", out}).code == cli::kExitUsage);
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "--metric", "l1", "-o", out}).code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(out));

  // A corrupt second dump leaves no output behind.
  write_text(dir / "dumps" / "conv2.ezt", "EZT0 not a tensor");
  CHECK(run_cli({"analyze", (dir / "dumps").string(), "-o", out}).code == cli::kExitUsage);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("plan follows ratio and count rules") {
  oracle::TempDir dir("cli");
  LayerImportance wide;
  wide.layer = "wide";
  wide.batch = 1;
  for (int j = 0; j < 64; ++j) wide.scores.push_back(j / 64.0);
  wide.order = sort_channels(wide.scores);
  LayerImportance narrow = wide;
  narrow.layer = "narrow";
  narrow.scores = {0.3, 0.1, 0.2};
  narrow.order = sort_channels(narrow.scores);
  LayerImportance other = narrow;
  other.layer = "other";
  const std::vector<LayerImportance> layers{wide, narrow, other};
  write_scores(dir / "scores.json", layers);

  write_text(dir / "keep.json", R"({"layers":[{"layer":"wide","ratio":0.5},{"layer":"narrow","count":1}]})");
  const std::string plan_path = (dir / "plan.json").string();
  CHECK(run_cli({"plan", (dir / "scores.json").string(), (dir / "keep.json").string(), "-o", plan_path}).code ==
        cli::kExitOk);
  const PrunePlan plan = read_plan(plan_path);
  REQUIRE(plan.layers.size() == 3);
  CHECK(plan.find("wide")->keep.size() == 32);
  CHECK(plan.find("wide")->keep.front() == 33);
  CHECK(plan.find("narrow")->keep == std::vector<std::size_t>{1});
  CHECK(plan.find("other")->keep == std::vector<std::size_t>{1, 2, 3});

  write_text(dir / "keep.json", R"({"layers":[{"layer":"wide","ratio":0.001},{"layer":"narrow","ratio":1.0}]})");
  CHECK(run_cli({"plan", (dir / "scores.json").string(), (dir / "keep.json").string(), "-o", plan_path}).code ==
        cli::kExitOk);
  CHECK(read_plan(plan_path).find("wide")->keep == std::vector<std::size_t>{64});
  CHECK(read_plan(plan_path).find("narrow")->keep.size() == 3);

  write_text(dir / "keep.json", R"({"layers":[{"layer":"ghost","ratio":0.5}]})");
  CHECK(run_cli({"plan", (dir / "scores.json").string(), (dir / "keep.json").string(), "-o", plan_path}).code ==
        cli::kExitUsage);
  write_text(dir / "keep.json", R"({"layers":[{"layer":"wide","count":65}]})");
  CHECK(run_cli({"plan", (dir / "scores.json").string(), (dir / "keep.json").string(), "-o", plan_path}).code ==
        cli::kExitUsage);
}

TEST_CASE("compose chains plans") {
  oracle::TempDir dir("cli");
  write_plan(dir / "p1.json", PrunePlan{{PlanEntry{"c", 6, {1, 3, 5}}}});
  write_plan(dir / "p2.json", PrunePlan{{PlanEntry{"c", 3, {1, 2}}}});
  write_plan(dir / "p3.json", PrunePlan{{PlanEntry{"c", 2, {2}}}});
  const std::string out = (dir / "out.json").string();
  CHECK(run_cli({"compose", (dir / "p1.json").string(), (dir / "p2.json").string(), "-o", out}).code == cli::kExitOk);
  CHECK(read_plan(out).layers[0].keep == std::vector<std::size_t>{1, 3});
  CHECK(run_cli({"compose", (dir / "p1.json").string(), (dir / "p2.json").string(), (dir / "p3.json").string(),
                 "-o", out})
            .code == cli::kExitOk);
  CHECK(read_plan(out).layers[0].keep == std::vector<std::size_t>{3});
  CHECK(run_cli({"compose", (dir / "p1.json").string(), (dir / "p3.json").string(), "-o", out}).code ==
        cli::kExitUsage);
}

TEST_CASE("report with one and two score files") {
  oracle::TempDir dir("cli");
  make_dumps(dir / "dumps");
  const std::string energy = (dir / "energy.json").string();
  const std::string rank = (dir / "rank.json").string();
  REQUIRE(run_cli({"analyze", (dir / "dumps").string(), "-o", energy}).code == 0);
  REQUIRE(run_cli({"analyze", (dir / "dumps").string(), "--metric", "rank", "-o", rank}).code == 0);

  CHECK(run_cli({"report", energy, "--out-dir", (dir / "single").string()}).code == cli::kExitOk);
  const std::string single = read_text(dir / "single" / "report.txt");
  CHECK(single.find("conv1") != std::string::npos);
  CHECK(single.find("spearman") == std::string::npos);

  CHECK(run_cli({"report", energy, rank, "--out-dir", (dir / "pair").string(), "--dumps", (dir / "dumps").string(),
                 "--heatmap", "conv2:1"})
            .code == cli::kExitOk);
  const std::string pair = read_text(dir / "pair" / "report.txt");
  CHECK(pair.find("spearman") != std::string::npos);
  CHECK(pair.find("conv1  energy vs rank  rho") != std::string::npos);
  CHECK(fs::exists(dir / "pair" / "compare_conv1_1.ppm"));

  std::istringstream pgm(read_text(dir / "pair" / "heatmap_conv2_c1_s1.pgm"));
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  pgm >> magic >> w >> h >> maxval;
  CHECK(w == 8);
  CHECK(h == 8);
  std::vector<int> px;
  for (int v; pgm >> v;) px.push_back(v);
  REQUIRE(px.size() == 64);
  CHECK(std::max_element(px.begin(), px.end()) - px.begin() == 4 * 8 + 4);

  CHECK(run_cli({"report", energy, "--out-dir", (dir / "x").string(), "--heatmap", "conv2:1"}).code ==
        cli::kExitUsage);
  CHECK(run_cli({"report", energy, "--out-dir", (dir / "x").string(), "--dumps", (dir / "dumps").string(),
                 "--heatmap", "conv2:9"})
            .code == cli::kExitUsage);
}

TEST_CASE("bench writes a report") {
  oracle::TempDir dir("cli");
  const std::string out = (dir / "bench.json").string();
  CHECK(run_cli({"bench", "--sizes", "16,32,48,64", "--reps", "5", "-o", out}).code == cli::kExitOk);
  CHECK(read_text(out).find("\"slopes\"") != std::string::npos);
}

TEST_CASE("worker count honours EZCROP_THREADS") {
  setenv("EZCROP_THREADS", "1", 1);
  CHECK(cli::worker_count() == 1);
  setenv("EZCROP_THREADS", "junk", 1);
  CHECK(cli::worker_count() >= 1);
  unsetenv("EZCROP_THREADS");
}
