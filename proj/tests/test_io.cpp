#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "ezcrop/error.hpp"
#include "ezcrop/io.hpp"
#include "support/oracles.hpp"

using namespace ezcrop;
namespace fs = std::filesystem;

namespace {

// Hand-assembled container for dims [2, 2], values 1, 2, 3, 4.
const std::vector<std::uint8_t> kGolden{
    0x45, 0x5A, 0x54, 0x31,  // "EZT1"
    0x02, 0x00, 0x00, 0x00,  // ndim
    0x02, 0x00, 0x00, 0x00,  // dims[0]
    0x02, 0x00, 0x00, 0x00,  // dims[1]
    0x00, 0x00, 0x80, 0x3F,  // 1.0f
    0x00, 0x00, 0x00, 0x40,  // 2.0f
    0x00, 0x00, 0x40, 0x40,  // 3.0f
    0x00, 0x00, 0x80, 0x40,  // 4.0f
};

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FormatError::Kind decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode succeeded");
  return FormatError::Kind::Io;
}

std::string error_text(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("golden 24-byte container") {
  const std::vector<std::uint32_t> dims{2, 2};
  const std::vector<float> values{1, 2, 3, 4};
  CHECK(encode_tensor(dims, values) == kGolden);

  oracle::TempDir dir("io");
  write_tensor(dir / "t.ezt", dims, values);
  CHECK(file_bytes(dir / "t.ezt") == kGolden);

  const TensorData back = decode_tensor(kGolden);
  CHECK(back.dims == dims);
  CHECK(back.values == values);
}

TEST_CASE("smallest container is 16 bytes") {
  const std::vector<std::uint32_t> dims{1};
  const std::vector<float> values{0.0f};
  CHECK(encode_tensor(dims, values).size() == 16);
}

TEST_CASE("round trip is bit-exact") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint32_t> bits;
  oracle::TempDir dir("io");
  for (std::uint32_t rank = 1; rank <= 4; ++rank) {
    std::vector<std::uint32_t> dims;
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      dims.push_back(1 + bits(rng) % 5);
      count *= dims.back();
    }
    std::vector<float> values;
    while (values.size() < count) {
      const float f = std::bit_cast<float>(bits(rng));
      if (std::isfinite(f)) values.push_back(f);
    }
    values[0] = -0.0f;
    write_tensor(dir / "r.ezt", dims, values);
    const TensorData back = read_tensor(dir / "r.ezt");
    CHECK(back.dims == dims);
    REQUIRE(back.values.size() == values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      CHECK(std::bit_cast<std::uint32_t>(back.values[k]) == std::bit_cast<std::uint32_t>(values[k]));
    }
  }
}

TEST_CASE("decode errors") {
  std::vector<std::uint8_t> bad = kGolden;
  bad[3] = '0';
  CHECK(decode_error(bad) == FormatError::Kind::BadMagic);
  CHECK(error_text([&] { decode_tensor(bad); }).find("bad magic") != std::string::npos);

  std::vector<std::uint8_t> truncated(kGolden.begin(), kGolden.end() - 2);
  CHECK(decode_error(truncated) == FormatError::Kind::LengthMismatch);
  CHECK(error_text([&] { decode_tensor(truncated); }).find("length mismatch") != std::string::npos);

  std::vector<std::uint8_t> longer = kGolden;
  longer.push_back(0);
  CHECK(decode_error(longer) == FormatError::Kind::LengthMismatch);

  std::vector<std::uint8_t> rank0 = kGolden;
  rank0[4] = 0;
  CHECK(decode_error(rank0) == FormatError::Kind::BadRank);
  std::vector<std::uint8_t> rank5 = kGolden;
  rank5[4] = 5;
  CHECK(decode_error(rank5) == FormatError::Kind::BadRank);

  std::vector<std::uint8_t> nan = kGolden;
  nan[18] = 0xC0;
  nan[19] = 0x7F;
  CHECK(decode_error(nan) == FormatError::Kind::NonFinite);

  CHECK(decode_error({0x45, 0x5A}) == FormatError::Kind::LengthMismatch);

  oracle::TempDir dir("io");
  put_bytes(dir / "bad.ezt", bad);
  CHECK_THROWS_AS(read_tensor(dir / "bad.ezt"), FormatError);
  CHECK_THROWS_AS(read_tensor(dir / "absent.ezt"), FormatError);
}

TEST_CASE("encode rejects inconsistent input") {
  const std::vector<std::uint32_t> dims{2, 3};
  CHECK_THROWS(encode_tensor(dims, std::vector<float>(5)));
  const std::vector<float> inf{std::numeric_limits<float>::infinity()};
  CHECK_THROWS(encode_tensor(std::vector<std::uint32_t>{1}, inf));
  CHECK_THROWS(encode_tensor(std::vector<std::uint32_t>{1, 1, 1, 1, 1}, std::vector<float>(1)));
}

TEST_CASE("feature maps need rank 4") {
  const TensorData t{{1, 2, 2, 2}, std::vector<float>(8, 1.5f)};
  const FeatureMapBatch maps = to_feature_maps(t);
  CHECK(maps.channels() == 2);
  CHECK(maps.slice(0, 1)(1, 1) == 1.5);
  CHECK_THROWS_AS(to_feature_maps(TensorData{{2, 2}, std::vector<float>(4)}), FormatError);
}

TEST_CASE("manifest round trip and validation") {
  oracle::TempDir dir("manifest");
  write_tensor(dir / "a.ezt", std::vector<std::uint32_t>{1, 2, 4, 4}, std::vector<float>(32, 1.0f));
  const std::vector<ManifestEntry> entries{{"conv1", "a.ezt", {1, 2, 4, 4}, "features.0"}};
  write_manifest(dir.path(), entries);
  CHECK(read_manifest(dir.path()) == entries);

  const std::vector<ManifestEntry> wrong{{"conv1", "a.ezt", {1, 2, 4, 5}, ""}};
  write_manifest(dir.path(), wrong);
  CHECK_THROWS_AS(read_manifest(dir.path()), FormatError);

  const std::vector<ManifestEntry> absent{{"conv1", "zzz.ezt", {1, 2, 4, 4}, ""}};
  write_manifest(dir.path(), absent);
  CHECK_THROWS_AS(read_manifest(dir.path()), FormatError);

  const std::vector<ManifestEntry> dup{entries[0], entries[0]};
  write_manifest(dir.path(), dup);
  CHECK_THROWS_AS(read_manifest(dir.path()), FormatError);

  oracle::TempDir empty("manifest");
  try {
    read_manifest(empty.path());
    FAIL("missing manifest accepted");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Io);
  }
}

TEST_CASE("scores document round trip is canonical and exact") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LayerImportance a;
  a.layer = "conv1";
  a.metric = Metric::Energy;
  a.beta = 0.25;
  a.batch = 16;
  for (int j = 0; j < 7; ++j) a.scores.push_back(u(rng));
  a.scores.push_back(0.1);
  a.scores.push_back(1.0 / 3.0);
  a.order = sort_channels(a.scores);
  LayerImportance b = a;
  b.layer = "conv2";
  b.metric = Metric::Rank;
  b.scores = {3.0, 8.0, 8.0};
  b.order = sort_channels(b.scores);

  const std::vector<LayerImportance> layers{a, b};
  const std::string text = scores_to_json(layers);
  const auto back = scores_from_json(text);
  CHECK(back == layers);
  CHECK(scores_to_json(back) == text);
  CHECK(text.back() == '\n');
  CHECK(text.find("\"batch\"") < text.find("\"beta\""));  // sorted keys
}

TEST_CASE("scores document errors name the field") {
  const std::string good =
      R"({"format":"ezcrop-scores","version":1,"layers":[{"layer":"c","metric":"energy","beta":0.25,"batch":1,"scores":[0.5,0.2],"order":[1,2]}]})";
  CHECK_NOTHROW(scores_from_json(good));

  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK(error_text([&] { scores_from_json(replaced("\"batch\":1", "\"batch\":1,\"extra\":2")); })
            .find("scores.layers[0].extra") != std::string::npos);
  CHECK(error_text([&] { scores_from_json(replaced("[1,2]", "[2,1]")); }).find("order") != std::string::npos);
  CHECK(error_text([&] { scores_from_json(replaced("[1,2]", "[1,3]")); }).find("index out of range") != std::string::npos);
  CHECK(error_text([&] { scores_from_json(replaced("\"energy\"", "\"l1\"")); }).find("metric") != std::string::npos);
  CHECK(error_text([&] { scores_from_json(replaced("ezcrop-scores", "ezcrop-plan")); }).find("format") != std::string::npos);
  CHECK_THROWS_AS(scores_from_json("{not json"), FormatError);
}

TEST_CASE("plan document round trip and errors") {
  const PrunePlan plan{{PlanEntry{"conv1", 6, {1, 3, 5}}, PlanEntry{"conv2", 4, {4}}}};
  const std::string text = plan_to_json(plan);
  CHECK(plan_from_json(text) == plan);
  CHECK(plan_to_json(plan_from_json(text)) == text);

  const std::string unsorted = R"({"format":"ezcrop-plan","version":1,"layers":[{"layer":"c","channels":4,"keep":[2,1]}]})";
  CHECK(error_text([&] { plan_from_json(unsorted); }).find("keep not ascending") != std::string::npos);
  const std::string beyond = R"({"format":"ezcrop-plan","version":1,"layers":[{"layer":"c","channels":4,"keep":[1,5]}]})";
  CHECK(error_text([&] { plan_from_json(beyond); }).find("index out of range") != std::string::npos);
  const std::string zero = R"({"format":"ezcrop-plan","version":1,"layers":[{"layer":"c","channels":4,"keep":[0]}]})";
  CHECK_THROWS_AS(plan_from_json(zero), FormatError);
}

TEST_CASE("file helpers") {
  oracle::TempDir dir("text");
  write_text(dir / "x.txt", "hello\n");
  CHECK(read_text(dir / "x.txt") == "hello\n");
  write_text(dir / "x.txt", "again\n");
  CHECK(read_text(dir / "x.txt") == "again\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);

  const PrunePlan plan{{PlanEntry{"c", 2, {2}}}};
  write_plan(dir / "p.json", plan);
  CHECK(read_plan(dir / "p.json") == plan);
}
