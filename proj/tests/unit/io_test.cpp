#include "ddcrf/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ddcrf;
using test::grid;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ddcrf_io_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool identical(const Potentials<double>& a, const Potentials<double>& b) {
  if (!(a.grid == b.grid) || a.pairwise_mode != b.pairwise_mode || a.unary != b.unary) return false;
  if (a.pairwise.size() != b.pairwise.size()) return false;
  for (std::size_t k = 0; k < a.pairwise.size(); ++k)
    if (a.pairwise[k] != b.pairwise[k]) return false;
  return true;
}

const char* kMinimal = R"({
  "version": 1, "height": 1, "width": 2, "labels": 2, "strides": [1],
  "pairwise_mode": "tied",
  "unary": [0, 1, 0, 0],
  "pairwise": {"h1": [0, 0, 0, 2], "v1": [0, 0, 0, 0]}
})";

}  // namespace

TEST_CASE("minimal text file") {
  const auto file = decode_text(kMinimal);
  CHECK(file.scalar == ScalarWidth::f64);
  CHECK(energy(file.potentials, {1, 1}) == 3.0);
  CHECK(identical(file.potentials, test::two_node_potentials()));
}

TEST_CASE("text errors name the field") {
  SUBCASE("unary length") {
    std::string text = kMinimal;
    text.replace(text.find("[0, 1, 0, 0]"), 12, "[0, 1, 0]");
    try {
      decode_text(text);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      REQUIRE(e.violations().size() == 1);
      CHECK(e.violations()[0].field == "unary");
    }
  }
  SUBCASE("missing field") {
    std::string text = kMinimal;
    text.replace(text.find("\"labels\""), 8, "\"label\"");
    try {
      decode_text(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.where() == "labels");
    }
  }
  SUBCASE("bad entry") {
    std::string text = kMinimal;
    text.replace(text.find("[0, 0, 0, 2]"), 12, "[0, 0, \"x\", 2]");
    try {
      decode_text(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.where() == "pairwise.h1[2]");
    }
  }
  SUBCASE("unsupported version") {
    std::string text = kMinimal;
    text.replace(text.find("\"version\": 1"), 12, "\"version\": 7");
    CHECK_THROWS_AS(decode_text(text), ParseError);
  }
  SUBCASE("syntax errors carry a byte offset") {
    try {
      decode_text("{\"version\": 1,, }");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.where().rfind("byte ", 0) == 0);
    }
  }
  SUBCASE("non-finite values and bad strides are validation errors") {
    std::string text = kMinimal;
    text.replace(text.find("\"strides\": [1]"), 14, "\"strides\": [3]");
    CHECK_THROWS_AS(decode_text(text), ValidationError);
  }
}

TEST_CASE("binary round trip is bit-exact") {
  for (auto mode : {PairwiseMode::tied, PairwiseMode::dense}) {
    RandomSpec spec;
    spec.pairwise = mode;
    ProblemFile file{generate_random(42, grid(4, 5, 3), spec), ScalarWidth::f64};
    const auto bytes = encode_binary(file);
    CHECK(bytes.substr(0, 4) == "DDCR");
    const auto back = decode_binary(bytes);
    CHECK(identical(back.potentials, file.potentials));
    CHECK(encode_binary(back) == bytes);

    const auto path = temp_path(mode == PairwiseMode::tied ? "tied.ddcr" : "dense.bin");
    save_problem(path, file);
    CHECK(slurp(path) == bytes);
    CHECK(identical(load_problem(path), file.potentials));
    std::filesystem::remove(path);
  }
}

TEST_CASE("binary header layout") {
  ProblemFile file{test::two_node_potentials(), ScalarWidth::f64};
  const auto bytes = encode_binary(file);
  // magic, version, M, N, L, count, stride, mode, width = 4 + 8 * 4 bytes
  CHECK(bytes.size() == 4 + 8 * 4 + (4 + 2 * 4) * 8);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 2);
}

TEST_CASE("f32 files") {
  ProblemFile file{generate_random(5, grid(3, 3, 2)), ScalarWidth::f32};
  const auto bin = decode_binary(encode_binary(file));
  CHECK(bin.scalar == ScalarWidth::f32);
  CHECK((bin.potentials.unary - file.potentials.unary).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(encode_binary(bin) == encode_binary(file));
  const auto text = decode_text(encode_text(file));
  CHECK(text.scalar == ScalarWidth::f32);
  CHECK(identical(text.potentials, bin.potentials));
}

TEST_CASE("binary errors report byte offsets") {
  ProblemFile file{generate_random(1, grid(3, 3, 2)), ScalarWidth::f64};
  const auto bytes = encode_binary(file);
  SUBCASE("bad magic") {
    CHECK_THROWS_AS(decode_binary("XXXX" + bytes.substr(4)), ParseError);
  }
  SUBCASE("bad version") {
    auto b = bytes;
    b[4] = 2;
    try {
      decode_binary(b);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.where() == "byte 4");
    }
  }
  SUBCASE("truncated") {
    try {
      decode_binary(bytes.substr(0, bytes.size() - 3));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.where().rfind("byte ", 0) == 0);
    }
  }
  SUBCASE("trailing bytes") {
    CHECK_THROWS_AS(decode_binary(bytes + "z"), ParseError);
  }
  SUBCASE("header cut short") {
    CHECK_THROWS_AS(decode_binary(bytes.substr(0, 10)), ParseError);
  }
}

TEST_CASE("text round trip is structurally identical") {
  for (auto mode : {PairwiseMode::tied, PairwiseMode::dense}) {
    RandomSpec spec;
    spec.pairwise = mode;
    ProblemFile file{generate_random(8, grid(3, 4, 2), spec), ScalarWidth::f64};
    const auto text = encode_text(file);
    const auto back = decode_text(text);
    CHECK(identical(back.potentials, file.potentials));
    CHECK(nlohmann::json::parse(encode_text(back)) == nlohmann::json::parse(text));
  }
}

TEST_CASE("load_problem on a missing file") {
  CHECK_THROWS_AS(load_problem(temp_path("does_not_exist.json")), std::runtime_error);
}

TEST_CASE("SplitMix64 reference values") {
  // First outputs for seed 0 (reference implementation by Vigna).
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng.next() == 0x06C45D188009454FULL);
  SplitMix64 u(1);
  for (int k = 0; k < 1000; ++k) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("generate_random") {
  const auto g = grid(4, 4, 3);
  CHECK(identical(generate_random(0, g), generate_random(0, g)));
  CHECK_FALSE(identical(generate_random(0, g), generate_random(1, g)));
  const auto potts = generate_random(0, g, parse_distribution("potts:2,-1"));
  CHECK(potts.pairwise_mode == PairwiseMode::tied);
  CHECK(potts.pairwise[0](1, 1) == 2.0);
  CHECK(potts.pairwise[3](0, 2) == -1.0);
  const auto scaled = generate_random(0, g, parse_distribution("normal:3"));
  CHECK((scaled.unary - 3 * generate_random(0, g).unary).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(validate_potentials(generate_random(5, grid(2, 7, 4, {1, 3}))).empty());
}

TEST_CASE("parse_distribution") {
  CHECK(parse_distribution("normal").kind == RandomSpec::Kind::normal);
  CHECK(parse_distribution("normal:0.5").scale == 0.5);
  const auto p = parse_distribution("potts:2");
  CHECK(p.kind == RandomSpec::Kind::potts);
  CHECK(p.attract == 2.0);
  CHECK(p.repel == 0.0);
  CHECK(parse_distribution("potts:-1,0.5").repel == 0.5);
  CHECK_THROWS_AS(parse_distribution("gauss"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distribution("normal:abc"), std::invalid_argument);
}

TEST_CASE("label image") {
  const auto path = temp_path("labels.pgm");
  write_label_image(path, grid(2, 3, 3), {0, 1, 2, 2, 1, 0});
  const auto bytes = slurp(path);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(bytes.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 0]) == 0);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 1]) == 127);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 2]) == 255);
  CHECK_THROWS_AS(write_label_image(path, grid(2, 3, 3), {0, 1}), std::invalid_argument);
  std::filesystem::remove(path);
}
