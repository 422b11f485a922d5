#include "commands.hpp"
#include "ddcrf/oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ddcrf;
using nlohmann::json;

namespace {

const std::filesystem::path kData = DDCRF_TEST_DATA;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ddcrf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ddcrf_cli_test_" + name);
}

json strip_timings(json report) {
  report.erase("timings_ms");
  return report;
}

}  // namespace

TEST_CASE("parse_size") {
  CHECK(cli::parse_size("4x4") == cli::Size{4, 4});
  CHECK(cli::parse_size("3X7") == cli::Size{3, 7});
  CHECK_THROWS_AS(cli::parse_size("4"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_size("4x"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_size("0x3"), std::invalid_argument);
  CHECK_THROWS_AS(cli::parse_size("4x4x"), std::invalid_argument);
}

TEST_CASE("solve on a generated instance reports a non-increasing dual") {
  const auto r = run({"solve", "--seed", "0", "--size", "4x4", "--labels", "3", "--mode", "smoothed", "--gamma", "1",
                      "--iters", "50"});
  REQUIRE(r.code == 0);
  const auto report = json::parse(r.out);
  const auto trace = report["dual_trace"].get<std::vector<double>>();
  CHECK(trace.size() == report["iterations"].get<std::size_t>());
  CHECK(report["agreement_trace"].size() == trace.size());
  double prev = report["initial_dual"].get<double>();
  for (double d : trace) {
    CHECK(d <= prev + 1e-9 * std::max(1.0, std::abs(prev)));
    prev = d;
  }
  CHECK(report["config"]["mode"] == "smoothed");
  for (const char* phase : {"load", "decompose", "solve", "write", "total"}) CHECK(report["timings_ms"].contains(phase));

  // The gap can be recomputed from the labeling and the instance.
  GridSpec g = test::grid(4, 4, 3);
  const auto p = generate_random(0, g);
  const double e = energy(p, report["labeling"].get<Labeling>());
  CHECK(report["duality_gap"].get<double>() ==
        doctest::Approx(report["dual_bound"].get<double>() - e).epsilon(1e-12));
}

TEST_CASE("solve reports are deterministic apart from timings") {
  const std::vector<std::string> args{"solve", "--seed", "3", "--size", "5x4", "--labels", "3", "--iters", "30"};
  const auto a = run(args);
  auto with_workers = args;
  with_workers.insert(with_workers.end(), {"--workers", "3"});
  const auto b = run(with_workers);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  auto ja = strip_timings(json::parse(a.out));
  auto jb = strip_timings(json::parse(b.out));
  ja["config"].erase("workers");
  jb["config"].erase("workers");
  CHECK(ja == jb);
}

TEST_CASE("DDCRF_WORKERS sets the default worker count") {
  ::setenv("DDCRF_WORKERS", "3", 1);
  const auto r = run({"solve", "--seed", "1", "--size", "3x3", "--labels", "2", "--iters", "5"});
  ::unsetenv("DDCRF_WORKERS");
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["config"]["workers"] == 3);
}

TEST_CASE("solve on the tree fixture converges with zero gap") {
  const auto report_path = temp("tree_report.json");
  const auto image = temp("tree.pgm");
  const auto r = run({"solve", "--problem", (kData / "tree.json").string(), "--report", report_path.string(),
                      "--label-image", image.string(), "--require-converged"});
  CHECK(r.code == 0);
  std::ifstream in(report_path);
  const auto report = json::parse(in);
  CHECK(report["converged"] == true);
  CHECK(report["duality_gap"].get<double>() == 0.0);
  const auto p = load_problem(kData / "tree.json");
  CHECK(report["primal_energy"].get<double>() == brute_force_map(p).energy);
  CHECK(std::filesystem::file_size(image) == std::string("P5\n6 1\n255\n").size() + 6);
  std::filesystem::remove(report_path);
  std::filesystem::remove(image);
}

TEST_CASE("solve on the frustrated fixture does not converge") {
  const auto path = (kData / "frustrated.json").string();
  const auto r = run({"solve", "--problem", path, "--require-converged"});
  CHECK(r.code == 2);
  const auto report = json::parse(r.out);
  CHECK(report["converged"] == false);
  CHECK(report["duality_gap"].get<double>() > 0);
  CHECK(report["dual_bound"].get<double>() >= brute_force_map(load_problem(path)).energy - 1e-9);
  CHECK(run({"solve", "--problem", path}).code == 0);
}

TEST_CASE("f32 solve") {
  const auto r = run({"solve", "--problem", (kData / "tree.json").string(), "--f32", "--require-converged"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["config"]["scalar"] == "f32");
}

TEST_CASE("I/O and usage errors exit 1") {
  CHECK(run({"solve", "--problem", temp("missing.json").string()}).code == 1);
  CHECK(run({"solve", "--size", "4by4"}).code == 1);
  CHECK(run({"solve", "--mode", "fuzzy"}).code == 1);
  CHECK(run({"solve", "--size", "4x4", "--strides", "1,5"}).code == 1);
  CHECK(run({"solve", "--mode", "smoothed", "--gamma", "0"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"solve", "--report", "/nonexistent_dir/x.json", "--size", "3x3"}).code == 1);
  CHECK(run({"--help"}).code == 0);

  const auto bad = temp("bad.json");
  std::ofstream(bad) << R"({"version": 1, "height": 2})";
  const auto r = run({"solve", "--problem", bad.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("width") != std::string::npos);
  std::filesystem::remove(bad);
}

TEST_CASE("gradcheck") {
  SUBCASE("default matrix passes") {
    const auto r = run({"gradcheck"});
    CHECK(r.code == 0);
    CHECK(r.out.find("all cases under tolerance") != std::string::npos);
  }
  SUBCASE("max mode on tie-free instances") {
    CHECK(run({"gradcheck", "--mode", "max", "--tolerance", "1e-4"}).code == 0);
  }
  SUBCASE("coarse step is reported honestly") {
    const auto strict = run({"gradcheck", "--h", "1e-1"});
    CHECK(strict.code == 3);
    CHECK(strict.out.find("NO") != std::string::npos);
    const auto info = run({"gradcheck", "--h", "1e-1", "--informational"});
    CHECK(info.code == 0);
    CHECK(info.out.find("NO") != std::string::npos);
  }
  SUBCASE("report contents") {
    cli::GradcheckOptions opts;
    opts.iterations = {2};
    opts.gammas = {1.0};
    opts.sizes = {{2, 3}, {4, 4}};
    opts.labels = {3};
    const auto r = cli::run_gradcheck(opts);
    REQUIRE(r.cases.size() == 2);
    CHECK(r.passed);
    for (const auto& c : r.cases) CHECK(c.report.max_rel_error < 1e-4);
  }
}

TEST_CASE("oracle") {
  SUBCASE("batch of random 3x3, L = 2") {
    const auto r = run({"oracle", "--count", "50", "--size", "3x3", "--labels", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("violations=0") != std::string::npos);
  }
  SUBCASE("tree instance") {
    const auto r = run({"oracle", "--problem", (kData / "tree.json").string()});
    CHECK(r.code == 0);
    const auto report = json::parse(r.out.substr(0, r.out.rfind("instances=")));
    CHECK(report["instances"][0]["primal_energy"] == report["instances"][0]["oracle_map"]);
  }
  SUBCASE("too large") {
    const auto r = run({"oracle", "--size", "5x5", "--labels", "2"});
    CHECK(r.code == 1);
    CHECK(r.err.find("enumeration bound") != std::string::npos);
  }
}

TEST_CASE("bench") {
  cli::BenchOptions opts;
  opts.chain_lengths = {32, 64, 128};
  opts.repeats = 3;
  opts.grid_sizes = {8};
  opts.workers = {1, 3};
  opts.iterations = 2;
  const auto r = cli::run_bench(opts);
  CHECK(r.chain_ns.size() == 3);
  CHECK(r.grid_rows.size() == 2);
  CHECK(r.deterministic);
  const auto plot = temp("plot.txt");
  const auto out = run({"bench", "--lengths", "16,32", "--repeats", "2", "--grid-sizes", "6", "--workers", "1,2",
                        "--plot", plot.string()});
  CHECK(out.code == 0);
  std::ifstream in(plot);
  std::string header, line;
  std::getline(in, header);
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    long n = 0;
    double ns = 0;
    CHECK(static_cast<bool>(fields >> n >> ns));
    ++rows;
  }
  CHECK(rows == 2);
  std::filesystem::remove(plot);
}

TEST_CASE("generate writes loadable files in both encodings") {
  for (const char* ext : {".json", ".ddcr"}) {
    const auto path = temp(std::string("gen") + ext);
    const auto r = run({"generate", "--seed", "5", "--size", "3x4", "--labels", "3", "--out", path.string()});
    REQUIRE(r.code == 0);
    const auto p = load_problem(path);
    CHECK(p.unary == generate_random(5, test::grid(3, 4, 3)).unary);
    std::filesystem::remove(path);
  }
  const auto path = temp("gen32.bin");
  CHECK(run({"generate", "--size", "3x3", "--scalar", "f32", "--out", path.string()}).code == 0);
  CHECK(load_problem_file(path).scalar == ScalarWidth::f32);
  std::filesystem::remove(path);
}
