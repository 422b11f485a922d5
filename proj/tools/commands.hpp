#pragma once

#include "ddcrf/autodiff.hpp"
#include "ddcrf/io.hpp"
#include "ddcrf/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ddcrf::cli {

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,  // also usage errors and oracle guard hits
  kNotConverged = 2,
  kGradcheckFailed = 3,
  kInvariantViolation = 4,
};

using Size = std::pair<Index, Index>;

// "4x4" -> {4, 4}; throws std::invalid_argument.
Size parse_size(const std::string& text);

// Either --problem or the generator flags.
struct InstanceOptions {
  std::string problem;
  std::uint64_t seed = 0;
  Size size{4, 4};
  int labels = 3;
  std::vector<int> strides{1, 2};
  std::string dist = "normal";
  PairwiseMode pairwise = PairwiseMode::tied;

  GridSpec grid() const;
  Potentials<double> make() const;
  nlohmann::json describe() const;
};

struct SolveOptions {
  InstanceOptions instance;
  SolveConfig config;
  bool f32 = false;
  std::string report;       // JSON report path; stdout when empty
  std::string label_image;  // PGM path
  bool require_converged = false;
};

int cmd_solve(const SolveOptions& opts, std::ostream& out, std::ostream& err);

struct GradcheckOptions {
  std::vector<int> iterations{0, 1, 5};
  std::vector<double> gammas{0.5, 1.0, 2.0};
  std::vector<Size> sizes{{3, 3}};
  std::vector<int> labels{2};
  std::vector<int> strides{1, 2};
  Mode mode = Mode::smoothed;
  double tolerance = 1e-4;
  double h = 1e-5;
  std::uint64_t seed = 0;
  bool informational = false;  // report errors but always exit 0
  int workers = 1;
};

struct GradcheckCase {
  Size size;
  int labels = 0;
  int iterations = 0;
  double gamma = 0;
  std::uint64_t seed = 0;   // instance actually used (max mode skips near-tied seeds)
  double tie_margin = 0;    // smallest gap between best and runner-up in any DP max
  FiniteDiffReport report;
  std::string entry;        // parameter name of the worst entry
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  bool passed = true;
};

GradcheckReport run_gradcheck(const GradcheckOptions& opts);
int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out);

struct OracleOptions {
  InstanceOptions instance;
  int count = 1;  // instances use seeds seed, seed + 1, ...
  SolveConfig config;
  std::string report;
};

int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& err);

struct BenchOptions {
  std::vector<Index> chain_lengths{64, 128, 256, 512, 1024};
  int labels = 8;
  Mode mode = Mode::smoothed;
  int repeats = 15;
  std::vector<Index> grid_sizes{32, 64};
  int iterations = 3;
  std::vector<int> workers{1, 2, 4};
  std::uint64_t seed = 0;
  std::string plot;  // two-column "length nanoseconds" file
};

struct BenchReport {
  std::vector<std::pair<Index, double>> chain_ns;  // length, best-of-repeats ns per forward pass
  double exponent = 0;                             // least-squares slope of log ns vs log length
  struct GridRow {
    Index size;
    int workers;
    double ms_per_iteration;
    bool identical;  // bitwise equal to the single-worker run
  };
  std::vector<GridRow> grid_rows;
  bool deterministic = true;
};

BenchReport run_bench(const BenchOptions& opts);
int cmd_bench(const BenchOptions& opts, std::ostream& out);

struct GenerateOptions {
  InstanceOptions instance;
  ScalarWidth scalar = ScalarWidth::f64;
  std::string out;
};

int cmd_generate(const GenerateOptions& opts, std::ostream& out);

// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ddcrf::cli
