#include "commands.hpp"

#include "ddcrf/oracle.hpp"
#include "ddcrf/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

namespace ddcrf::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<int> usable_strides(const std::vector<int>& strides, Size size) {
  std::vector<int> out;
  for (int s : strides)
    if (s < std::max(size.first, size.second)) out.push_back(s);
  return out;
}

void write_json(const json& doc, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << doc.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << doc.dump(2) << "\n";
  if (!f) throw std::runtime_error("write failed for " + path);
}

// Slack used by every monotonicity and bound check.
bool increased(double after, double before) { return after > before + 1e-9 * std::max(1.0, std::abs(before)); }

}  // namespace

Size parse_size(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    const auto h = std::stoll(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    const std::string rest = text.substr(x + 1);
    const auto w = std::stoll(rest, &used);
    if (used != rest.size() || h < 1 || w < 1) throw std::invalid_argument("");
    return {static_cast<Index>(h), static_cast<Index>(w)};
  } catch (const std::exception&) {
    throw std::invalid_argument("bad size '" + text + "' (expected MxN)");
  }
}

GridSpec InstanceOptions::grid() const {
  GridSpec g;
  g.height = size.first;
  g.width = size.second;
  g.num_labels = labels;
  g.strides = strides;
  return g;
}

Potentials<double> InstanceOptions::make() const {
  if (!problem.empty()) return load_problem(problem);
  RandomSpec spec = parse_distribution(dist);
  spec.pairwise = pairwise;
  const GridSpec g = grid();
  if (auto v = validate_grid(g); !v.empty()) throw ValidationError(std::move(v));
  return generate_random(seed, g, spec);
}

json InstanceOptions::describe() const {
  if (!problem.empty()) return {{"problem", problem}};
  return {{"seed", seed},
          {"size", std::to_string(size.first) + "x" + std::to_string(size.second)},
          {"labels", labels},
          {"strides", strides},
          {"dist", dist},
          {"pairwise", pairwise == PairwiseMode::tied ? "tied" : "dense"}};
}

// ---- solve ----------------------------------------------------------------

namespace {

json config_json(const SolveConfig& c) {
  return {{"mode", std::string(to_string(c.mode))},
          {"gamma", c.gamma},
          {"max_iters", c.max_iters},
          {"dual_tol", c.dual_tol},
          {"workers", c.workers}};
}

template <typename Scalar>
std::vector<double> widen(const std::vector<Scalar>& v) {
  return {v.begin(), v.end()};
}

template <typename Scalar>
int solve_as(const SolveOptions& opts, const Potentials<double>& p64, json& report, std::ostream& err) {
  auto start = Clock::now();
  Potentials<Scalar> p;
  p.grid = p64.grid;
  p.pairwise_mode = p64.pairwise_mode;
  p.unary = p64.unary.cast<Scalar>();
  for (const auto& t : p64.pairwise) p.pairwise.push_back(t.cast<Scalar>());
  const auto problem = Problem<Scalar>::create(std::move(p));
  report["timings_ms"]["decompose"] = ms_since(start);

  start = Clock::now();
  const auto r = solve(problem, opts.config);
  report["timings_ms"]["solve"] = ms_since(start);

  report["iterations"] = r.iterations;
  report["converged"] = r.converged;
  report["stop_reason"] = std::string(to_string(r.stop_reason));
  report["initial_dual"] = static_cast<double>(r.initial_dual);
  report["dual_trace"] = widen(r.dual_trace);
  report["agreement_trace"] = r.agreement_trace;
  report["labeling"] = r.labeling;
  report["primal_energy"] = static_cast<double>(r.primal_energy);
  report["dual_bound"] = static_cast<double>(r.dual_bound);
  report["duality_gap"] = static_cast<double>(r.duality_gap);
  report["objective"] = static_cast<double>(r.objective);

  // The dual never increases; a violation is a bug, not a property of the input.
  double prev = static_cast<double>(r.initial_dual);
  for (std::size_t k = 0; k < r.dual_trace.size(); ++k) {
    const double d = static_cast<double>(r.dual_trace[k]);
    // f32 accumulates rounding on the order of its epsilon per chain.
    const double slack = std::is_same_v<Scalar, float> ? 1e-5 * std::max(1.0, std::abs(prev)) : 0.0;
    if (increased(d - slack, prev)) {
      err << "invariant violation: dual increased at step " << k + 1 << " (" << prev << " -> " << d << ")\n";
      report["invariant_violation"] = "dual increased at step " + std::to_string(k + 1);
      return kInvariantViolation;
    }
    prev = d;
  }
  return kOk;
}

}  // namespace

int cmd_solve(const SolveOptions& opts, std::ostream& out, std::ostream& err) {
  opts.config.validate();
  const auto total = Clock::now();
  json report;
  report["config"] = config_json(opts.config);
  report["config"]["instance"] = opts.instance.describe();
  report["config"]["scalar"] = opts.f32 ? "f32" : "f64";

  auto start = Clock::now();
  const Potentials<double> p = opts.instance.make();
  report["timings_ms"]["load"] = ms_since(start);
  report["grid"] = {{"height", p.grid.height}, {"width", p.grid.width}, {"labels", p.grid.num_labels},
                    {"strides", p.grid.strides}};

  int code = opts.f32 ? solve_as<float>(opts, p, report, err) : solve_as<double>(opts, p, report, err);

  start = Clock::now();
  if (!opts.label_image.empty()) write_label_image(opts.label_image, p.grid, report["labeling"].get<Labeling>());
  report["timings_ms"]["write"] = ms_since(start);
  report["timings_ms"]["total"] = ms_since(total);
  write_json(report, opts.report, out);
  if (!opts.report.empty())
    out << "converged=" << report["converged"] << " iterations=" << report["iterations"]
        << " primal=" << report["primal_energy"] << " dual=" << report["dual_bound"]
        << " gap=" << report["duality_gap"] << "\n";

  if (code == kOk && opts.require_converged && !report["converged"].get<bool>()) code = kNotConverged;
  return code;
}

// ---- gradcheck ------------------------------------------------------------

namespace {

Table<double> pack(const Table<double>& unary, const std::vector<Table<double>>& pairwise) {
  const Index L = unary.cols();
  Table<double> out(unary.rows() + static_cast<Index>(pairwise.size()) * L, L);
  out.topRows(unary.rows()) = unary;
  for (std::size_t k = 0; k < pairwise.size(); ++k) out.middleRows(unary.rows() + static_cast<Index>(k) * L, L) = pairwise[k];
  return out;
}

Potentials<double> unpack(const Potentials<double>& like, const Table<double>& t) {
  Potentials<double> p = like;
  const Index V = p.unary.rows();
  const Index L = p.unary.cols();
  p.unary = t.topRows(V);
  for (std::size_t k = 0; k < p.pairwise.size(); ++k) p.pairwise[k] = t.middleRows(V + static_cast<Index>(k) * L, L);
  return p;
}

std::string entry_name(const Potentials<double>& p, Index row, Index col) {
  const Index V = p.unary.rows();
  const Index L = p.unary.cols();
  std::ostringstream s;
  if (row < V) {
    s << "unary[" << row << "][" << col << "]";
  } else {
    const Index k = (row - V) / L;
    const Index a = (row - V) % L;
    if (p.pairwise_mode == PairwiseMode::tied)
      s << "pairwise." << slot_name(p.grid, static_cast<int>(k)) << "[" << a << "][" << col << "]";
    else
      s << "pairwise[" << k << "][" << a << "][" << col << "]";
  }
  return s.str();
}

double runner_up_gap(const Vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::infinity();
  double best = -std::numeric_limits<double>::infinity(), second = best;
  for (Index k = 0; k < v.size(); ++k) {
    if (v(k) > best) {
      second = best;
      best = v(k);
    } else if (v(k) > second) {
      second = v(k);
    }
  }
  return best - second;
}

// Smallest best-vs-runner-up gap over every max taken by the DP passes of
// an unrolled forward run. Max-mode gradients are only defined where this
// is comfortably larger than the finite-difference step.
double tie_margin(const UnrolledTape<double>& tape) {
  const Problem<double>& problem = *tape.problem;
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& psi : tape.psi_history) {
    for (Index t = 0; t < problem.num_chains(); ++t) {
      const auto slice = problem.slice(t, psi[static_cast<std::size_t>(t)], 1.0);
      const auto m = chain_marginals(slice, Mode::max);
      const Index n = slice.length();
      for (Index k = 0; k + 1 < n; ++k) {
        const Table<double>& phi = *slice.pairwise[static_cast<std::size_t>(k)];
        for (Index b = 0; b < slice.labels(); ++b)
          margin = std::min(margin, runner_up_gap(m.forward.row(k).transpose() + phi.col(b)));
        for (Index a = 0; a < slice.labels(); ++a)
          margin = std::min(margin, runner_up_gap(m.backward.row(k + 1).transpose() + phi.row(a).transpose()));
      }
    }
  }
  return margin;
}

Labeling target_for(std::uint64_t seed, Index V, int L) {
  SplitMix64 rng(seed ^ 0x5DEECE66DULL);
  Labeling x;
  for (Index i = 0; i < V; ++i) x.push_back(static_cast<Label>(rng.next() % static_cast<std::uint64_t>(L)));
  return x;
}

GradcheckCase check_case(const GradcheckOptions& opts, Size size, int labels, int K, double gamma) {
  GradcheckCase c;
  c.size = size;
  c.labels = labels;
  c.iterations = K;
  c.gamma = gamma;

  GridSpec g;
  g.height = size.first;
  g.width = size.second;
  g.num_labels = labels;
  g.strides = usable_strides(opts.strides, size);

  UnrollOptions unroll;
  unroll.workers = opts.workers;
  // Max mode needs an instance whose DP maxima are separated by much more
  // than h; walk forward from the requested seed until one is found.
  const double required_margin = opts.mode == Mode::max ? 100 * opts.h : 0.0;
  constexpr int kSeedAttempts = 200;
  std::uint64_t seed = opts.seed;
  Potentials<double> p;
  for (int attempt = 0;; ++attempt, ++seed) {
    p = generate_random(seed, g);
    if (opts.mode != Mode::max) break;
    UnrollOptions probe = unroll;
    probe.recompute = true;
    c.tie_margin = tie_margin(forward_unrolled(Problem<double>::create(p), K, Mode::max, gamma, probe).tape);
    if (c.tie_margin >= required_margin) break;
    if (attempt + 1 == kSeedAttempts) {
      c.seed = seed;
      c.entry = "no tie-free instance found";
      c.report.max_rel_error = std::numeric_limits<double>::infinity();
      return c;
    }
  }
  c.seed = seed;

  const Labeling target = target_for(seed, g.num_vertices(), labels);
  const auto loss_of = [&](const Potentials<double>& q) {
    const auto f = forward_unrolled(Problem<double>::create(q), K, opts.mode, gamma, unroll);
    return cross_entropy_loss(f.probs, target).loss;
  };
  const auto fwd = forward_unrolled(Problem<double>::create(p), K, opts.mode, gamma, unroll);
  const auto grads = backward_unrolled(fwd.tape, cross_entropy_loss(fwd.probs, target).grad_probs);
  c.report = finite_diff_check([&](const Table<double>& t) { return loss_of(unpack(p, t)); },
                               pack(p.unary, p.pairwise), pack(grads.unary, grads.pairwise), opts.h);
  c.entry = entry_name(p, c.report.worst_row, c.report.worst_col);
  c.passed = c.report.max_rel_error < opts.tolerance;
  return c;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  if (!(opts.h > 0)) throw std::invalid_argument("--h must be positive");
  GradcheckReport r;
  // gamma only matters in smoothed mode
  const std::vector<double> gammas = opts.mode == Mode::smoothed ? opts.gammas : std::vector<double>{1.0};
  for (Size size : opts.sizes)
    for (int L : opts.labels)
      for (int K : opts.iterations)
        for (double gamma : gammas) {
          r.cases.push_back(check_case(opts, size, L, K, gamma));
          r.passed = r.passed && r.cases.back().passed;
        }
  return r;
}

int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out) {
  const auto r = run_gradcheck(opts);
  out << "mode=" << to_string(opts.mode) << " h=" << opts.h << " tolerance=" << opts.tolerance
      << (opts.informational ? " (informational)" : "") << "\n";
  out << std::left << std::setw(7) << "size" << std::setw(4) << "L" << std::setw(4) << "K" << std::setw(7) << "gamma"
      << std::setw(6) << "seed" << std::setw(14) << "max_rel_err" << std::setw(6) << "ok"
      << "worst entry (analytic, numeric)\n";
  for (const auto& c : r.cases) {
    std::ostringstream size;
    size << c.size.first << "x" << c.size.second;
    out << std::setw(7) << size.str() << std::setw(4) << c.labels << std::setw(4) << c.iterations << std::setw(7)
        << (opts.mode == Mode::smoothed ? std::to_string(c.gamma).substr(0, 4) : "-") << std::setw(6) << c.seed
        << std::setw(14) << std::setprecision(3) << std::scientific << c.report.max_rel_error << std::defaultfloat
        << std::setw(6) << (c.passed ? "yes" : "NO") << c.entry << " (" << std::setprecision(10) << c.report.analytic
        << ", " << c.report.numeric << ")" << std::setprecision(6) << "\n";
  }
  out << (r.passed ? "all cases under tolerance" : "FAILED: some cases exceed the tolerance") << "\n";
  if (opts.informational) return kOk;
  return r.passed ? kOk : kGradcheckFailed;
}

// ---- oracle ---------------------------------------------------------------

int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& err) {
  opts.config.validate();
  if (opts.count < 1) throw std::invalid_argument("--count must be positive");
  json report;
  report["config"] = config_json(opts.config);
  report["config"]["instance"] = opts.instance.describe();
  report["instances"] = json::array();
  int violations = 0, converged = 0;
  const int count = opts.instance.problem.empty() ? opts.count : 1;
  for (int k = 0; k < count; ++k) {
    InstanceOptions inst = opts.instance;
    inst.seed += static_cast<std::uint64_t>(k);
    const auto p = inst.make();
    const auto map = brute_force_map(p);
    const auto r = solve(p, opts.config);

    // Every dual seen along the way bounds the MAP energy.
    bool bound_ok = !increased(map.energy, r.dual_bound) && !increased(map.energy, r.initial_dual);
    for (double d : r.dual_trace) bound_ok = bound_ok && !increased(map.energy, d);
    bool equality_ok = true;
    if (r.converged) {
      ++converged;
      equality_ok = std::abs(r.primal_energy - map.energy) <= 1e-9 * std::max(1.0, std::abs(map.energy)) &&
                    std::abs(r.dual_bound - map.energy) <= 1e-9 * std::max(1.0, std::abs(map.energy));
    }
    if (!bound_ok || !equality_ok) {
      ++violations;
      err << "invariant violation on seed " << inst.seed << ": map=" << map.energy << " dual=" << r.dual_bound
          << " primal=" << r.primal_energy << "\n";
    }
    report["instances"].push_back({{"seed", inst.seed},
                                   {"oracle_map", map.energy},
                                   {"oracle_labeling", map.labeling},
                                   {"dual_bound", r.dual_bound},
                                   {"primal_energy", r.primal_energy},
                                   {"labeling", r.labeling},
                                   {"converged", r.converged},
                                   {"iterations", r.iterations},
                                   {"bound_ok", bound_ok},
                                   {"equality_ok", equality_ok}});
  }
  report["count"] = count;
  report["converged"] = converged;
  report["violations"] = violations;
  write_json(report, opts.report, out);
  out << "instances=" << count << " converged=" << converged << " violations=" << violations << "\n";
  return violations == 0 ? kOk : kInvariantViolation;
}

// ---- bench ----------------------------------------------------------------

namespace {

bool same_state(const DualState<double>& a, const DualState<double>& b) {
  for (std::size_t t = 0; t < a.psi.size(); ++t)
    if (a.psi[t] != b.psi[t] || a.chains[t].marginals != b.chains[t].marginals) return false;
  return true;
}

}  // namespace

BenchReport run_bench(const BenchOptions& opts) {
  BenchReport r;
  SplitMix64 rng(opts.seed);
  for (Index n : opts.chain_lengths) {
    ChainProblem<double> c;
    c.unary.resize(n, opts.labels);
    for (Index i = 0; i < c.unary.size(); ++i) c.unary.data()[i] = rng.normal();
    for (Index k = 0; k + 1 < n; ++k) {
      Table<double> t(opts.labels, opts.labels);
      for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
      c.pairwise.push_back(std::move(t));
    }
    const auto slice = c.slice(1.0);
    double best = std::numeric_limits<double>::infinity();
    double sink = 0;
    for (int rep = 0; rep < std::max(1, opts.repeats); ++rep) {
      const auto start = Clock::now();
      const auto f = chain_forward(slice, opts.mode);
      best = std::min(best, std::chrono::duration<double, std::nano>(Clock::now() - start).count());
      sink += f.marginals.energy;
    }
    if (std::isnan(sink)) best = std::numeric_limits<double>::quiet_NaN();
    r.chain_ns.emplace_back(n, best);
  }
  if (r.chain_ns.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(r.chain_ns.size());
    for (auto [n, ns] : r.chain_ns) {
      const double x = std::log(static_cast<double>(n)), y = std::log(ns);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    r.exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }

  for (Index size : opts.grid_sizes) {
    GridSpec g;
    g.height = g.width = size;
    g.num_labels = opts.labels;
    const auto problem = Problem<double>::create(generate_random(opts.seed, g));
    std::optional<DualState<double>> reference;
    for (int w : opts.workers) {
      auto state = make_dual_state(problem, opts.mode, 1.0, w);
      const auto start = Clock::now();
      for (int k = 0; k < opts.iterations; ++k) state = fpi_step(state).state;
      const double ms = ms_since(start) / std::max(1, opts.iterations);
      if (!reference) reference = state;
      const bool identical = same_state(*reference, state);
      r.deterministic = r.deterministic && identical;
      r.grid_rows.push_back({size, w, ms, identical});
    }
  }
  return r;
}

int cmd_bench(const BenchOptions& opts, std::ostream& out) {
  const auto r = run_bench(opts);
  out << "chain forward pass, L=" << opts.labels << ", mode=" << to_string(opts.mode) << ", best of " << opts.repeats
      << "\n";
  out << std::left << std::setw(10) << "length" << "ns\n";
  for (auto [n, ns] : r.chain_ns) out << std::setw(10) << n << std::fixed << std::setprecision(0) << ns << "\n";
  out << std::defaultfloat << std::setprecision(4) << "power-law exponent: " << r.exponent << "\n";
  out << "\nfpi iterations on MxM grids (hardware threads: " << std::thread::hardware_concurrency() << ")\n";
  out << std::setw(8) << "M" << std::setw(9) << "workers" << std::setw(14) << "ms/iter" << std::setw(10) << "speedup"
      << "identical\n";
  double base = 0;
  for (const auto& row : r.grid_rows) {
    if (row.workers == opts.workers.front()) base = row.ms_per_iteration;
    out << std::setw(8) << row.size << std::setw(9) << row.workers << std::setw(14) << std::setprecision(4)
        << row.ms_per_iteration << std::setw(10) << std::setprecision(3) << base / row.ms_per_iteration
        << (row.identical ? "yes" : "NO") << "\n";
  }
  out << "deterministic across worker counts: " << (r.deterministic ? "yes" : "NO") << "\n";
  if (!opts.plot.empty()) {
    std::ofstream f(opts.plot);
    if (!f) throw std::runtime_error("cannot write " + opts.plot);
    f << "# length nanoseconds\n" << std::setprecision(12);
    for (auto [n, ns] : r.chain_ns) f << n << " " << ns << "\n";
  }
  return r.deterministic ? kOk : kInvariantViolation;
}

// ---- generate -------------------------------------------------------------

int cmd_generate(const GenerateOptions& opts, std::ostream& out) {
  if (opts.out.empty()) throw std::invalid_argument("--out is required");
  ProblemFile file{opts.instance.make(), opts.scalar};
  save_problem(opts.out, file);
  out << "wrote " << opts.out << "\n";
  return kOk;
}

// ---- command line ---------------------------------------------------------

namespace {

template <typename E>
void add_choice(CLI::App* app, const std::string& name, E& target, const std::map<std::string, E>& values,
                const std::string& help) {
  std::vector<std::string> names;
  for (const auto& kv : values) names.push_back(kv.first);
  app->add_option_function<std::string>(name, [&target, values](const std::string& s) { target = values.at(s); }, help)
      ->check(CLI::IsMember(names));
}

const std::map<std::string, Mode> kModes{{"max", Mode::max}, {"smoothed", Mode::smoothed}};

void add_instance_flags(CLI::App* app, InstanceOptions& inst, std::string& size) {
  app->add_option("--problem", inst.problem, "problem file (JSON text or DDCR binary)");
  app->add_option("--seed", inst.seed, "generator seed");
  app->add_option("--size", size, "grid size MxN")->capture_default_str();
  app->add_option("--labels", inst.labels, "label count")->capture_default_str();
  app->add_option("--strides", inst.strides, "edge strides")->delimiter(',')->capture_default_str();
  app->add_option("--dist", inst.dist, "normal[:scale] or potts:a[,r]")->capture_default_str();
  add_choice(app, "--pairwise", inst.pairwise, {{"tied", PairwiseMode::tied}, {"dense", PairwiseMode::dense}},
             "tied or dense");
}

void add_solver_flags(CLI::App* app, SolveConfig& cfg) {
  add_choice(app, "--mode", cfg.mode, kModes, "max or smoothed");
  app->add_option("--gamma", cfg.gamma, "smoothing strength")->capture_default_str();
  app->add_option("--iters", cfg.max_iters, "maximum fixed-point iterations")->capture_default_str();
  app->add_option("--dual-tol", cfg.dual_tol, "relative stagnation tolerance")->capture_default_str();
  app->add_option("--workers", cfg.workers, "worker threads (default: DDCRF_WORKERS or 1)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-decomposition MAP inference on grid CRFs"};
  app.require_subcommand(1);
  const int workers = default_workers();

  SolveOptions solve_opts;
  solve_opts.config.workers = workers;
  std::string solve_size = "4x4";
  auto* solve_cmd = app.add_subcommand("solve", "run the fixed-point solver and write a JSON report");
  add_instance_flags(solve_cmd, solve_opts.instance, solve_size);
  add_solver_flags(solve_cmd, solve_opts.config);
  solve_cmd->add_option("--report", solve_opts.report, "report path (stdout when omitted)");
  solve_cmd->add_option("--label-image", solve_opts.label_image, "write the labeling as a PGM image");
  solve_cmd->add_flag("--require-converged", solve_opts.require_converged, "exit 2 unless agreement is reached");
  solve_cmd->add_flag("--f32", solve_opts.f32, "solve in single precision");

  GradcheckOptions grad_opts;
  grad_opts.workers = workers;
  std::vector<std::string> grad_sizes;
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare unrolled gradients against finite differences");
  grad_cmd->set_help_flag("--help", "print this help message and exit");  // frees -h for --h
  grad_cmd->add_option("-K,--unroll", grad_opts.iterations, "unrolled step counts")->delimiter(',')->capture_default_str();
  grad_cmd->add_option("--gammas", grad_opts.gammas, "smoothing strengths")->delimiter(',')->capture_default_str();
  grad_cmd->add_option("--sizes", grad_sizes, "grid sizes, e.g. 3x3,4x4 (default 3x3)")->delimiter(',');
  grad_cmd->add_option("--labels", grad_opts.labels, "label counts")->delimiter(',')->capture_default_str();
  grad_cmd->add_option("--strides", grad_opts.strides, "edge strides")->delimiter(',')->capture_default_str();
  add_choice(grad_cmd, "--mode", grad_opts.mode, kModes, "max or smoothed");
  grad_cmd->add_option("--tolerance", grad_opts.tolerance, "maximum relative error")->capture_default_str();
  grad_cmd->add_option("--h", grad_opts.h, "central-difference step")->capture_default_str();
  grad_cmd->add_option("--seed", grad_opts.seed, "instance seed")->capture_default_str();
  grad_cmd->add_flag("--informational", grad_opts.informational, "report errors but exit 0");
  grad_cmd->add_option("--workers", grad_opts.workers, "worker threads");

  OracleOptions oracle_opts;
  oracle_opts.config.workers = workers;
  oracle_opts.instance.labels = 2;
  std::string oracle_size = "3x3";
  auto* oracle_cmd = app.add_subcommand("oracle", "check the solver against exhaustive enumeration");
  add_instance_flags(oracle_cmd, oracle_opts.instance, oracle_size);
  add_solver_flags(oracle_cmd, oracle_opts.config);
  oracle_cmd->add_option("--count", oracle_opts.count, "number of generated instances")->capture_default_str();
  oracle_cmd->add_option("--report", oracle_opts.report, "report path (stdout when omitted)");

  BenchOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "time chain passes and fixed-point iterations");
  bench_cmd->add_option("--lengths", bench_opts.chain_lengths, "chain lengths")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--labels", bench_opts.labels, "label count")->capture_default_str();
  add_choice(bench_cmd, "--mode", bench_opts.mode, kModes, "max or smoothed");
  bench_cmd->add_option("--repeats", bench_opts.repeats, "timing repeats per length")->capture_default_str();
  bench_cmd->add_option("--grid-sizes", bench_opts.grid_sizes, "M for MxM grids")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--grid-iters", bench_opts.iterations, "iterations per grid run")->capture_default_str();
  bench_cmd->add_option("--workers", bench_opts.workers, "worker counts to compare")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--seed", bench_opts.seed, "instance seed")->capture_default_str();
  bench_cmd->add_option("--plot", bench_opts.plot, "write length/nanosecond pairs here");

  GenerateOptions gen_opts;
  std::string gen_size = "4x4";
  std::string scalar = "f64";
  auto* gen_cmd = app.add_subcommand("generate", "write a random problem file");
  add_instance_flags(gen_cmd, gen_opts.instance, gen_size);
  gen_cmd->add_option("--scalar", scalar, "f64 or f32")->check(CLI::IsMember({"f64", "f32"}));
  gen_cmd->add_option("--out", gen_opts.out, "output path (.bin/.ddcr for binary)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kIoError;
  }

  try {
    if (*solve_cmd) {
      solve_opts.instance.size = parse_size(solve_size);
      return cmd_solve(solve_opts, out, err);
    }
    if (*grad_cmd) {
      if (!grad_sizes.empty()) {
        grad_opts.sizes.clear();
        for (const auto& s : grad_sizes) grad_opts.sizes.push_back(parse_size(s));
      }
      return cmd_gradcheck(grad_opts, out);
    }
    if (*oracle_cmd) {
      oracle_opts.instance.size = parse_size(oracle_size);
      return cmd_oracle(oracle_opts, out, err);
    }
    if (*bench_cmd) return cmd_bench(bench_opts, out);
    if (*gen_cmd) {
      gen_opts.instance.size = parse_size(gen_size);
      gen_opts.scalar = scalar == "f32" ? ScalarWidth::f32 : ScalarWidth::f64;
      return cmd_generate(gen_opts, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kIoError;
}

}  // namespace ddcrf::cli
