#include "ddcrf/solver.hpp"

#include "ddcrf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace ddcrf {

template <typename Scalar>
Problem<Scalar>::Problem(Potentials<Scalar> potentials)
    : potentials_(std::move(potentials)), decomposition_(build_decomposition(potentials_.grid)) {
  chain_pairwise_.reserve(decomposition_.chains.size());
  for (const Chain& c : decomposition_.chains) {
    std::vector<const Table<Scalar>*> tables;
    tables.reserve(c.edges.size());
    for (Index e : c.edges) tables.push_back(&potentials_.edge_table(decomposition_.edges[static_cast<std::size_t>(e)]));
    chain_pairwise_.push_back(std::move(tables));
  }
}

template <typename Scalar>
std::shared_ptr<const Problem<Scalar>> Problem<Scalar>::create(Potentials<Scalar> potentials) {
  require_valid(potentials);
  return std::shared_ptr<const Problem>(new Problem(std::move(potentials)));
}

template <typename Scalar>
ChainSlice<Scalar> Problem<Scalar>::slice(Index chain, const Table<Scalar>& unary, Scalar gamma) const {
  return ChainSlice<Scalar>{unary, chain_pairwise_[static_cast<std::size_t>(chain)], gamma};
}

template <typename Scalar>
std::vector<Table<Scalar>> replicate_unaries(const Problem<Scalar>& problem) {
  const Decomposition& d = problem.decomposition();
  const auto& unary = problem.potentials().unary;
  std::vector<Table<Scalar>> psi;
  psi.reserve(d.chains.size());
  for (const Chain& c : d.chains) {
    Table<Scalar> t(c.size(), unary.cols());
    for (Index k = 0; k < c.size(); ++k) {
      const Index v = c.vertices[static_cast<std::size_t>(k)];
      const auto cover = static_cast<Scalar>(d.coverage[static_cast<std::size_t>(v)].size());
      t.row(k) = unary.row(v) / cover;
    }
    psi.push_back(std::move(t));
  }
  return psi;
}

template <typename Scalar>
void refresh_marginals(DualState<Scalar>& state) {
  const Problem<Scalar>& problem = *state.problem;
  state.chains.resize(static_cast<std::size_t>(problem.num_chains()));
  parallel_for(problem.num_chains(), state.workers, [&](Index t) {
    const auto slice = problem.slice(t, state.psi[static_cast<std::size_t>(t)], state.gamma);
    state.chains[static_cast<std::size_t>(t)] = chain_marginals(slice, state.mode);
  });
}

template <typename Scalar>
DualState<Scalar> make_dual_state(std::shared_ptr<const Problem<Scalar>> problem, Mode mode, Scalar gamma,
                                  int workers) {
  if (mode == Mode::smoothed && !(gamma > 0))
    throw std::invalid_argument("gamma must be positive in smoothed mode");
  DualState<Scalar> state;
  state.problem = std::move(problem);
  state.mode = mode;
  state.gamma = gamma;
  state.workers = std::max(1, workers);
  state.psi = replicate_unaries(*state.problem);
  refresh_marginals(state);
  return state;
}

template <typename Scalar>
Scalar dual_objective(const DualState<Scalar>& state) {
  Scalar total = 0;
  for (const auto& c : state.chains) total += c.energy;
  return total;
}

template <typename Scalar>
Scalar hard_dual_objective(const DualState<Scalar>& state) {
  if (state.mode == Mode::max) return dual_objective(state);
  const Problem<Scalar>& problem = *state.problem;
  std::vector<Scalar> energies(static_cast<std::size_t>(problem.num_chains()));
  parallel_for(problem.num_chains(), state.workers, [&](Index t) {
    const auto slice = problem.slice(t, state.psi[static_cast<std::size_t>(t)], state.gamma);
    energies[static_cast<std::size_t>(t)] = chain_marginals(slice, Mode::max).energy;
  });
  Scalar total = 0;
  for (Scalar e : energies) total += e;
  return total;
}

template <typename Scalar>
Scalar reparameterization_error(const DualState<Scalar>& state) {
  const Decomposition& d = state.decomposition();
  const auto& unary = state.problem->potentials().unary;
  Scalar worst = 0;
  for (Index v = 0; v < d.grid.num_vertices(); ++v) {
    Vector<Scalar> sum = Vector<Scalar>::Zero(unary.cols());
    for (const Cover& c : d.coverage[static_cast<std::size_t>(v)])
      sum += state.psi[static_cast<std::size_t>(c.chain)].row(c.position).transpose();
    worst = std::max(worst, (sum - unary.row(v).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

template <typename Scalar>
void fixed_point_update(const Decomposition& d, std::vector<Table<Scalar>>& psi,
                        const std::vector<const Table<Scalar>*>& marginals, Scalar step, int workers) {
  // Each (chain, position) belongs to exactly one vertex, so vertices can be
  // updated concurrently.
  parallel_for(d.grid.num_vertices(), workers, [&](Index v) {
    const auto& cover = d.coverage[static_cast<std::size_t>(v)];
    if (cover.size() < 2) return;
    const Index L = psi.front().cols();
    Vector<Scalar> mean = Vector<Scalar>::Zero(L);
    for (const Cover& c : cover) mean += marginals[static_cast<std::size_t>(c.chain)]->row(c.position).transpose();
    mean /= static_cast<Scalar>(cover.size());
    for (const Cover& c : cover) {
      auto row = psi[static_cast<std::size_t>(c.chain)].row(c.position);
      row -= step * (marginals[static_cast<std::size_t>(c.chain)]->row(c.position) - mean.transpose());
    }
  });
}

namespace {

template <typename Scalar>
std::vector<const Table<Scalar>*> marginal_views(const DualState<Scalar>& state) {
  std::vector<const Table<Scalar>*> views;
  views.reserve(state.chains.size());
  for (const auto& c : state.chains) views.push_back(&c.marginals);
  return views;
}

}  // namespace

template <typename Scalar>
StepResult<Scalar> fpi_step(const DualState<Scalar>& state) {
  StepResult<Scalar> out{state, {}};
  out.diagnostics.dual_before = dual_objective(state);
  const auto step = static_cast<Scalar>(state.decomposition().step_size);
  fixed_point_update(state.decomposition(), out.state.psi, marginal_views(state), step, state.workers);

  Scalar moved = 0;
  for (std::size_t t = 0; t < state.psi.size(); ++t)
    moved = std::max(moved, (out.state.psi[t] - state.psi[t]).cwiseAbs().maxCoeff());
  out.diagnostics.max_correction = moved;

  refresh_marginals(out.state);
  out.diagnostics.dual_after = dual_objective(out.state);
  out.diagnostics.agreement_fraction = agreement(out.state).fraction;
  return out;
}

template <typename Scalar>
DualState<Scalar> single_node_update(const DualState<Scalar>& state, Index k) {
  const Decomposition& d = state.decomposition();
  if (k < 0 || k >= d.grid.num_vertices()) throw std::out_of_range("vertex index out of range");
  DualState<Scalar> out = state;
  const auto& cover = d.coverage[static_cast<std::size_t>(k)];
  const Index L = d.grid.num_labels;
  Vector<Scalar> mean = Vector<Scalar>::Zero(L);
  for (const Cover& c : cover) mean += state.chains[static_cast<std::size_t>(c.chain)].marginals.row(c.position).transpose();
  mean /= static_cast<Scalar>(cover.size());
  for (const Cover& c : cover) {
    out.psi[static_cast<std::size_t>(c.chain)].row(c.position) -=
        state.chains[static_cast<std::size_t>(c.chain)].marginals.row(c.position) - mean.transpose();
  }
  // Only the chains through k change.
  for (const Cover& c : cover) {
    const auto slice = out.problem->slice(c.chain, out.psi[static_cast<std::size_t>(c.chain)], out.gamma);
    out.chains[static_cast<std::size_t>(c.chain)] = chain_marginals(slice, out.mode);
  }
  return out;
}

template <typename Scalar>
Labeling argmax_rows(const Table<Scalar>& scores) {
  Labeling x(static_cast<std::size_t>(scores.rows()), 0);
  for (Index i = 0; i < scores.rows(); ++i) {
    Label best = 0;
    for (Index l = 1; l < scores.cols(); ++l)
      if (scores(i, l) > scores(i, best)) best = static_cast<Label>(l);
    x[static_cast<std::size_t>(i)] = best;
  }
  return x;
}

template <typename Scalar>
Table<Scalar> softmax_rows(const Table<Scalar>& scores) {
  Table<Scalar> p(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    const Scalar top = scores.row(i).maxCoeff();
    p.row(i) = (scores.row(i).array() - top).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

template <typename Scalar>
Agreement agreement(const DualState<Scalar>& state) {
  const Decomposition& d = state.decomposition();
  Agreement a;
  a.per_vertex_argmax.resize(d.coverage.size());
  Index agreeing = 0;
  for (std::size_t v = 0; v < d.coverage.size(); ++v) {
    auto& picks = a.per_vertex_argmax[v];
    for (const Cover& c : d.coverage[v]) {
      const auto& m = state.chains[static_cast<std::size_t>(c.chain)].marginals;
      Label best = 0;
      for (Index l = 1; l < m.cols(); ++l)
        if (m(c.position, l) > m(c.position, best)) best = static_cast<Label>(l);
      picks.push_back(best);
    }
    if (std::all_of(picks.begin(), picks.end(), [&](Label l) { return l == picks.front(); })) ++agreeing;
  }
  a.fraction = d.coverage.empty() ? 1.0 : static_cast<double>(agreeing) / static_cast<double>(d.coverage.size());
  a.all_agree = agreeing == static_cast<Index>(d.coverage.size());
  return a;
}

template <typename Scalar>
Table<Scalar> marginal_sums(const DualState<Scalar>& state) {
  const Decomposition& d = state.decomposition();
  Table<Scalar> sums = Table<Scalar>::Zero(d.grid.num_vertices(), d.grid.num_labels);
  for (std::size_t v = 0; v < d.coverage.size(); ++v)
    for (const Cover& c : d.coverage[v])
      sums.row(static_cast<Index>(v)) += state.chains[static_cast<std::size_t>(c.chain)].marginals.row(c.position);
  return sums;
}

template <typename Scalar>
Labeling decode_argmax(const DualState<Scalar>& state) {
  return argmax_rows(marginal_sums(state));
}

template <typename Scalar>
Table<Scalar> decode_softmax(const DualState<Scalar>& state) {
  return softmax_rows(marginal_sums(state));
}

void SolveConfig::validate() const {
  if (mode == Mode::smoothed && !(gamma > 0)) throw std::invalid_argument("gamma must be positive in smoothed mode");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (!(dual_tol >= 0)) throw std::invalid_argument("dual_tol must be non-negative");
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::agreement: return "agreement";
    case StopReason::stagnation: return "stagnation";
    case StopReason::max_iters: return "max_iters";
  }
  return "unknown";
}

namespace {

constexpr int kStagnationWindow = 5;

// 1e-9 relative in double, widened by 1e3 for float.
template <typename Scalar>
Scalar gap_tolerance(Scalar dual) {
  const Scalar rel = std::is_same_v<Scalar, float> ? static_cast<Scalar>(1e-6) : static_cast<Scalar>(1e-9);
  return rel * std::max<Scalar>(1, std::abs(dual));
}

}  // namespace

template <typename Scalar>
SolveResult<Scalar> solve(std::shared_ptr<const Problem<Scalar>> problem, const SolveConfig& cfg) {
  cfg.validate();
  SolveResult<Scalar> r;
  DualState<Scalar> state = make_dual_state(std::move(problem), cfg.mode, static_cast<Scalar>(cfg.gamma), cfg.workers);
  r.initial_dual = dual_objective(state);

  std::vector<Scalar> history{r.initial_dual};
  for (int it = 1; it <= cfg.max_iters; ++it) {
    auto step = fpi_step(state);
    state = std::move(step.state);
    r.iterations = it;
    r.dual_trace.push_back(step.diagnostics.dual_after);
    r.agreement_trace.push_back(step.diagnostics.agreement_fraction);
    history.push_back(step.diagnostics.dual_after);

    if (step.diagnostics.agreement_fraction == 1.0) {
      // Agreeing argmaxes need not form an optimal labeling (tied max
      // marginals, or a smoothed relaxation that is not tight); only a zero
      // gap against the hard dual certifies it.
      const Labeling x = decode_argmax(state);
      const Scalar dual = cfg.mode == Mode::max ? step.diagnostics.dual_after : hard_dual_objective(state);
      if (dual - energy(state.problem->potentials(), x) <= gap_tolerance(dual)) {
        r.stop_reason = StopReason::agreement;
        break;
      }
    }
    if (it >= kStagnationWindow) {
      const Scalar before = history[history.size() - 1 - kStagnationWindow];
      const Scalar improvement = before - history.back();
      if (improvement <= static_cast<Scalar>(cfg.dual_tol) * std::max<Scalar>(1, std::abs(before))) {
        r.stop_reason = StopReason::stagnation;
        break;
      }
    }
  }

  r.converged = r.stop_reason == StopReason::agreement;
  r.objective = dual_objective(state);
  r.labeling = decode_argmax(state);
  r.primal_energy = energy(state.problem->potentials(), r.labeling);
  r.dual_bound = hard_dual_objective(state);
  r.duality_gap = r.dual_bound - r.primal_energy;
  r.final_state = std::move(state);
  return r;
}

#define DDCRF_INSTANTIATE(S)                                                                                 \
  template class Problem<S>;                                                                               \
  template std::vector<Table<S>> replicate_unaries(const Problem<S>&);                                     \
  template DualState<S> make_dual_state(std::shared_ptr<const Problem<S>>, Mode, S, int);                   \
  template void refresh_marginals(DualState<S>&);                                                          \
  template S dual_objective(const DualState<S>&);                                                          \
  template S hard_dual_objective(const DualState<S>&);                                                     \
  template S reparameterization_error(const DualState<S>&);                                                \
  template void fixed_point_update(const Decomposition&, std::vector<Table<S>>&,                           \
                                   const std::vector<const Table<S>*>&, S, int);                           \
  template StepResult<S> fpi_step(const DualState<S>&);                                                    \
  template DualState<S> single_node_update(const DualState<S>&, Index);                                    \
  template Agreement agreement(const DualState<S>&);                                                       \
  template Table<S> marginal_sums(const DualState<S>&);                                                    \
  template Labeling argmax_rows(const Table<S>&);                                                          \
  template Table<S> softmax_rows(const Table<S>&);                                                         \
  template Labeling decode_argmax(const DualState<S>&);                                                    \
  template Table<S> decode_softmax(const DualState<S>&);                                                   \
  template SolveResult<S> solve(std::shared_ptr<const Problem<S>>, const SolveConfig&);

DDCRF_INSTANTIATE(double)
DDCRF_INSTANTIATE(float)
#undef DDCRF_INSTANTIATE

}  // namespace ddcrf
