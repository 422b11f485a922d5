#include "ddcrf/autodiff.hpp"

#include "ddcrf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddcrf {

template <typename Scalar>
std::size_t UnrolledTape<Scalar>::size_bytes() const {
  std::size_t bytes = 0;
  for (const auto& step : steps)
    for (const auto& t : step) bytes += t.size_bytes();
  for (const auto& step : psi_history)
    for (const auto& t : step) bytes += static_cast<std::size_t>(t.size()) * sizeof(Scalar);
  return bytes;
}

namespace {

template <typename Scalar>
Table<Scalar> sum_over_cover(const Decomposition& d, const std::vector<const Table<Scalar>*>& per_chain) {
  Table<Scalar> sums = Table<Scalar>::Zero(d.grid.num_vertices(), d.grid.num_labels);
  for (std::size_t v = 0; v < d.coverage.size(); ++v)
    for (const Cover& c : d.coverage[v])
      sums.row(static_cast<Index>(v)) += per_chain[static_cast<std::size_t>(c.chain)]->row(c.position);
  return sums;
}

}  // namespace

template <typename Scalar>
UnrolledForward<Scalar> forward_unrolled(std::shared_ptr<const Problem<Scalar>> problem, int iterations, Mode mode,
                                         Scalar gamma, const UnrollOptions& options) {
  if (iterations < 0) throw std::invalid_argument("iteration count must be non-negative");
  if (mode == Mode::smoothed && !(gamma > 0)) throw std::invalid_argument("gamma must be positive in smoothed mode");

  const Decomposition& d = problem->decomposition();
  const Index chains = problem->num_chains();
  const auto step = static_cast<Scalar>(d.step_size);

  UnrolledForward<Scalar> out;
  UnrolledTape<Scalar>& tape = out.tape;
  tape.problem = problem;
  tape.mode = mode;
  tape.gamma = gamma;
  tape.iterations = iterations;
  tape.options = options;

  std::vector<Table<Scalar>> psi = replicate_unaries(*problem);
  std::vector<Table<Scalar>> marginals(static_cast<std::size_t>(chains));
  std::vector<const Table<Scalar>*> views;
  for (const auto& m : marginals) views.push_back(&m);

  for (int s = 0; s <= iterations; ++s) {
    if (options.recompute) {
      tape.psi_history.push_back(psi);
      parallel_for(chains, options.workers, [&](Index t) {
        marginals[static_cast<std::size_t>(t)] =
            chain_marginals(problem->slice(t, psi[static_cast<std::size_t>(t)], gamma), mode).marginals;
      });
    } else {
      auto& tapes = tape.steps.emplace_back(static_cast<std::size_t>(chains));
      parallel_for(chains, options.workers, [&](Index t) {
        auto fwd = chain_forward(problem->slice(t, psi[static_cast<std::size_t>(t)], gamma), mode);
        marginals[static_cast<std::size_t>(t)] = std::move(fwd.marginals.marginals);
        tapes[static_cast<std::size_t>(t)] = std::move(fwd.tape);
      });
    }
    if (s < iterations) fixed_point_update(d, psi, views, step, options.workers);
  }

  out.probs = softmax_rows(sum_over_cover(d, views));
  tape.probs = out.probs;
  return out;
}

template <typename Scalar>
LossResult<Scalar> cross_entropy_loss(const Table<Scalar>& probs, const Labeling& target) {
  if (static_cast<Index>(target.size()) != probs.rows())
    throw std::invalid_argument("target length does not match the probability table");
  const auto lo = static_cast<Scalar>(kProbabilityClamp);
  const Scalar hi = 1 - lo;
  const auto n = static_cast<Scalar>(probs.rows());
  LossResult<Scalar> r;
  r.grad_probs = Table<Scalar>::Zero(probs.rows(), probs.cols());
  for (Index i = 0; i < probs.rows(); ++i) {
    const Label l = target[static_cast<std::size_t>(i)];
    if (l < 0 || l >= probs.cols())
      throw std::out_of_range("target label " + std::to_string(l) + " at vertex " + std::to_string(i) +
                              " is outside [0, " + std::to_string(probs.cols()) + ")");
    const Scalar p = probs(i, l);
    r.loss -= std::log(std::clamp(p, lo, hi));
    if (p > lo && p < hi) r.grad_probs(i, l) = -1 / (n * p);
  }
  r.loss /= n;
  return r;
}

template <typename Scalar>
GradientPair<Scalar> backward_unrolled(const UnrolledTape<Scalar>& tape, const Table<std::type_identity_t<Scalar>>& grad_probs) {
  if (!tape.problem) throw std::invalid_argument("empty tape");
  const Problem<Scalar>& problem = *tape.problem;
  const Decomposition& d = problem.decomposition();
  const Index chains = problem.num_chains();
  const Index L = d.grid.num_labels;
  const auto records = static_cast<std::size_t>(tape.iterations + 1);
  if ((tape.options.recompute ? tape.psi_history.size() : tape.steps.size()) != records)
    throw std::invalid_argument("tape length does not match its iteration count");
  if (grad_probs.rows() != tape.probs.rows() || grad_probs.cols() != tape.probs.cols())
    throw std::invalid_argument("seed shape does not match the decoded probabilities");

  // Through the softmax decode: dS = p .* (dp - <dp, p>).
  const Table<Scalar>& p = tape.probs;
  Table<Scalar> dsum(p.rows(), p.cols());
  for (Index i = 0; i < p.rows(); ++i) {
    const Scalar inner = grad_probs.row(i).dot(p.row(i));
    dsum.row(i) = p.row(i).cwiseProduct((grad_probs.row(i).array() - inner).matrix());
  }

  std::vector<Table<Scalar>> dpsi, seed;
  std::vector<const Table<Scalar>*> dpsi_views;
  dpsi.reserve(static_cast<std::size_t>(chains));
  seed.reserve(static_cast<std::size_t>(chains));
  for (const Chain& c : d.chains) {
    dpsi.push_back(Table<Scalar>::Zero(c.size(), L));
    Table<Scalar> s(c.size(), L);
    for (Index k = 0; k < c.size(); ++k) s.row(k) = dsum.row(c.vertices[static_cast<std::size_t>(k)]);
    seed.push_back(std::move(s));
  }
  for (const auto& t : dpsi) dpsi_views.push_back(&t);

  std::vector<Table<Scalar>> dedge(d.edges.size(), Table<Scalar>::Zero(L, L));
  const auto step = static_cast<Scalar>(d.step_size);
  std::vector<Table<Scalar>> grad_marginals = seed;

  for (int s = tape.iterations; s >= 0; --s) {
    if (s < tape.iterations) {
      // psi_{s+1} = psi_s - step * (m_s - mean_T m_s) is linear in m_s and
      // its own transpose, so the marginal adjoint is the same update
      // applied to zeros with dpsi in place of the marginals.
      for (auto& g : grad_marginals) g.setZero();
      fixed_point_update(d, grad_marginals, dpsi_views, step, tape.options.workers);
    }
    parallel_for(chains, tape.options.workers, [&](Index t) {
      const auto ti = static_cast<std::size_t>(t);
      const Chain& chain = d.chains[ti];
      ChainGradient<Scalar> g;
      if (tape.options.recompute) {
        const auto slice = problem.slice(t, tape.psi_history[static_cast<std::size_t>(s)][ti], tape.gamma);
        const auto fwd = chain_forward(slice, tape.mode);
        g = chain_backward(slice, fwd.tape, grad_marginals[ti]);
      } else {
        const auto slice = problem.slice(t, dpsi[ti], tape.gamma);  // only shapes are read
        g = chain_backward(slice, tape.steps[static_cast<std::size_t>(s)][ti], grad_marginals[ti]);
      }
      dpsi[ti] += g.unary;
      // Chains own disjoint edges.
      for (std::size_t k = 0; k < chain.edges.size(); ++k)
        dedge[static_cast<std::size_t>(chain.edges[k])] += g.pairwise[k];
    });
  }

  GradientPair<Scalar> out;
  out.unary = Table<Scalar>::Zero(d.grid.num_vertices(), L);
  for (std::size_t v = 0; v < d.coverage.size(); ++v) {
    const auto& cover = d.coverage[v];
    for (const Cover& c : cover) out.unary.row(static_cast<Index>(v)) += dpsi[static_cast<std::size_t>(c.chain)].row(c.position);
    out.unary.row(static_cast<Index>(v)) /= static_cast<Scalar>(cover.size());
  }

  if (problem.potentials().pairwise_mode == PairwiseMode::dense) {
    out.pairwise = std::move(dedge);
  } else {
    out.pairwise.assign(static_cast<std::size_t>(d.grid.num_slots()), Table<Scalar>::Zero(L, L));
    for (const Edge& e : d.edges) out.pairwise[static_cast<std::size_t>(e.slot)] += dedge[static_cast<std::size_t>(e.id)];
  }
  return out;
}

FiniteDiffReport finite_diff_check(const std::function<double(const Table<double>&)>& fn,
                                   const Table<double>& params, const Table<double>& analytic, double h) {
  if (!(h > 0)) throw std::invalid_argument("finite-difference step must be positive");
  if (analytic.rows() != params.rows() || analytic.cols() != params.cols())
    throw std::invalid_argument("analytic gradient shape does not match the parameters");
  FiniteDiffReport report;
  Table<double> x = params;
  for (Index r = 0; r < params.rows(); ++r) {
    for (Index c = 0; c < params.cols(); ++c) {
      const double saved = x(r, c);
      x(r, c) = saved + h;
      const double up = fn(x);
      x(r, c) = saved - h;
      const double down = fn(x);
      x(r, c) = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic(r, c);
      const double err = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      if (err > report.max_rel_error || report.worst_row < 0) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_row = r;
        report.worst_col = c;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

#define DDCRF_INSTANTIATE(S)                                                                                \
  template struct UnrolledTape<S>;                                                                        \
  template UnrolledForward<S> forward_unrolled(std::shared_ptr<const Problem<S>>, int, Mode, S,            \
                                               const UnrollOptions&);                                     \
  template LossResult<S> cross_entropy_loss(const Table<S>&, const Labeling&);                            \
  template GradientPair<S> backward_unrolled(const UnrolledTape<S>&, const Table<S>&);

DDCRF_INSTANTIATE(double)
DDCRF_INSTANTIATE(float)
#undef DDCRF_INSTANTIATE

}  // namespace ddcrf
