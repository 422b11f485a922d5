#pragma once

#include "ddcrf/chain_dp.hpp"
#include "ddcrf/decomposition.hpp"
#include "ddcrf/grid.hpp"

#include <memory>
#include <string_view>
#include <vector>

namespace ddcrf {

// Immutable problem instance: validated potentials, their chain
// decomposition, and per-chain pointers to the edge tables.
template <typename Scalar>
class Problem {
 public:
  static std::shared_ptr<const Problem> create(Potentials<Scalar> potentials);

  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  const Potentials<Scalar>& potentials() const { return potentials_; }
  const Decomposition& decomposition() const { return decomposition_; }
  const GridSpec& grid() const { return potentials_.grid; }
  Index num_chains() const { return static_cast<Index>(decomposition_.chains.size()); }

  ChainSlice<Scalar> slice(Index chain, const Table<Scalar>& unary, Scalar gamma) const;

 private:
  explicit Problem(Potentials<Scalar> potentials);

  Potentials<Scalar> potentials_;
  Decomposition decomposition_;
  std::vector<std::vector<const Table<Scalar>*>> chain_pairwise_;
};

// Replicated unaries psi^t (one table per chain, rows follow chain order)
// plus the chain marginals they induce. Every operation below keeps
// `chains` in sync with `psi`.
template <typename Scalar>
struct DualState {
  std::shared_ptr<const Problem<Scalar>> problem;
  Mode mode = Mode::max;
  Scalar gamma = 1;
  int workers = 1;
  std::vector<Table<Scalar>> psi;
  std::vector<ChainMarginals<Scalar>> chains;

  const Decomposition& decomposition() const { return problem->decomposition(); }
};

// psi^t_i = psi_i / |T(i)| for every chain t covering i.
template <typename Scalar>
std::vector<Table<Scalar>> replicate_unaries(const Problem<Scalar>& problem);

// Replicates unaries and computes all chain marginals. Throws
// std::invalid_argument when gamma <= 0 in smoothed mode.
template <typename Scalar>
DualState<Scalar> make_dual_state(std::shared_ptr<const Problem<Scalar>> problem, Mode mode,
                                  Scalar gamma = 1, int workers = 1);

template <typename Scalar>
void refresh_marginals(DualState<Scalar>& state);

// Sum of chain energies under the state's mode.
template <typename Scalar>
Scalar dual_objective(const DualState<Scalar>& state);

// Sum of hard-max chain energies at the state's psi, whatever its mode.
// This is an upper bound on the MAP energy in both modes.
template <typename Scalar>
Scalar hard_dual_objective(const DualState<Scalar>& state);

// max over (i, l) of |sum_{t in T(i)} psi^t_i(l) - psi_i(l)|.
template <typename Scalar>
Scalar reparameterization_error(const DualState<Scalar>& state);

// In place: psi^t_i -= step * (m^t_i - mean_{T(i)} m_i) for all i, t, l.
// Means accumulate in ascending chain order.
template <typename Scalar>
void fixed_point_update(const Decomposition& d, std::vector<Table<Scalar>>& psi,
                        const std::vector<const Table<Scalar>*>& marginals, Scalar step, int workers);

template <typename Scalar>
struct StepDiagnostics {
  Scalar dual_before = 0;
  Scalar dual_after = 0;
  double agreement_fraction = 0;  // of the updated state
  Scalar max_correction = 0;
};

template <typename Scalar>
struct StepResult {
  DualState<Scalar> state;
  StepDiagnostics<Scalar> diagnostics;
};

// One simultaneous update of every psi^t with step 1 / max chain length.
template <typename Scalar>
StepResult<Scalar> fpi_step(const DualState<Scalar>& state);

// Step-size-1 update at vertex k only; afterwards every chain covering k has
// the same marginal vector at k.
template <typename Scalar>
DualState<Scalar> single_node_update(const DualState<Scalar>& state, Index k);

struct Agreement {
  bool all_agree = false;
  double fraction = 0;
  // per_vertex_argmax[i][c] is the argmax label of coverage[i][c].
  std::vector<std::vector<Label>> per_vertex_argmax;
};

template <typename Scalar>
Agreement agreement(const DualState<Scalar>& state);

// sum_{t in T(i)} m^t_i, shape (V, L).
template <typename Scalar>
Table<Scalar> marginal_sums(const DualState<Scalar>& state);

// Row-wise argmax with ties to the lowest label.
template <typename Scalar>
Labeling argmax_rows(const Table<Scalar>& scores);

// Row-wise softmax, max-subtracted.
template <typename Scalar>
Table<Scalar> softmax_rows(const Table<Scalar>& scores);

template <typename Scalar>
Labeling decode_argmax(const DualState<Scalar>& state);

template <typename Scalar>
Table<Scalar> decode_softmax(const DualState<Scalar>& state);

struct SolveConfig {
  Mode mode = Mode::max;
  double gamma = 1.0;
  int max_iters = 200;
  double dual_tol = 1e-7;   // relative improvement over a 5-step window
  int workers = 1;

  void validate() const;  // throws std::invalid_argument
};

// `agreement` means every chain agrees and the decoded labeling closes the
// hard duality gap; it is the only reason that counts as converged.
enum class StopReason { agreement, stagnation, max_iters };

std::string_view to_string(StopReason reason);

template <typename Scalar>
struct SolveResult {
  Labeling labeling;
  Scalar primal_energy = 0;
  Scalar dual_bound = 0;    // hard-max dual at the final psi
  Scalar duality_gap = 0;   // dual_bound - primal_energy
  Scalar objective = 0;     // final dual in the solving mode
  int iterations = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::max_iters;
  Scalar initial_dual = 0;
  std::vector<Scalar> dual_trace;         // solving-mode dual after each step
  std::vector<double> agreement_trace;    // agreement fraction after each step
  DualState<Scalar> final_state;
};

template <typename Scalar>
SolveResult<Scalar> solve(std::shared_ptr<const Problem<Scalar>> problem, const SolveConfig& cfg);

template <typename Scalar>
SolveResult<Scalar> solve(const Potentials<Scalar>& potentials, const SolveConfig& cfg) {
  return solve(Problem<Scalar>::create(potentials), cfg);
}

}  // namespace ddcrf
