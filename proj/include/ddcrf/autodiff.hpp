#pragma once

#include "ddcrf/solver.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace ddcrf {

struct UnrollOptions {
  int workers = 1;
  // Keep psi^t per step instead of DP tapes and replay the chain sweeps in
  // the backward pass: O(n L) instead of O(n L^2) per chain and step.
  bool recompute = false;
};

// Everything the backward pass needs. `steps` holds one record per chain DP
// pass: K update steps followed by the final decode pass.
template <typename Scalar>
struct UnrolledTape {
  std::shared_ptr<const Problem<Scalar>> problem;
  Mode mode = Mode::smoothed;
  Scalar gamma = 1;
  int iterations = 0;
  UnrollOptions options;
  std::vector<std::vector<ChainTape<Scalar>>> steps;
  std::vector<std::vector<Table<Scalar>>> psi_history;  // recompute mode only
  Table<Scalar> probs;

  std::size_t size_bytes() const;
};

template <typename Scalar>
struct UnrolledForward {
  Table<Scalar> probs;
  UnrolledTape<Scalar> tape;
};

// Replicate unaries, run K fixed-point steps recording tapes, and decode the
// final marginal sums with a row-wise softmax. Throws std::invalid_argument
// for K < 0 or gamma <= 0 in smoothed mode.
template <typename Scalar>
UnrolledForward<Scalar> forward_unrolled(std::shared_ptr<const Problem<Scalar>> problem, int iterations, Mode mode,
                                         Scalar gamma, const UnrollOptions& options = {});

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Table<Scalar> grad_probs;  // seed for backward_unrolled
};

inline constexpr double kProbabilityClamp = 1e-15;

// Mean over vertices of -log p[i][target_i], with p clamped into
// [1e-15, 1 - 1e-15]. Throws std::out_of_range for bad target labels.
template <typename Scalar>
LossResult<Scalar> cross_entropy_loss(const Table<Scalar>& probs, const Labeling& target);

// Gradients with respect to the original potentials; pairwise has the same
// layout as Potentials::pairwise (tied tables accumulate all their edges).
template <typename Scalar>
struct GradientPair {
  Table<Scalar> unary;
  std::vector<Table<Scalar>> pairwise;
};

// Reverse pass through the softmax decode, every chain DP, the linear
// fixed-point updates and the unary replication. Throws
// std::invalid_argument when the seed or tape is inconsistent.
template <typename Scalar>
GradientPair<Scalar> backward_unrolled(const UnrolledTape<Scalar>& tape, const Table<std::type_identity_t<Scalar>>& grad_probs);

struct FiniteDiffReport {
  double max_rel_error = 0;
  Index worst_row = -1;
  Index worst_col = -1;
  double analytic = 0;
  double numeric = 0;
};

// Central differences of fn at every entry of params, compared with
// `analytic` using |a - n| / max(1e-6, |a| + |n|). The floor keeps round-off
// on exactly-zero gradients, about ulp(f) / 2h, from reading as error.
FiniteDiffReport finite_diff_check(const std::function<double(const Table<double>&)>& fn,
                                   const Table<double>& params, const Table<double>& analytic, double h);

}  // namespace ddcrf
