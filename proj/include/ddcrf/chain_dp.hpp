#pragma once

#include "ddcrf/types.hpp"

#include <cstddef>
#include <type_traits>
#include <vector>

namespace ddcrf {

// gamma * log(sum_l exp(values[l] / gamma)) and its gradient softmax(values / gamma).
template <typename Scalar>
struct SmoothedMax {
  Scalar value;
  Vector<Scalar> grad;
};

template <typename Scalar>
SmoothedMax<Scalar> smoothed_max(const Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>& values, Scalar gamma);

// Read-only view of one chain: unary (n x L) and the n - 1 edge tables.
// pairwise[k](a, b) scores label a at position k with label b at k + 1.
template <typename Scalar>
struct ChainSlice {
  Eigen::Ref<const Table<Scalar>> unary;
  std::vector<const Table<Scalar>*> pairwise;
  Scalar gamma = 1;

  Index length() const { return unary.rows(); }
  Index labels() const { return unary.cols(); }
};

// Owning storage for a standalone chain, mostly for tests and the oracle.
template <typename Scalar>
struct ChainProblem {
  Table<Scalar> unary;
  std::vector<Table<Scalar>> pairwise;

  ChainSlice<Scalar> slice(Scalar gamma = 1) const {
    ChainSlice<Scalar> s{unary, {}, gamma};
    s.pairwise.reserve(pairwise.size());
    for (const auto& t : pairwise) s.pairwise.push_back(&t);
    return s;
  }
};

// marginals = forward + backward - unary. energy is the (smoothed) max of
// any row of marginals; every row gives the same value.
template <typename Scalar>
struct ChainMarginals {
  Table<Scalar> marginals;
  Table<Scalar> forward;
  Table<Scalar> backward;
  Scalar energy = 0;
};

// Per-edge routing recorded by the forward sweeps.
//  max mode: argmax_forward(k, b)  = best label at k given label b at k + 1
//            argmax_backward(k, a) = best label at k + 1 given label a at k
//  smoothed: weight_forward[k](b, a), weight_backward[k](a, b); rows sum to 1.
template <typename Scalar>
struct ChainTape {
  Mode mode = Mode::max;
  LabelTable argmax_forward;
  LabelTable argmax_backward;
  std::vector<Table<Scalar>> weight_forward;
  std::vector<Table<Scalar>> weight_backward;

  std::size_t size_bytes() const;
};

template <typename Scalar>
struct ChainForward {
  ChainMarginals<Scalar> marginals;
  ChainTape<Scalar> tape;
};

template <typename Scalar>
struct ChainGradient {
  Table<Scalar> unary;
  std::vector<Table<Scalar>> pairwise;
};

// Root-to-leaf and leaf-to-root sweeps. Labels at a position are processed
// together; positions are strictly sequential.
template <typename Scalar>
ChainForward<Scalar> chain_forward(const ChainSlice<Scalar>& slice, Mode mode);

// Same sweeps without recording a tape.
template <typename Scalar>
ChainMarginals<Scalar> chain_marginals(const ChainSlice<Scalar>& slice, Mode mode);

// Reverse-mode gradient of sum(grad_marginals .* marginals) with respect to
// the slice's unary and pairwise entries. Max mode follows the recorded
// argmaxes (ties went to the lowest label). Throws std::invalid_argument when
// shapes disagree.
template <typename Scalar>
ChainGradient<Scalar> chain_backward(const ChainSlice<Scalar>& slice, const ChainTape<Scalar>& tape,
                                     const Eigen::Ref<const Table<std::type_identity_t<Scalar>>>& grad_marginals);

}  // namespace ddcrf
