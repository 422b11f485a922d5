#pragma once

#include "ddcrf/chain_dp.hpp"
#include "ddcrf/grid.hpp"

#include <cstdint>
#include <stdexcept>

namespace ddcrf {

// Brute-force ground truth. Nothing here shares code with the DP kernels
// beyond the input types.

class OracleLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr std::uint64_t kMapEnumerationLimit = std::uint64_t{1} << 24;
inline constexpr std::uint64_t kChainEnumerationLimit = std::uint64_t{1} << 20;

// One-hot view of a labeling: x_i(l) and x_ij(l, l') for edge ij.
template <typename Scalar>
struct Configuration {
  Labeling labels;

  Scalar vertex_indicator(Index i, Label l) const { return labels[static_cast<std::size_t>(i)] == l ? 1 : 0; }
  Scalar edge_indicator(const Edge& e, Label a, Label b) const {
    return vertex_indicator(e.source, a) * vertex_indicator(e.target, b);
  }
  // sum_l x_i(l) = 1 and sum_l' x_ij(l, l') = x_i(l) for every edge.
  bool consistent(const GridSpec& grid) const;
};

// ILP objective sum_i psi_i . x_i + sum_ij phi_ij . x_ij over one-hot views.
template <typename Scalar>
Scalar ilp_objective(const Potentials<Scalar>& p, const Configuration<Scalar>& x);

template <typename Scalar>
struct MapSolution {
  Labeling labeling;
  Scalar energy;
};

// Exhaustive MAP over all L^(M N) labelings in lexicographic order; ties go
// to the lexicographically smallest labeling. Throws OracleLimitError above
// 2^24 labelings.
template <typename Scalar>
MapSolution<Scalar> brute_force_map(const Potentials<Scalar>& p);

// gamma * log sum over all chain labelings of exp(energy / gamma).
// Throws OracleLimitError above 2^20 labelings.
template <typename Scalar>
Scalar brute_force_smoothed_energy(const ChainProblem<Scalar>& chain, Scalar gamma);

// mu_i(l) = max energy over chain labelings with x_i = l.
template <typename Scalar>
Table<Scalar> brute_force_max_marginals(const ChainProblem<Scalar>& chain);

std::uint64_t labeling_count(Index vertices, int labels, std::uint64_t cap);

}  // namespace ddcrf
