#pragma once

#include "ddcrf/chain_dp.hpp"
#include "ddcrf/grid.hpp"
#include "ddcrf/io.hpp"

#include <cmath>
#include <vector>

namespace ddcrf::test {

inline GridSpec grid(Index h, Index w, int labels, std::vector<int> strides = {1, 2}) {
  GridSpec g;
  g.height = h;
  g.width = w;
  g.num_labels = labels;
  g.strides = std::move(strides);
  return g;
}

// The two-node chain used throughout: psi1 = [0, 1], psi2 = [0, 0],
// phi = [[0, 0], [0, 2]].
template <typename S = double>
ChainProblem<S> two_node_chain() {
  ChainProblem<S> c;
  c.unary.resize(2, 2);
  c.unary << 0, 1, 0, 0;
  Table<S> phi(2, 2);
  phi << 0, 0, 0, 2;
  c.pairwise.push_back(phi);
  return c;
}

// Same instance as a 1x2 grid with stride 1 only.
template <typename S = double>
Potentials<S> two_node_potentials() {
  auto p = Potentials<S>::zeros(grid(1, 2, 2, {1}), PairwiseMode::tied);
  p.unary << 0, 1, 0, 0;
  p.pairwise[0] << 0, 0, 0, 2;
  p.pairwise[1].setZero();
  return p;
}

inline ChainProblem<double> random_chain(SplitMix64& rng, Index n, Index L, double scale = 1.0) {
  ChainProblem<double> c;
  c.unary.resize(n, L);
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < L; ++l) c.unary(i, l) = scale * rng.normal();
  for (Index k = 0; k + 1 < n; ++k) {
    Table<double> t(L, L);
    for (Index a = 0; a < L; ++a)
      for (Index b = 0; b < L; ++b) t(a, b) = scale * rng.normal();
    c.pairwise.push_back(std::move(t));
  }
  return c;
}

template <typename To>
Potentials<To> cast(const Potentials<double>& p) {
  Potentials<To> out;
  out.grid = p.grid;
  out.pairwise_mode = p.pairwise_mode;
  out.unary = p.unary.cast<To>();
  for (const auto& t : p.pairwise) out.pairwise.push_back(t.cast<To>());
  return out;
}

inline bool relative_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace ddcrf::test
