#include "ddcrf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ddcrf {

std::uint64_t labeling_count(Index vertices, int labels, std::uint64_t cap) {
  std::uint64_t count = 1;
  for (Index v = 0; v < vertices; ++v) {
    if (count > cap / static_cast<std::uint64_t>(std::max(labels, 1))) return cap + 1;
    count *= static_cast<std::uint64_t>(labels);
  }
  return count;
}

namespace {

void guard(Index vertices, int labels, std::uint64_t limit, const char* what) {
  if (labeling_count(vertices, labels, limit) > limit)
    throw OracleLimitError(std::string(what) + ": " + std::to_string(labels) + "^" + std::to_string(vertices) +
                           " labelings exceed the enumeration bound of " + std::to_string(limit));
}

// Odometer over labelings, last vertex fastest, i.e. lexicographic order.
bool advance(Labeling& x, int labels) {
  for (auto i = x.size(); i-- > 0;) {
    if (++x[i] < labels) return true;
    x[i] = 0;
  }
  return false;
}

template <typename Scalar>
Scalar chain_energy(const ChainProblem<Scalar>& chain, const Labeling& x) {
  Scalar e = 0;
  for (std::size_t k = 0; k < x.size(); ++k) e += chain.unary(static_cast<Index>(k), x[k]);
  for (std::size_t k = 0; k + 1 < x.size(); ++k) e += chain.pairwise[k](x[k], x[k + 1]);
  return e;
}

}  // namespace

template <typename Scalar>
bool Configuration<Scalar>::consistent(const GridSpec& grid) const {
  const int L = grid.num_labels;
  for (Index i = 0; i < grid.num_vertices(); ++i) {
    Scalar total = 0;
    for (Label l = 0; l < L; ++l) total += vertex_indicator(i, l);
    if (total != 1) return false;
  }
  for (const Edge& e : enumerate_edges(grid))
    for (Label a = 0; a < L; ++a) {
      Scalar row = 0;
      for (Label b = 0; b < L; ++b) row += edge_indicator(e, a, b);
      if (row != vertex_indicator(e.source, a)) return false;
    }
  return true;
}

template <typename Scalar>
Scalar ilp_objective(const Potentials<Scalar>& p, const Configuration<Scalar>& x) {
  const int L = p.grid.num_labels;
  Scalar total = 0;
  for (Index i = 0; i < p.grid.num_vertices(); ++i)
    for (Label l = 0; l < L; ++l) total += p.unary(i, l) * x.vertex_indicator(i, l);
  for (const Edge& e : enumerate_edges(p.grid)) {
    const auto& phi = p.edge_table(e);
    for (Label a = 0; a < L; ++a)
      for (Label b = 0; b < L; ++b) total += phi(a, b) * x.edge_indicator(e, a, b);
  }
  return total;
}

template <typename Scalar>
MapSolution<Scalar> brute_force_map(const Potentials<Scalar>& p) {
  require_valid(p);
  const Index V = p.grid.num_vertices();
  const int L = p.grid.num_labels;
  guard(V, L, kMapEnumerationLimit, "brute_force_map");

  const auto edges = enumerate_edges(p.grid);
  std::vector<const Table<Scalar>*> tables;
  for (const Edge& e : edges) tables.push_back(&p.edge_table(e));

  MapSolution<Scalar> best{Labeling(static_cast<std::size_t>(V), 0), -std::numeric_limits<Scalar>::infinity()};
  Labeling x(static_cast<std::size_t>(V), 0);
  do {
    Scalar e = 0;
    for (Index i = 0; i < V; ++i) e += p.unary(i, x[static_cast<std::size_t>(i)]);
    for (std::size_t k = 0; k < edges.size(); ++k)
      e += (*tables[k])(x[static_cast<std::size_t>(edges[k].source)], x[static_cast<std::size_t>(edges[k].target)]);
    if (e > best.energy) {
      best.energy = e;
      best.labeling = x;
    }
  } while (advance(x, L));
  return best;
}

template <typename Scalar>
Scalar brute_force_smoothed_energy(const ChainProblem<Scalar>& chain, Scalar gamma) {
  const Index n = chain.unary.rows();
  const int L = static_cast<int>(chain.unary.cols());
  guard(n, L, kChainEnumerationLimit, "brute_force_smoothed_energy");

  std::vector<Scalar> energies;
  Labeling x(static_cast<std::size_t>(n), 0);
  do {
    energies.push_back(chain_energy(chain, x));
  } while (advance(x, L));
  const Scalar top = *std::max_element(energies.begin(), energies.end());
  Scalar sum = 0;
  for (Scalar e : energies) sum += std::exp((e - top) / gamma);
  return top + gamma * std::log(sum);
}

template <typename Scalar>
Table<Scalar> brute_force_max_marginals(const ChainProblem<Scalar>& chain) {
  const Index n = chain.unary.rows();
  const int L = static_cast<int>(chain.unary.cols());
  guard(n, L, kChainEnumerationLimit, "brute_force_max_marginals");

  Table<Scalar> mu = Table<Scalar>::Constant(n, L, -std::numeric_limits<Scalar>::infinity());
  Labeling x(static_cast<std::size_t>(n), 0);
  do {
    const Scalar e = chain_energy(chain, x);
    for (Index i = 0; i < n; ++i) {
      Scalar& slot = mu(i, x[static_cast<std::size_t>(i)]);
      slot = std::max(slot, e);
    }
  } while (advance(x, L));
  return mu;
}

#define DDCRF_INSTANTIATE(S)                                                    \
  template struct Configuration<S>;                                           \
  template S ilp_objective(const Potentials<S>&, const Configuration<S>&);    \
  template MapSolution<S> brute_force_map(const Potentials<S>&);              \
  template S brute_force_smoothed_energy(const ChainProblem<S>&, S);          \
  template Table<S> brute_force_max_marginals(const ChainProblem<S>&);

DDCRF_INSTANTIATE(double)
DDCRF_INSTANTIATE(float)
#undef DDCRF_INSTANTIATE

}  // namespace ddcrf
