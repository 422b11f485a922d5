#include "ddcrf/decomposition.hpp"
#include "ddcrf/oracle.hpp"
#include "ddcrf/solver.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

using namespace ddcrf;
using test::grid;

TEST_CASE("edge enumeration follows the canonical order") {
  const auto edges = enumerate_edges(grid(3, 3, 2));
  // vertex 0: right 1, down 1, right 2, down 2
  REQUIRE(edges.size() >= 4);
  CHECK(edges[0].target == 1);
  CHECK(edges[1].target == 3);
  CHECK(edges[2].target == 2);
  CHECK(edges[3].target == 6);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    CHECK(edges[k].id == static_cast<Index>(k));
    if (k > 0) CHECK(edges[k - 1].source <= edges[k].source);
  }
  // 3x3: stride 1 -> 12 edges, stride 2 -> 6 edges
  CHECK(edges.size() == 18);
}

TEST_CASE("slot names") {
  const auto g = grid(4, 4, 2);
  CHECK(slot_name(g, 0) == "h1");
  CHECK(slot_name(g, 1) == "v1");
  CHECK(slot_name(g, 2) == "h2");
  CHECK(slot_name(g, 3) == "v2");
}

TEST_CASE("validate_potentials") {
  SUBCASE("well-formed 4x4, L=3") {
    CHECK(validate_potentials(generate_random(3, grid(4, 4, 3))).empty());
  }
  SUBCASE("NaN is reported with its vertex and label") {
    auto p = generate_random(3, grid(4, 4, 3));
    p.unary(5, 2) = std::numeric_limits<double>::quiet_NaN();
    const auto v = validate_potentials(p);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "unary[5][2]");
    CHECK_THROWS_AS(require_valid(p), ValidationError);
  }
  SUBCASE("stride 5 on 4x4") {
    const auto v = validate_grid(grid(4, 4, 2, {1, 5}));
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "strides[1]");
    CHECK(v[0].message.find("stride exceeds grid extent") != std::string::npos);
  }
  SUBCASE("wrong pairwise table count") {
    auto p = generate_random(1, grid(3, 3, 2));
    p.pairwise.pop_back();
    CHECK_FALSE(validate_potentials(p).empty());
  }
  SUBCASE("bad shapes and labels") {
    CHECK_FALSE(validate_grid(grid(0, 3, 2, {1})).empty());
    CHECK_FALSE(validate_grid(grid(3, 3, 0, {1})).empty());
    CHECK_FALSE(validate_grid(grid(3, 3, 2, {2, 1})).empty());
    CHECK_FALSE(validate_grid(grid(3, 3, 2, {})).empty());
  }
}

TEST_CASE("decomposition of 4x4 with strides {1,2}") {
  const auto d = build_decomposition(grid(4, 4, 2));
  CHECK(d.chains.size() == 24);
  std::map<Index, int> by_length;
  for (const auto& c : d.chains) ++by_length[c.size()];
  CHECK(by_length[4] == 8);
  CHECK(by_length[2] == 16);
  CHECK(d.edges.size() == 40);
  for (const auto& cover : d.coverage) CHECK(cover.size() == 4);
  CHECK(d.step_size == doctest::Approx(0.25));
  CHECK(d.max_chain_length == 4);
}

TEST_CASE("1x5 with stride 1 is a single chain") {
  const auto d = build_decomposition(grid(1, 5, 2, {1}));
  REQUIRE(d.chains.size() == 1);
  CHECK(d.chains[0].size() == 5);
  CHECK(d.chains[0].orientation == Orientation::horizontal);
  CHECK(d.step_size == doctest::Approx(0.2));
}

TEST_CASE("8x8 step size") {
  CHECK(build_decomposition(grid(8, 8, 2)).step_size == doctest::Approx(0.125));
}

TEST_CASE("chains link consecutive vertices through their edges") {
  for (const auto& g : {grid(5, 7, 2), grid(9, 9, 2), grid(2, 6, 3, {1, 3}), grid(6, 2, 2, {1, 2, 4})}) {
    const auto d = build_decomposition(g);
    for (const auto& c : d.chains) {
      REQUIRE(c.edges.size() + 1 == c.vertices.size());
      for (std::size_t k = 0; k < c.edges.size(); ++k) {
        const Edge& e = d.edges[static_cast<std::size_t>(c.edges[k])];
        CHECK(e.source == c.vertices[k]);
        CHECK(e.target == c.vertices[k + 1]);
      }
    }
  }
}

TEST_CASE("edge cover is exact and vertex cover sums match up to 9x9") {
  for (Index m = 2; m <= 9; ++m) {
    for (Index n = 2; n <= 9; ++n) {
      const auto g = grid(m, n, 2);
      if (!validate_grid(g).empty()) continue;
      const auto d = build_decomposition(g);
      std::vector<int> hits(d.edges.size(), 0);
      Index positions = 0;
      for (const auto& c : d.chains) {
        positions += c.size();
        for (Index e : c.edges) ++hits[static_cast<std::size_t>(e)];
      }
      for (int h : hits) CHECK(h == 1);
      Index coverage = 0;
      for (std::size_t v = 0; v < d.coverage.size(); ++v) {
        coverage += static_cast<Index>(d.coverage[v].size());
        if (m >= 3 && n >= 3) CHECK(d.coverage[v].size() == 4);
        for (std::size_t k = 1; k < d.coverage[v].size(); ++k)
          CHECK(d.coverage[v][k - 1].chain < d.coverage[v][k].chain);
        for (const Cover& c : d.coverage[v])
          CHECK(d.chains[static_cast<std::size_t>(c.chain)].vertices[static_cast<std::size_t>(c.position)] ==
                static_cast<Index>(v));
      }
      CHECK(positions == coverage);
      CHECK(positions == d.total_positions());
      for (const auto& cover : d.coverage) CHECK(cover.size() >= 2);
      CHECK(d.step_size * static_cast<double>(d.max_chain_length) == 1.0);
    }
  }
}

TEST_CASE("replicate_unaries splits uniformly and sums back") {
  SUBCASE("psi = [4, 8] over four chains") {
    auto p = Potentials<double>::zeros(grid(3, 3, 2), PairwiseMode::tied);
    p.unary.row(4) << 4, 8;
    const auto problem = Problem<double>::create(p);
    const auto psi = replicate_unaries(*problem);
    const auto& d = problem->decomposition();
    REQUIRE(d.coverage[4].size() == 4);
    for (const Cover& c : d.coverage[4]) {
      CHECK(psi[static_cast<std::size_t>(c.chain)](c.position, 0) == 1.0);
      CHECK(psi[static_cast<std::size_t>(c.chain)](c.position, 1) == 2.0);
    }
  }
  SUBCASE("single chain is the identity") {
    const auto p = generate_random(4, grid(1, 6, 3, {1}));
    const auto problem = Problem<double>::create(p);
    const auto psi = replicate_unaries(*problem);
    REQUIRE(psi.size() == 1);
    CHECK(psi[0] == p.unary);
  }
  SUBCASE("sum over coverage reproduces psi") {
    const auto p = generate_random(5, grid(5, 6, 3));
    const auto state = make_dual_state(Problem<double>::create(p), Mode::max);
    CHECK(reparameterization_error(state) <= 4 * std::numeric_limits<double>::epsilon() * p.unary.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("energy") {
  SUBCASE("all-zero potentials") {
    const auto p = Potentials<double>::zeros(grid(3, 4, 3), PairwiseMode::dense);
    CHECK(energy(p, Labeling(12, 2)) == 0.0);
  }
  SUBCASE("two-node chain") {
    const auto p = test::two_node_potentials();
    CHECK(energy(p, {1, 1}) == 3.0);
    CHECK(energy(p, {0, 0}) == 0.0);
    CHECK(energy(p, {1, 0}) == 1.0);
  }
  SUBCASE("errors") {
    const auto p = test::two_node_potentials();
    CHECK_THROWS_AS(energy(p, {0, 2}), std::out_of_range);
    CHECK_THROWS_AS(energy(p, {0, -1}), std::out_of_range);
    CHECK_THROWS_AS(energy(p, {0}), std::invalid_argument);
  }
  SUBCASE("matches the ILP objective of the one-hot encoding on 3x3, L=3") {
    SplitMix64 rng(11);
    for (auto mode : {PairwiseMode::tied, PairwiseMode::dense}) {
      RandomSpec spec;
      spec.pairwise = mode;
      const auto p = generate_random(7, grid(3, 3, 3), spec);
      for (int trial = 0; trial < 50; ++trial) {
        Configuration<double> x;
        for (int v = 0; v < 9; ++v) x.labels.push_back(static_cast<Label>(rng.next() % 3));
        CHECK(x.consistent(p.grid));
        CHECK(energy(p, x.labels) == doctest::Approx(ilp_objective(p, x)).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("dense and tied storage agree when dense copies the tied tables") {
  const auto tied = generate_random(9, grid(4, 3, 2));
  auto dense = Potentials<double>::zeros(tied.grid, PairwiseMode::dense);
  dense.unary = tied.unary;
  for (const Edge& e : enumerate_edges(tied.grid)) dense.pairwise[static_cast<std::size_t>(e.id)] = tied.edge_table(e);
  Labeling x{0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 1, 0};
  CHECK(energy(tied, x) == energy(dense, x));
}
