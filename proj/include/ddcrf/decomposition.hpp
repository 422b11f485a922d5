#pragma once

#include "ddcrf/grid.hpp"

#include <vector>

namespace ddcrf {

// A path sub-problem. Vertices run root to leaf in increasing coordinate;
// edges[k] joins vertices[k] and vertices[k + 1].
struct Chain {
  Index id = 0;
  Orientation orientation = Orientation::horizontal;
  int stride = 1;
  std::vector<Index> vertices;
  std::vector<Index> edges;

  Index size() const { return static_cast<Index>(vertices.size()); }
};

struct Cover {
  Index chain;
  Index position;
};

// Chains covering every grid edge exactly once. coverage[v] lists the
// (chain, position) pairs containing vertex v in ascending chain id.
struct Decomposition {
  GridSpec grid;
  std::vector<Edge> edges;
  std::vector<Chain> chains;
  std::vector<std::vector<Cover>> coverage;
  Index max_chain_length = 0;
  double step_size = 0;  // 1 / max_chain_length

  Index total_positions() const;
};

// One chain per (orientation, stride, line, offset) for every edge family
// that exists on the grid. A family with stride >= its axis extent has no
// edges and contributes no chains. Throws ValidationError on a bad grid.
Decomposition build_decomposition(const GridSpec& grid);

}  // namespace ddcrf
