#include "ddcrf/decomposition.hpp"

#include <algorithm>

namespace ddcrf {

Index Decomposition::total_positions() const {
  Index total = 0;
  for (const auto& c : chains) total += c.size();
  return total;
}

Decomposition build_decomposition(const GridSpec& grid) {
  if (auto violations = validate_grid(grid); !violations.empty())
    throw ValidationError(std::move(violations));

  Decomposition d;
  d.grid = grid;
  d.edges = enumerate_edges(grid);

  // edge_at[v * slots + s] is the edge leaving v in slot s, or -1.
  const int slots = grid.num_slots();
  std::vector<Index> edge_at(static_cast<std::size_t>(grid.num_vertices() * slots), -1);
  for (const Edge& e : d.edges) edge_at[static_cast<std::size_t>(e.source * slots + e.slot)] = e.id;

  for (int slot = 0; slot < slots; ++slot) {
    const EdgeSlot info = slot_info(grid, slot);
    const bool horizontal = info.orientation == Orientation::horizontal;
    const Index along = grid.extent(info.orientation);
    const Index lines = horizontal ? grid.height : grid.width;
    if (info.stride >= along) continue;

    for (Index line = 0; line < lines; ++line) {
      for (Index offset = 0; offset < info.stride; ++offset) {
        Chain chain;
        chain.id = static_cast<Index>(d.chains.size());
        chain.orientation = info.orientation;
        chain.stride = info.stride;
        for (Index pos = offset; pos < along; pos += info.stride) {
          const Index v = horizontal ? grid.vertex(line, pos) : grid.vertex(pos, line);
          if (!chain.vertices.empty())
            chain.edges.push_back(
                edge_at[static_cast<std::size_t>(chain.vertices.back() * slots + slot)]);
          chain.vertices.push_back(v);
        }
        d.chains.push_back(std::move(chain));
      }
    }
  }

  d.coverage.resize(static_cast<std::size_t>(grid.num_vertices()));
  for (const Chain& c : d.chains) {
    d.max_chain_length = std::max(d.max_chain_length, c.size());
    for (Index k = 0; k < c.size(); ++k)
      d.coverage[static_cast<std::size_t>(c.vertices[static_cast<std::size_t>(k)])].push_back({c.id, k});
  }
  d.step_size = 1.0 / static_cast<double>(d.max_chain_length);
  return d;
}

}  // namespace ddcrf
