#include "ddcrf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ddcrf {

EdgeSlot slot_info(const GridSpec& grid, int slot) {
  return {slot % 2 == 0 ? Orientation::horizontal : Orientation::vertical,
          grid.strides.at(static_cast<std::size_t>(slot / 2))};
}

std::string slot_name(const GridSpec& grid, int slot) {
  const EdgeSlot s = slot_info(grid, slot);
  return (s.orientation == Orientation::horizontal ? "h" : "v") + std::to_string(s.stride);
}

std::vector<Edge> enumerate_edges(const GridSpec& grid) {
  std::vector<Edge> edges;
  const int slots = grid.num_slots();
  for (Index r = 0; r < grid.height; ++r) {
    for (Index c = 0; c < grid.width; ++c) {
      for (int s = 0; s < slots; ++s) {
        const EdgeSlot info = slot_info(grid, s);
        Index tr = r, tc = c;
        if (info.orientation == Orientation::horizontal)
          tc += info.stride;
        else
          tr += info.stride;
        if (tr >= grid.height || tc >= grid.width) continue;
        edges.push_back({static_cast<Index>(edges.size()), grid.vertex(r, c), grid.vertex(tr, tc), s});
      }
    }
  }
  return edges;
}

template <typename Scalar>
Potentials<Scalar> Potentials<Scalar>::zeros(const GridSpec& grid, PairwiseMode mode) {
  Potentials p;
  p.grid = grid;
  p.pairwise_mode = mode;
  p.unary = Table<Scalar>::Zero(grid.num_vertices(), grid.num_labels);
  const std::size_t count = mode == PairwiseMode::tied
                                ? static_cast<std::size_t>(grid.num_slots())
                                : enumerate_edges(grid).size();
  p.pairwise.assign(count, Table<Scalar>::Zero(grid.num_labels, grid.num_labels));
  return p;
}

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << violations.size() << " validation error(s)";
  for (const auto& v : violations) os << "; " << v.field << ": " << v.message;
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

std::vector<Violation> validate_grid(const GridSpec& grid) {
  std::vector<Violation> out;
  if (grid.height < 1) out.push_back({"height", "must be >= 1"});
  if (grid.width < 1) out.push_back({"width", "must be >= 1"});
  if (grid.num_labels < 1) out.push_back({"labels", "must be >= 1"});
  if (grid.strides.empty()) out.push_back({"strides", "at least one stride is required"});
  const Index extent = std::max(grid.height, grid.width);
  for (std::size_t k = 0; k < grid.strides.size(); ++k) {
    const int s = grid.strides[k];
    const std::string field = "strides[" + std::to_string(k) + "]";
    if (s < 1) {
      out.push_back({field, "stride must be positive"});
    } else if (s >= extent) {
      out.push_back({field, "stride exceeds grid extent (stride " + std::to_string(s) +
                                ", extent " + std::to_string(extent) + ")"});
    }
    if (k > 0 && s <= grid.strides[k - 1])
      out.push_back({field, "strides must be unique and sorted ascending"});
  }
  return out;
}

template <typename Scalar>
std::vector<Violation> validate_potentials(const Potentials<Scalar>& p) {
  std::vector<Violation> out = validate_grid(p.grid);
  if (!out.empty()) return out;

  const Index V = p.grid.num_vertices();
  const Index L = p.grid.num_labels;
  if (p.unary.rows() != V || p.unary.cols() != L) {
    out.push_back({"unary", "expected shape (" + std::to_string(V) + ", " + std::to_string(L) +
                                "), got (" + std::to_string(p.unary.rows()) + ", " +
                                std::to_string(p.unary.cols()) + ")"});
  } else {
    for (Index v = 0; v < V; ++v)
      for (Index l = 0; l < L; ++l)
        if (!std::isfinite(p.unary(v, l)))
          out.push_back({"unary[" + std::to_string(v) + "][" + std::to_string(l) + "]",
                         "non-finite value at vertex " + std::to_string(v) + ", label " +
                             std::to_string(l)});
  }

  const std::size_t expected = p.pairwise_mode == PairwiseMode::tied
                                   ? static_cast<std::size_t>(p.grid.num_slots())
                                   : enumerate_edges(p.grid).size();
  if (p.pairwise.size() != expected) {
    out.push_back({"pairwise", "expected " + std::to_string(expected) + " tables, got " +
                                   std::to_string(p.pairwise.size())});
    return out;
  }
  for (std::size_t e = 0; e < p.pairwise.size(); ++e) {
    const auto& t = p.pairwise[e];
    const std::string field = "pairwise[" + std::to_string(e) + "]";
    if (t.rows() != L || t.cols() != L) {
      out.push_back({field, "expected an L x L table"});
      continue;
    }
    for (Index a = 0; a < L; ++a)
      for (Index b = 0; b < L; ++b)
        if (!std::isfinite(t(a, b)))
          out.push_back({field + "[" + std::to_string(a) + "][" + std::to_string(b) + "]",
                         "non-finite value"});
  }
  return out;
}

template <typename Scalar>
void require_valid(const Potentials<Scalar>& p) {
  auto violations = validate_potentials(p);
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

template <typename Scalar>
Scalar energy(const Potentials<Scalar>& p, const Labeling& x) {
  if (static_cast<Index>(x.size()) != p.grid.num_vertices())
    throw std::invalid_argument("labeling length does not match the grid");
  for (std::size_t v = 0; v < x.size(); ++v)
    if (x[v] < 0 || x[v] >= p.grid.num_labels)
      throw std::out_of_range("label " + std::to_string(x[v]) + " at vertex " + std::to_string(v) +
                              " is outside [0, " + std::to_string(p.grid.num_labels) + ")");
  Scalar total = 0;
  for (std::size_t v = 0; v < x.size(); ++v) total += p.unary(static_cast<Index>(v), x[v]);
  for (const Edge& e : enumerate_edges(p.grid)) total += p.edge_table(e)(x[e.source], x[e.target]);
  return total;
}

#define DDCRF_INSTANTIATE(S)                                                   \
  template struct Potentials<S>;                                             \
  template std::vector<Violation> validate_potentials(const Potentials<S>&); \
  template void require_valid(const Potentials<S>&);                         \
  template S energy(const Potentials<S>&, const Labeling&);

DDCRF_INSTANTIATE(double)
DDCRF_INSTANTIATE(float)
#undef DDCRF_INSTANTIATE

}  // namespace ddcrf
