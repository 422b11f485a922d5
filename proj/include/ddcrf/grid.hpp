#pragma once

#include "ddcrf/types.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace ddcrf {

// An M x N grid with horizontal and vertical edges at every listed stride.
// Vertex (row, col) has flat index row * width + col.
struct GridSpec {
  Index height = 1;
  Index width = 1;
  int num_labels = 1;
  std::vector<int> strides{1, 2};

  Index num_vertices() const { return height * width; }
  Index vertex(Index row, Index col) const { return row * width + col; }
  Index row_of(Index v) const { return v / width; }
  Index col_of(Index v) const { return v % width; }

  // Number of (orientation, stride) edge families: two per stride.
  int num_slots() const { return 2 * static_cast<int>(strides.size()); }
  Index extent(Orientation o) const { return o == Orientation::horizontal ? width : height; }

  bool operator==(const GridSpec&) const = default;
};

// Slot s holds orientation (s % 2) at strides[s / 2]; the canonical order is
// [right stride0, down stride0, right stride1, down stride1, ...].
struct EdgeSlot {
  Orientation orientation;
  int stride;
};
EdgeSlot slot_info(const GridSpec& grid, int slot);
std::string slot_name(const GridSpec& grid, int slot);  // "h1", "v2", ...

struct Edge {
  Index id;
  Index source;  // the endpoint with the smaller coordinate
  Index target;
  int slot;
};

// Canonical edge order: vertex-major by source; per source, slots in order,
// omitting out-of-range targets.
std::vector<Edge> enumerate_edges(const GridSpec& grid);

enum class PairwiseMode { tied, dense };

// Unary scores psi(v, l) and pairwise scores phi(l_source, l_target).
// Tied mode stores one L x L table per slot; dense mode one per edge.
template <typename Scalar>
struct Potentials {
  GridSpec grid;
  Table<Scalar> unary;
  PairwiseMode pairwise_mode = PairwiseMode::tied;
  std::vector<Table<Scalar>> pairwise;

  const Table<Scalar>& edge_table(const Edge& e) const {
    return pairwise_mode == PairwiseMode::tied ? pairwise[e.slot] : pairwise[e.id];
  }

  static Potentials zeros(const GridSpec& grid, PairwiseMode mode);
};

struct Violation {
  std::string field;
  std::string message;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

std::vector<Violation> validate_grid(const GridSpec& grid);

// Collects every violation; never throws.
template <typename Scalar>
std::vector<Violation> validate_potentials(const Potentials<Scalar>& p);

// Throws ValidationError if validate_potentials reports anything.
template <typename Scalar>
void require_valid(const Potentials<Scalar>& p);

// Sum of unary and pairwise scores of a labeling. Throws std::out_of_range
// for labels outside [0, L) and std::invalid_argument on a length mismatch.
template <typename Scalar>
Scalar energy(const Potentials<Scalar>& p, const Labeling& x);

}  // namespace ddcrf
