#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string_view>
#include <vector>

namespace ddcrf {

using Index = Eigen::Index;
using Label = int;

// Row-major so that one row (one vertex, all labels) is contiguous.
template <typename Scalar>
using Table = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using LabelTable = Eigen::Matrix<Label, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A labeling assigns one label per vertex, row-major over the grid.
using Labeling = std::vector<Label>;

// Hard max (max-product) or negative-entropy smoothed max (log-sum-exp).
enum class Mode { max, smoothed };

enum class Orientation : std::uint8_t { horizontal, vertical };

constexpr std::string_view to_string(Mode mode) {
  return mode == Mode::max ? "max" : "smoothed";
}

}  // namespace ddcrf
