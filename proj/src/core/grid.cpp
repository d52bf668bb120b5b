#include "coopsim/core/grid.hpp"

#include <cmath>

namespace coopsim::core {

std::optional<Cell> GridSpec::world_to_cell(const Vec2& xy) const {
  const double cx = std::floor((xy.x() - x_min) / resolution);
  const double cy = std::floor((xy.y() - y_min) / resolution);
  if (!(cx >= 0.0 && cy >= 0.0 && cx < width && cy < height)) return std::nullopt;
  return Cell{static_cast<int>(cy), static_cast<int>(cx)};
}

Vec2 GridSpec::cell_to_center(Cell c) const {
  return {x_min + (c.col + 0.5) * resolution, y_min + (c.row + 0.5) * resolution};
}

}  // namespace coopsim::core
