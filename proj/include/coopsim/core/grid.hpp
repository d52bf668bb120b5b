#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopsim/core/pose.hpp"

namespace coopsim::core {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Row-major BEV raster. Cell (0,0) has its lower-left corner at
// (x_min, y_min); columns run along +x, rows along +y.
struct GridSpec {
  int width = 200;
  int height = 200;
  double resolution = 0.5;
  double x_min = -50.0;
  double y_min = -50.0;

  bool is_valid() const { return width > 0 && height > 0 && resolution > 0.0; }
  std::size_t cell_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  double x_max() const { return x_min + width * resolution; }
  double y_max() const { return y_min + height * resolution; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * width + c.col; }
  Cell cell_of(std::size_t index) const {
    return {static_cast<int>(index / width), static_cast<int>(index % width)};
  }

  std::optional<Cell> world_to_cell(const Vec2& xy) const;
  Vec2 cell_to_center(Cell c) const;

  // 200x200 at 0.5 m over [-50,50]^2.
  static GridSpec ego_default() { return {}; }
  // 200x200 at 0.5 m over x in [0,100], y in [-50,50].
  static GridSpec infra_default() { return {200, 200, 0.5, 0.0, -50.0}; }

  bool operator==(const GridSpec&) const = default;
};

inline std::optional<Cell> world_to_cell(const GridSpec& grid, const Vec2& xy) { return grid.world_to_cell(xy); }
inline Vec2 cell_to_center(const GridSpec& grid, Cell c) { return grid.cell_to_center(c); }

template <class T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(const GridSpec& spec, T fill = T{}) : spec_(spec), data_(spec.cell_count(), fill) {
    if (!spec.is_valid()) throw std::invalid_argument("invalid GridSpec");
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(Cell c) { return data_[spec_.index(c)]; }
  const T& at(Cell c) const { return data_[spec_.index(c)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  GridSpec spec_;
  std::vector<T> data_;
};

using ProbGrid = Grid<float>;
using MaskGrid = Grid<std::uint8_t>;

// Throws std::invalid_argument when the two grids disagree on shape.
template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.spec().width != b.spec().width || a.spec().height != b.spec().height) {
    throw std::invalid_argument(std::string(what) + ": grid dimension mismatch");
  }
}

}  // namespace coopsim::core
