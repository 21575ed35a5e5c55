#pragma once

#include <vector>

#include "spikesolve/geometry.hpp"

namespace spikesolve {

// A real-valued field on an acquisition grid: data y, predictions w = Phi mu + b,
// dual variables p, masks (0/1 values).
struct GridField {
  Grid grid;
  std::vector<double> values;

  GridField() = default;
  explicit GridField(const Grid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}
  GridField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw ShapeMismatch("GridField: value count does not match grid size");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }
};

inline void require_same_grid(const GridField& a, const GridField& b,
                              const char* where) {
  if (!(a.grid == b.grid)) throw GridMismatch(std::string(where) + ": grid mismatch");
}

inline double dot(const GridField& a, const GridField& b) {
  require_same_grid(a, b, "dot");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a.values[j] * b.values[j];
  return s;
}

}  // namespace spikesolve
