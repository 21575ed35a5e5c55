#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "spikesolve/common.hpp"

namespace spikesolve {

// ---------------------------------------------------------------------------
// Domain: an axis-aligned box in R^d, d in {1,2,3}.
// ---------------------------------------------------------------------------

struct Domain {
  int dim = 1;
  Vec lower;
  Vec upper;

  Domain() = default;
  Domain(Vec lo, Vec hi) : dim(lo.dim), lower(lo), upper(hi) {
    if (lo.dim != hi.dim) throw DimensionMismatch("Domain: bound dims differ");
    if (dim < 1 || dim > 3) throw ConfigError("Domain: dim must be 1, 2 or 3");
    for (int k = 0; k < dim; ++k)
      if (!(lower[k] < upper[k]))
        throw ConfigError("Domain: lower must be strictly below upper");
  }

  static Domain unit(int d) {
    Vec lo = Vec::zero(d), hi = Vec::zero(d);
    for (int k = 0; k < d; ++k) hi[k] = 1.0;
    return Domain(lo, hi);
  }

  double width(int k) const { return upper[k] - lower[k]; }
  double max_width() const {
    double w = 0.0;
    for (int k = 0; k < dim; ++k) w = std::max(w, width(k));
    return w;
  }

  bool contains(const Vec& x) const {
    if (x.dim != dim) return false;
    for (int k = 0; k < dim; ++k)
      if (x[k] < lower[k] || x[k] > upper[k]) return false;
    return true;
  }
};

// Componentwise clamp onto the closed box. Identity on interior points.
inline Vec project_into_domain(Vec x, const Domain& dom) {
  if (x.dim != dom.dim) throw DimensionMismatch("project_into_domain: dim mismatch");
  for (int k = 0; k < dom.dim; ++k)
    x[k] = std::clamp(x[k], dom.lower[k], dom.upper[k]);
  return x;
}

// ---------------------------------------------------------------------------
// Grid: uniform per-axis sampling of a Domain, samples at cell centers
// (pixel/voxel semantics). Row-major flattening, last axis contiguous.
// ---------------------------------------------------------------------------

struct Grid {
  Domain domain;
  std::array<int, 3> shape{1, 1, 1};

  Grid() = default;
  Grid(Domain dom, std::array<int, 3> shp) : domain(dom), shape(shp) {
    for (int k = 0; k < dom.dim; ++k)
      if (shape[k] < 1) throw ConfigError("Grid: shape entries must be >= 1");
    for (int k = dom.dim; k < 3; ++k) shape[k] = 1;
  }

  int dim() const { return domain.dim; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int k = 0; k < dim(); ++k) n *= static_cast<std::size_t>(shape[k]);
    return n;
  }

  double spacing(int k) const { return domain.width(k) / shape[k]; }

  // Cell-center coordinate of sample i along axis k.
  double coord(int k, int i) const {
    return domain.lower[k] + (i + 0.5) * spacing(k);
  }

  std::vector<double> axis_coords(int k) const {
    std::vector<double> c(static_cast<std::size_t>(shape[k]));
    for (int i = 0; i < shape[k]; ++i) c[i] = coord(k, i);
    return c;
  }

  std::size_t flat_index(int i0, int i1 = 0, int i2 = 0) const {
    return (static_cast<std::size_t>(i0) * shape[1] + i1) * shape[2] + i2;
  }

  Vec point(std::size_t flat) const {
    Vec x = Vec::zero(dim());
    const std::size_t n2 = static_cast<std::size_t>(shape[2]);
    const std::size_t n1 = static_cast<std::size_t>(shape[1]);
    const std::size_t i2 = flat % n2;
    const std::size_t i1 = (flat / n2) % n1;
    const std::size_t i0 = flat / (n2 * n1);
    x[0] = coord(0, static_cast<int>(i0));
    if (dim() > 1) x[1] = coord(1, static_cast<int>(i1));
    if (dim() > 2) x[2] = coord(2, static_cast<int>(i2));
    return x;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.domain.dim == b.domain.dim && a.shape == b.shape &&
           a.domain.lower == b.domain.lower && a.domain.upper == b.domain.upper;
  }
};

// ---------------------------------------------------------------------------
// DiracMeasure: finite weighted sum of Diracs with continuous positions.
// Amplitudes are stored signed; non-negativity is a solver-level constraint.
// ---------------------------------------------------------------------------

struct DiracMeasure {
  int dim = 1;
  std::vector<Vec> positions;
  std::vector<double> amplitudes;

  DiracMeasure() = default;
  explicit DiracMeasure(int d) : dim(d) {}

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
};

// Sum of |a_i|; the TV norm of a discrete measure.
inline double tv_norm(const DiracMeasure& mu) {
  double s = 0.0;
  for (double a : mu.amplitudes) s += std::abs(a);
  return s;
}

// Keep spikes with |a_i| > amp_tol, order preserved.
inline DiracMeasure prune(const DiracMeasure& mu, double amp_tol) {
  if (amp_tol < 0.0) throw ConfigError("prune: amp_tol must be >= 0");
  DiracMeasure out(mu.dim);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (std::abs(mu.amplitudes[i]) > amp_tol) {
      out.positions.push_back(mu.positions[i]);
      out.amplitudes.push_back(mu.amplitudes[i]);
    }
  }
  return out;
}

// Append a spike. An exactly coincident position merges by summing amplitudes,
// preserving the x_i != x_j invariant.
inline DiracMeasure add_spike(const DiracMeasure& mu, const Vec& x, double a,
                              const Domain& dom) {
  if (!dom.contains(x)) throw PositionOutOfDomain("add_spike: x outside domain");
  DiracMeasure out = mu;
  if (out.empty()) out.dim = dom.dim;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.positions[i] == x) {
      out.amplitudes[i] += a;
      return out;
    }
  }
  out.positions.push_back(x);
  out.amplitudes.push_back(a);
  return out;
}

}  // namespace spikesolve
