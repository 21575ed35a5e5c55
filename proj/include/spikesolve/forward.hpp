#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "spikesolve/field.hpp"
#include "spikesolve/geometry.hpp"

namespace spikesolve {

// ---------------------------------------------------------------------------
// Gaussian PSF with per-axis widths, analytic normalization (2 pi sigma^2)^{-1/2}
// per axis. Separable, which the grid evaluations below exploit.
// ---------------------------------------------------------------------------

struct GaussianPSF {
  int dim = 1;
  std::array<double, 3> sigma{1.0, 1.0, 1.0};

  GaussianPSF() = default;
  GaussianPSF(int d, std::array<double, 3> s) : dim(d), sigma(s) {
    for (int k = 0; k < dim; ++k)
      if (!(sigma[k] > 0.0)) throw NonPositiveInput("GaussianPSF: sigma must be > 0");
  }
  static GaussianPSF isotropic(int d, double s) {
    return GaussianPSF(d, {s, s, s});
  }

  // 1-d factor value at offset t along axis k.
  double factor(int k, double t) const {
    const double s = sigma[k];
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s * s);
    return norm * std::exp(-t * t / (2.0 * s * s));
  }
};

inline double psf_value(const GaussianPSF& psf, const Vec& offset) {
  if (offset.dim != psf.dim) throw DimensionMismatch("psf_value: dim mismatch");
  double v = 1.0;
  for (int k = 0; k < psf.dim; ++k) v *= psf.factor(k, offset[k]);
  return v;
}

// FWHM-based sigma calibration from optics parameters:
// FWHM = 0.61 * wavelength / NA and FWHM = 2.355 * sigma, axial sigma_z scaled
// by z_factor. Returns (sigma_x, sigma_y, sigma_z) in the wavelength's unit.
inline std::array<double, 3> calibrate_sigma_from_fwhm(double wavelength,
                                                       double numerical_aperture,
                                                       double z_factor = 2.0) {
  if (!(wavelength > 0.0) || !(numerical_aperture > 0.0) || !(z_factor > 0.0))
    throw NonPositiveInput("calibrate_sigma_from_fwhm: inputs must be positive");
  const double fwhm = 0.61 * wavelength / numerical_aperture;
  const double sx = fwhm / 2.355;
  return {sx, sx, z_factor * sx};
}

// ---------------------------------------------------------------------------
// ForwardModel: Phi on discrete measures, Phi* on grid fields, and analytic
// spatial derivatives. Quadrature weights are identically 1 (plain sums over
// samples), so the discrete KL below is the Poisson log-likelihood over
// pixels/voxels.
// ---------------------------------------------------------------------------

struct ForwardModel {
  GaussianPSF psf;
  Grid grid;
  GridField background;
  // Optional per-axis evaluation cutoff in units of sigma; disabled by default
  // (exact evaluation).
  std::optional<double> cutoff_sigmas;

  ForwardModel() = default;
  ForwardModel(GaussianPSF p, Grid g, double constant_background)
      : psf(p), grid(g), background(g, constant_background) {
    validate();
  }
  ForwardModel(GaussianPSF p, Grid g, GridField bg)
      : psf(p), grid(g), background(std::move(bg)) {
    if (!(background.grid == grid))
      throw GridMismatch("ForwardModel: background grid mismatch");
    validate();
  }

  void validate() const {
    if (psf.dim != grid.dim())
      throw DimensionMismatch("ForwardModel: psf/grid dim mismatch");
    for (double b : background.values)
      if (b < 0.0) throw ConfigError("ForwardModel: background must be >= 0");
  }

  int dim() const { return grid.dim(); }

  double min_background() const {
    double m = kInf;
    for (double b : background.values) m = std::min(m, b);
    return m;
  }
};

namespace detail {

// Per-axis PSF factor vector exp(-(c_i - x)^2 / 2 sigma^2) * norm over the grid
// coordinates of axis k. Entries beyond the cutoff radius are zeroed.
inline void axis_factors(const ForwardModel& m, int k, double xk,
                         std::vector<double>& out) {
  const int n = m.grid.shape[k];
  out.resize(static_cast<std::size_t>(n));
  const double s = m.psf.sigma[k];
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s * s);
  const double inv2s2 = 1.0 / (2.0 * s * s);
  const double cut = m.cutoff_sigmas ? *m.cutoff_sigmas * s : kInf;
  for (int i = 0; i < n; ++i) {
    const double t = m.grid.coord(k, i) - xk;
    out[i] = (std::abs(t) <= cut) ? norm * std::exp(-t * t * inv2s2) : 0.0;
  }
}

}  // namespace detail

// w_j = sum_i a_i psf(s_j - x_i) + b_j. Spike contributions are accumulated in
// spike order onto the background so that re-evaluations with cached kernel
// columns reproduce identical floats.
inline GridField apply_forward(const ForwardModel& m, const DiracMeasure& mu) {
  if (!mu.empty() && mu.dim != m.dim())
    throw DimensionMismatch("apply_forward: measure dim mismatch");
  GridField w = m.background;
  const int d = m.dim();
  std::vector<double> f0, f1, f2;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Vec& x = mu.positions[i];
    const double a = mu.amplitudes[i];
    detail::axis_factors(m, 0, x[0], f0);
    if (d == 1) {
      for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) w.values[i0] += a * f0[i0];
    } else if (d == 2) {
      detail::axis_factors(m, 1, x[1], f1);
      std::size_t j = 0;
      for (int i0 = 0; i0 < m.grid.shape[0]; ++i0)
        for (int i1 = 0; i1 < m.grid.shape[1]; ++i1, ++j)
          w.values[j] += a * (f0[i0] * f1[i1]);
    } else {
      detail::axis_factors(m, 1, x[1], f1);
      detail::axis_factors(m, 2, x[2], f2);
      std::size_t j = 0;
      for (int i0 = 0; i0 < m.grid.shape[0]; ++i0)
        for (int i1 = 0; i1 < m.grid.shape[1]; ++i1) {
          const double f01 = f0[i0] * f1[i1];
          for (int i2 = 0; i2 < m.grid.shape[2]; ++i2, ++j)
            w.values[j] += a * (f01 * f2[i2]);
        }
    }
  }
  return w;
}

// Kernel column Phi delta_x sampled on the grid (no background).
inline std::vector<double> kernel_column(const ForwardModel& m, const Vec& x) {
  DiracMeasure one(m.dim());
  one.positions.push_back(x);
  one.amplitudes.push_back(1.0);
  ForwardModel zero_bg = m;
  zero_bg.background = GridField(m.grid, 0.0);
  return apply_forward(zero_bg, one).values;
}

// <p, phi_x>_grid = sum_j p_j psf(s_j - x), evaluated by per-axis contraction.
inline double adjoint_value(const ForwardModel& m, const GridField& p, const Vec& x) {
  if (!(p.grid == m.grid)) throw GridMismatch("adjoint_value: field grid mismatch");
  if (x.dim != m.dim()) throw DimensionMismatch("adjoint_value: point dim mismatch");
  const int d = m.dim();
  std::vector<double> f0, f1, f2;
  detail::axis_factors(m, 0, x[0], f0);
  if (d == 1) {
    double s = 0.0;
    for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) s += p.values[i0] * f0[i0];
    return s;
  }
  detail::axis_factors(m, 1, x[1], f1);
  if (d == 2) {
    double s = 0.0;
    std::size_t j = 0;
    for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) {
      double row = 0.0;
      for (int i1 = 0; i1 < m.grid.shape[1]; ++i1, ++j) row += p.values[j] * f1[i1];
      s += f0[i0] * row;
    }
    return s;
  }
  detail::axis_factors(m, 2, x[2], f2);
  double s = 0.0;
  std::size_t j = 0;
  for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) {
    double plane = 0.0;
    for (int i1 = 0; i1 < m.grid.shape[1]; ++i1) {
      double row = 0.0;
      for (int i2 = 0; i2 < m.grid.shape[2]; ++i2, ++j) row += p.values[j] * f2[i2];
      plane += f1[i1] * row;
    }
    s += f0[i0] * plane;
  }
  return s;
}

// Exact gradient of adjoint_value in x:
// sum_j p_j psf(s_j - x) * ((s_j - x)_k / sigma_k^2)_k.
inline Vec adjoint_gradient(const ForwardModel& m, const GridField& p, const Vec& x) {
  if (!(p.grid == m.grid)) throw GridMismatch("adjoint_gradient: field grid mismatch");
  if (x.dim != m.dim()) throw DimensionMismatch("adjoint_gradient: point dim mismatch");
  const int d = m.dim();
  std::array<std::vector<double>, 3> f;    // factor vectors
  std::array<std::vector<double>, 3> df;   // factor * (s - x)/sigma^2
  for (int k = 0; k < d; ++k) {
    detail::axis_factors(m, k, x[k], f[k]);
    const int n = m.grid.shape[k];
    df[k].resize(static_cast<std::size_t>(n));
    const double inv_s2 = 1.0 / (m.psf.sigma[k] * m.psf.sigma[k]);
    for (int i = 0; i < n; ++i)
      df[k][i] = f[k][i] * (m.grid.coord(k, i) - x[k]) * inv_s2;
  }
  Vec g = Vec::zero(d);
  for (int k = 0; k < d; ++k) {
    double s = 0.0;
    std::size_t j = 0;
    if (d == 1) {
      for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) s += p.values[i0] * df[0][i0];
    } else if (d == 2) {
      const auto& a0 = (k == 0) ? df[0] : f[0];
      const auto& a1 = (k == 1) ? df[1] : f[1];
      for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) {
        double row = 0.0;
        for (int i1 = 0; i1 < m.grid.shape[1]; ++i1, ++j) row += p.values[j] * a1[i1];
        s += a0[i0] * row;
      }
    } else {
      const auto& a0 = (k == 0) ? df[0] : f[0];
      const auto& a1 = (k == 1) ? df[1] : f[1];
      const auto& a2 = (k == 2) ? df[2] : f[2];
      for (int i0 = 0; i0 < m.grid.shape[0]; ++i0) {
        double plane = 0.0;
        for (int i1 = 0; i1 < m.grid.shape[1]; ++i1) {
          double row = 0.0;
          for (int i2 = 0; i2 < m.grid.shape[2]; ++i2, ++j) row += p.values[j] * a2[i2];
          plane += a1[i1] * row;
        }
        s += a0[i0] * plane;
      }
    }
    g[k] = s;
  }
  return g;
}

// Gradient of (a, x) -> <g, Phi mu_{a,x}>_grid:
// d/da_i = <g, phi_{x_i}> and d/dx_i = a_i * grad_x <g, phi_{x_i}>.
struct JacobianProducts {
  std::vector<double> amp_grads;
  std::vector<Vec> pos_grads;
};

inline JacobianProducts forward_jacobian_products(const ForwardModel& m,
                                                  const DiracMeasure& mu,
                                                  const GridField& g) {
  if (!(g.grid == m.grid))
    throw GridMismatch("forward_jacobian_products: field grid mismatch");
  JacobianProducts jp;
  jp.amp_grads.reserve(mu.size());
  jp.pos_grads.reserve(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    jp.amp_grads.push_back(adjoint_value(m, g, mu.positions[i]));
    jp.pos_grads.push_back(mu.amplitudes[i] * adjoint_gradient(m, g, mu.positions[i]));
  }
  return jp;
}

// Phi* p evaluated on an arbitrary tensor-product grid of points, by
// sequential per-axis contractions. Axes beyond dim are ignored. Output is
// row-major over the evaluation axes.
inline std::vector<double> adjoint_on_axes(
    const ForwardModel& m, const GridField& p,
    const std::array<std::vector<double>, 3>& eval_axes) {
  if (!(p.grid == m.grid)) throw GridMismatch("adjoint_on_axes: field grid mismatch");
  const int d = m.dim();
  // Contraction matrices E_k[e][i] = psf factor at (eval_e - s_i) along axis k.
  std::array<std::vector<double>, 3> E;
  std::array<int, 3> ne{1, 1, 1};
  for (int k = 0; k < d; ++k) {
    const int n = m.grid.shape[k];
    ne[k] = static_cast<int>(eval_axes[k].size());
    E[k].resize(static_cast<std::size_t>(ne[k]) * n);
    const double s = m.psf.sigma[k];
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s * s);
    const double inv2s2 = 1.0 / (2.0 * s * s);
    const double cut = m.cutoff_sigmas ? *m.cutoff_sigmas * s : kInf;
    for (int e = 0; e < ne[k]; ++e)
      for (int i = 0; i < n; ++i) {
        const double t = m.grid.coord(k, i) - eval_axes[k][e];
        E[k][static_cast<std::size_t>(e) * n + i] =
            (std::abs(t) <= cut) ? norm * std::exp(-t * t * inv2s2) : 0.0;
      }
  }
  // Contract axis 0: cur[e0][i1*n2+i2] = sum_i0 E0[e0][i0] p[i0][i1][i2]
  const int n0 = m.grid.shape[0], n1 = m.grid.shape[1], n2 = m.grid.shape[2];
  std::vector<double> cur(static_cast<std::size_t>(ne[0]) * n1 * n2, 0.0);
  for (int e0 = 0; e0 < ne[0]; ++e0) {
    const double* row = &E[0][static_cast<std::size_t>(e0) * n0];
    double* out = &cur[static_cast<std::size_t>(e0) * n1 * n2];
    for (int i0 = 0; i0 < n0; ++i0) {
      const double c = row[i0];
      const double* src = &p.values[static_cast<std::size_t>(i0) * n1 * n2];
      for (int r = 0; r < n1 * n2; ++r) out[r] += c * src[r];
    }
  }
  if (d == 1) return cur;
  // Contract axis 1: nxt[e0][e1][i2] = sum_i1 E1[e1][i1] cur[e0][i1][i2]
  std::vector<double> nxt(static_cast<std::size_t>(ne[0]) * ne[1] * n2, 0.0);
  for (int e0 = 0; e0 < ne[0]; ++e0)
    for (int e1 = 0; e1 < ne[1]; ++e1) {
      const double* row = &E[1][static_cast<std::size_t>(e1) * n1];
      double* out = &nxt[(static_cast<std::size_t>(e0) * ne[1] + e1) * n2];
      const double* src = &cur[static_cast<std::size_t>(e0) * n1 * n2];
      for (int i1 = 0; i1 < n1; ++i1) {
        const double c = row[i1];
        for (int i2 = 0; i2 < n2; ++i2) out[i2] += c * src[static_cast<std::size_t>(i1) * n2 + i2];
      }
    }
  if (d == 2) return nxt;
  // Contract axis 2.
  std::vector<double> out(static_cast<std::size_t>(ne[0]) * ne[1] * ne[2], 0.0);
  for (int e01 = 0; e01 < ne[0] * ne[1]; ++e01) {
    const double* src = &nxt[static_cast<std::size_t>(e01) * n2];
    for (int e2 = 0; e2 < ne[2]; ++e2) {
      const double* row = &E[2][static_cast<std::size_t>(e2) * n2];
      double s = 0.0;
      for (int i2 = 0; i2 < n2; ++i2) s += row[i2] * src[i2];
      out[static_cast<std::size_t>(e01) * ne[2] + e2] = s;
    }
  }
  return out;
}

}  // namespace spikesolve
