#pragma once

#include <cmath>
#include <vector>

#include "spikesolve/sfw.hpp"

namespace spikesolve {

// ---------------------------------------------------------------------------
// Automatic regularization-parameter selection: decreasing lambda homotopy
// with warm starts, stopping when the residual falls below sigma_target.
// ---------------------------------------------------------------------------

struct HomotopyConfig {
  double gamma = 0.9;        // lambda_1 relaxation, in (0,1)
  double c = 1.0;            // update margin, > 0
  double sigma_target = 1.0; // residual target, > 0
  int t_max = 10;
  SFWConfig inner;           // lambda is filled per homotopy step
  DiracMeasure init;
};

struct HomotopyStep {
  int t = 0;
  double lambda = 0.0;
  double sigma = 0.0;
  double sup_eta = 0.0;
  bool inner_converged = false;  // inner solve passed its own optimality check
  int n_spikes = 0;
};

struct HomotopyResult {
  DiracMeasure measure;
  std::vector<HomotopyStep> lambda_trace;
  bool met_target = false;
};

// lambda_1 = gamma * ||eta(1, init)||_inf. By the 1/lambda scaling of the
// certificate, ||eta(lambda_1, init)||_inf = 1/gamma > 1, so the first inner
// solve always improves on the initialization.
inline double initial_lambda(const FidelityModel& fid, const ForwardModel& model,
                             const DiracMeasure& init, double gamma, int alpha,
                             const SearchConfig& search = {}) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("initial_lambda: gamma must lie in (0,1)");
  Certificate cert = build_certificate(fid, model, init, 1.0, alpha);
  const double sup = std::abs(certificate_argmax(cert, search).value);
  if (sup == 0.0)
    throw ZeroCertificate("initial_lambda: data already explained by the initialization");
  return gamma * sup;
}

// lambda_{t+1} = lambda_t ||eta(lambda_t, mu_t)||_inf / (c + 1), after which
// ||eta(lambda_{t+1}, mu_t)||_inf = 1 + c exactly (same certificate field, only
// the scale changes).
inline double update_lambda(double lambda_t, double sup_eta_t, double c) {
  if (!(sup_eta_t > 0.0)) throw NonPositiveInput("update_lambda: sup_eta must be > 0");
  if (!(c > 0.0)) throw NonPositiveInput("update_lambda: c must be > 0");
  return lambda_t * sup_eta_t / (c + 1.0);
}

inline HomotopyResult homotopy_solve(const FidelityModel& fid, const ForwardModel& model,
                                     const HomotopyConfig& hcfg) {
  if (!(hcfg.c > 0.0)) throw ConfigError("homotopy_solve: c must be > 0");
  if (!(hcfg.sigma_target > 0.0))
    throw ConfigError("homotopy_solve: sigma_target must be > 0");
  if (hcfg.t_max < 1) throw ConfigError("homotopy_solve: t_max must be >= 1");

  HomotopyResult res;
  double lambda = initial_lambda(fid, model, hcfg.init, hcfg.gamma, hcfg.inner.alpha,
                                 hcfg.inner.search);
  DiracMeasure mu = hcfg.init;
  for (int t = 1; t <= hcfg.t_max; ++t) {
    SFWConfig cfg = hcfg.inner;
    cfg.lambda = lambda;
    SolveResult inner = sfw_solve(fid, model, cfg, mu);
    mu = inner.measure;

    HomotopyStep step;
    step.t = t;
    step.lambda = lambda;
    step.sigma = residual_sigma(fid, apply_forward(model, mu));
    step.sup_eta = inner.trace.iters.back().sup_eta;  // certificate at the final iterate
    step.inner_converged = inner.converged;
    step.n_spikes = static_cast<int>(mu.size());
    res.lambda_trace.push_back(step);

    if (step.sigma < hcfg.sigma_target) {
      res.met_target = true;
      break;
    }
    if (t < hcfg.t_max) lambda = update_lambda(lambda, step.sup_eta, hcfg.c);
  }
  res.measure = mu;
  return res;
}

// ---------------------------------------------------------------------------
// sigma_target and background estimators from a background-only mask.
// ---------------------------------------------------------------------------

inline std::size_t mask_count(const GridField& mask) {
  std::size_t n = 0;
  for (double v : mask.values)
    if (v != 0.0) ++n;
  return n;
}

// Mean of y over the masked samples.
inline double estimate_background(const GridField& y, const GridField& mask) {
  require_same_grid(y, mask, "estimate_background");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < y.size(); ++j)
    if (mask.values[j] != 0.0) {
      s += y.values[j];
      ++n;
    }
  if (n == 0) throw EmptyMask("estimate_background: mask selects no samples");
  return s / static_cast<double>(n);
}

// f_{y,b}(0) restricted to the mask, scaled by |Omega| / |Omega_bg| with both
// measured in sample counts: the fidelity of the constant-background
// prediction against y over the background region, extrapolated to the domain.
inline double estimate_sigma_target(const FidelityModel& fid, const GridField& mask,
                                    double background) {
  require_same_grid(fid.observation, mask, "estimate_sigma_target");
  if (fid.kind == FidelityKind::KL && !(background > 0.0))
    throw NonPositiveInput("estimate_sigma_target: KL requires background > 0");
  double s = 0.0;
  std::size_t n = 0;
  const double b = background;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask.values[j] == 0.0) continue;
    ++n;
    const double yj = fid.observation.values[j];
    if (fid.kind == FidelityKind::L2) {
      s += 0.5 * (b - yj) * (b - yj);
    } else {
      s += b - yj;
      if (yj > 0.0) s += yj * (std::log(yj) - std::log(b));
    }
  }
  if (n == 0) throw EmptyMask("estimate_sigma_target: mask selects no samples");
  return s * static_cast<double>(fid.observation.size()) / static_cast<double>(n);
}

// Poisson discrepancy target |Omega|/2 with |Omega| the grid sample count.
inline double poisson_discrepancy_target(const Grid& grid) {
  return static_cast<double>(grid.size()) / 2.0;
}

// Rectangular ring mask: selects samples outside the central box obtained by
// shrinking the domain by `fraction` of its width on every side.
inline GridField ring_mask(const Grid& grid, double fraction) {
  if (!(fraction > 0.0 && fraction < 0.5))
    throw ConfigError("ring_mask: fraction must lie in (0, 0.5)");
  GridField mask(grid, 0.0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const Vec x = grid.point(j);
    bool inside = true;
    for (int k = 0; k < grid.dim(); ++k) {
      const double lo = grid.domain.lower[k] + fraction * grid.domain.width(k);
      const double hi = grid.domain.upper[k] - fraction * grid.domain.width(k);
      if (x[k] < lo || x[k] > hi) inside = false;
    }
    mask.values[j] = inside ? 0.0 : 1.0;
  }
  return mask;
}

}  // namespace spikesolve
