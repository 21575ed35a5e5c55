#pragma once

#include <cmath>

#include "spikesolve/field.hpp"

namespace spikesolve {

enum class FidelityKind { L2, KL };

// Data term f_{y,b}(w) evaluated against a fixed observation y.
// L2: (1/2) ||w - y||^2.  KL: extended Kullback-Leibler divergence
// sum_j [w_j - y_j + y_j (log y_j - log w_j)], +inf if any w_j <= 0.
//
// Observed zeros are admitted for KL (Poisson samples vanish with positive
// probability): 0 log 0 := 0 and the -y log w term drops.
struct FidelityModel {
  FidelityKind kind = FidelityKind::L2;
  GridField observation;

  FidelityModel() = default;
  FidelityModel(FidelityKind k, GridField y) : kind(k), observation(std::move(y)) {
    if (kind == FidelityKind::KL)
      for (double v : observation.values)
        if (v < 0.0) throw ConfigError("FidelityModel: KL requires y >= 0");
  }
};

inline double fidelity_value(const FidelityModel& fid, const GridField& w) {
  require_same_grid(fid.observation, w, "fidelity_value");
  const auto& y = fid.observation.values;
  if (fid.kind == FidelityKind::L2) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double r = w.values[j] - y[j];
      s += 0.5 * r * r;
    }
    return s;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double wj = w.values[j];
    if (!(wj > 0.0)) return kInf;
    const double yj = y[j];
    s += wj - yj;
    if (yj > 0.0) s += yj * (std::log(yj) - std::log(wj));
  }
  return s;
}

// L2: w - y.  KL: 1 - y/w componentwise; the subdifferential is empty off the
// positive orthant, reported as NonPositivePrediction.
inline GridField fidelity_gradient(const FidelityModel& fid, const GridField& w) {
  require_same_grid(fid.observation, w, "fidelity_gradient");
  const auto& y = fid.observation.values;
  GridField g(w.grid);
  if (fid.kind == FidelityKind::L2) {
    for (std::size_t j = 0; j < w.size(); ++j) g.values[j] = w.values[j] - y[j];
    return g;
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double wj = w.values[j];
    if (!(wj > 0.0))
      throw NonPositivePrediction("fidelity_gradient: KL needs w > 0 everywhere");
    g.values[j] = 1.0 - y[j] / wj;
  }
  return g;
}

// The residual logged as sigma_t by the homotopy loop; identical to
// fidelity_value by definition.
inline double residual_sigma(const FidelityModel& fid, const GridField& w) {
  return fidelity_value(fid, w);
}

// Convex conjugate of the scalar KL slice g_t(s) = (s - t + t log t - t log s)/lambda:
//   g_t*(s*) = +inf                       if s* >= 1/lambda,
//              -(t/lambda) log(1 - lambda s*)  otherwise.
inline double kl_scalar_conjugate(double t, double lambda, double s_star) {
  if (!(t > 0.0) || !(lambda > 0.0))
    throw NonPositiveInput("kl_scalar_conjugate: t and lambda must be > 0");
  if (s_star >= 1.0 / lambda) return kInf;
  return -(t / lambda) * std::log(1.0 - lambda * s_star);
}

// Scalar KL slice itself; used with kl_scalar_conjugate by Fenchel-Young checks.
inline double kl_scalar(double t, double lambda, double s) {
  if (!(t > 0.0) || !(lambda > 0.0))
    throw NonPositiveInput("kl_scalar: t and lambda must be > 0");
  if (!(s > 0.0)) return kInf;
  return (s - t + t * std::log(t) - t * std::log(s)) / lambda;
}

}  // namespace spikesolve
