#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spikesolve/fidelity.hpp"
#include "spikesolve/forward.hpp"

namespace spikesolve {

// Search used both for spike insertion and for sup-norm estimation: coarse
// evaluation on a refined grid followed by local ascent from the best
// candidates. One shared mechanism keeps stopping and insertion consistent.
struct SearchConfig {
  int refine_factor = 4;       // evaluation grid resolution per acquisition cell
  int topk = 5;                // number of coarse candidates refined by ascent
  int max_ascent_steps = 200;
  double step_tol_rel = 1e-10; // ascent stops when step < tol * domain width
};

// Dual certificate eta(lambda, mu) = (1/lambda) eta~(mu) with
// eta~ = -Phi* grad f(Phi mu + b), composed with (.)_+ when the non-negativity
// constraint is active (alpha = 1). The stored field p = -grad f is
// lambda-free; lambda only scales evaluations, which keeps the homotopy
// rescaling identities exact.
struct Certificate {
  double lambda = 1.0;
  bool positive_part = false;
  GridField p;
  const ForwardModel* model = nullptr;
};

inline Certificate build_certificate(const FidelityModel& fid, const ForwardModel& model,
                                     const DiracMeasure& mu, double lambda, int alpha) {
  if (!(lambda > 0.0)) throw NonPositiveInput("build_certificate: lambda must be > 0");
  Certificate cert;
  cert.lambda = lambda;
  cert.positive_part = (alpha != 0);
  cert.model = &model;
  GridField w = apply_forward(model, mu);
  GridField g = fidelity_gradient(fid, w);
  for (double& v : g.values) v = -v;
  cert.p = std::move(g);
  return cert;
}

inline double certificate_eval(const Certificate& cert, const Vec& x) {
  if (!cert.model->grid.domain.contains(x))
    throw PositionOutOfDomain("certificate_eval: x outside domain");
  const double v = adjoint_value(*cert.model, cert.p, x) / cert.lambda;
  return cert.positive_part ? std::max(v, 0.0) : v;
}

// Gradient of the certificate at x; zero where the positive part clips.
inline Vec certificate_eval_grad(const Certificate& cert, const Vec& x) {
  if (!cert.model->grid.domain.contains(x))
    throw PositionOutOfDomain("certificate_eval_grad: x outside domain");
  if (cert.positive_part && adjoint_value(*cert.model, cert.p, x) < 0.0)
    return Vec::zero(cert.model->dim());
  Vec g = adjoint_gradient(*cert.model, cert.p, x);
  g *= 1.0 / cert.lambda;
  return g;
}

struct ArgmaxResult {
  Vec point;
  double value = 0.0;  // eta(lambda, mu)(point); clipped when positive_part
};

namespace detail {

// Projected ascent of s * eta~ from x0 along the normalized gradient with an
// adaptive step. Works on the unscaled field, so the trajectory depends only
// on p, never on lambda.
inline std::pair<Vec, double> ascend_unscaled(const Certificate& cert, Vec x,
                                              double sign, const SearchConfig& sc,
                                              double init_step) {
  const ForwardModel& m = *cert.model;
  const Domain& dom = m.grid.domain;
  const double tol = sc.step_tol_rel * dom.max_width();
  double fx = sign * adjoint_value(m, cert.p, x);
  double t = init_step;
  for (int it = 0; it < sc.max_ascent_steps && t > tol; ++it) {
    Vec g = adjoint_gradient(m, cert.p, x);
    g *= sign;
    const double gn = g.norm();
    if (gn == 0.0) break;
    g *= 1.0 / gn;
    bool moved = false;
    while (t > tol) {
      Vec xn = project_into_domain(x + t * g, dom);
      const double fn = sign * adjoint_value(m, cert.p, xn);
      if (fn > fx) {
        x = xn;
        fx = fn;
        t *= 1.5;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return {x, fx};
}

}  // namespace detail

// Approximate argmax of |eta| (eta itself when positive_part) over the domain.
// Ties on the coarse grid break toward the lowest flat index.
inline ArgmaxResult certificate_argmax(const Certificate& cert, const SearchConfig& sc) {
  const ForwardModel& m = *cert.model;
  const int d = m.dim();
  std::array<std::vector<double>, 3> axes;
  std::array<int, 3> ne{1, 1, 1};
  for (int k = 0; k < d; ++k) {
    const int n = m.grid.shape[k] * sc.refine_factor;
    ne[k] = n;
    axes[k].resize(static_cast<std::size_t>(n));
    const double lo = m.grid.domain.lower[k];
    const double h = m.grid.domain.width(k) / n;
    for (int i = 0; i < n; ++i) axes[k][i] = lo + (i + 0.5) * h;
  }
  const std::vector<double> field = adjoint_on_axes(m, cert.p, axes);

  auto score_of = [&](double v) {
    return cert.positive_part ? std::max(v, 0.0) : std::abs(v);
  };

  // Top-k coarse candidates, deterministic under ties.
  const int k_want = std::max(1, sc.topk);
  std::vector<std::size_t> top;
  top.reserve(static_cast<std::size_t>(k_want));
  for (std::size_t j = 0; j < field.size(); ++j) {
    const double s = score_of(field[j]);
    auto pos = top.begin();
    while (pos != top.end() && score_of(field[*pos]) >= s) ++pos;
    if (pos != top.end() || top.size() < static_cast<std::size_t>(k_want))
      top.insert(pos, j);
    if (top.size() > static_cast<std::size_t>(k_want)) top.pop_back();
  }

  auto point_of = [&](std::size_t flat) {
    Vec x = Vec::zero(d);
    std::size_t rem = flat;
    for (int k = d - 1; k >= 0; --k) {
      x[k] = axes[k][rem % static_cast<std::size_t>(ne[k])];
      rem /= static_cast<std::size_t>(ne[k]);
    }
    return x;
  };

  double cell = kInf;
  for (int k = 0; k < d; ++k) cell = std::min(cell, m.grid.domain.width(k) / ne[k]);

  Vec best_x = point_of(top.front());
  double best_unscaled = field[top.front()];
  double best_score = score_of(best_unscaled);
  for (std::size_t cand : top) {
    const double v0 = field[cand];
    if (cert.positive_part && v0 <= 0.0 && best_score > 0.0) continue;
    const double sign = (!cert.positive_part && v0 < 0.0) ? -1.0 : 1.0;
    auto [x, fx] = detail::ascend_unscaled(cert, point_of(cand), sign, sc, 0.5 * cell);
    const double v = sign * fx;
    if (score_of(v) > best_score) {
      best_score = score_of(v);
      best_unscaled = v;
      best_x = x;
    }
  }

  ArgmaxResult res;
  res.point = best_x;
  const double v = best_unscaled / cert.lambda;
  res.value = cert.positive_part ? std::max(v, 0.0) : v;
  return res;
}

struct OptimalityReport {
  double sup_norm = 0.0;
  Vec argmax_point;
  std::vector<double> support_values;
  bool is_optimal = false;
};

// sup |eta| <= 1 + tol together with the certificate values on the support
// (which sit at sign(a_i), i.e. at 1 for the constrained model, when optimal).
inline OptimalityReport check_optimality(const Certificate& cert, const DiracMeasure& mu,
                                         double tol, const SearchConfig& sc = {}) {
  OptimalityReport rep;
  ArgmaxResult am = certificate_argmax(cert, sc);
  rep.sup_norm = std::abs(am.value);
  rep.argmax_point = am.point;
  rep.support_values.reserve(mu.size());
  for (const Vec& x : mu.positions)
    rep.support_values.push_back(certificate_eval(cert, x));
  rep.is_optimal = rep.sup_norm <= 1.0 + tol;
  return rep;
}

}  // namespace spikesolve
