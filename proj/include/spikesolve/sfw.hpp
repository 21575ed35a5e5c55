#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "spikesolve/certificate.hpp"
#include "spikesolve/fidelity.hpp"
#include "spikesolve/forward.hpp"

namespace spikesolve {

struct AmpSolverConfig {
  int max_iters = 500;
  double grad_tol = 1e-8;
};

struct SlideSolverConfig {
  int max_iters = 200;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
};

struct SFWConfig {
  double lambda = 1.0;
  int alpha = 0;  // 1 enforces non-negative amplitudes
  int max_outer_iters = 20;
  double optimality_tol = 1e-2;
  AmpSolverConfig amp_solver;
  SlideSolverConfig slide_solver;
  double prune_tol = 1e-6;
  bool boosted = false;
  double boost_slide_trigger = 1.5;  // slide when the inserted spike's |eta| is below this
  SearchConfig search;
};

struct IterRecord {
  int k = 0;
  double objective = 0.0;
  double sup_eta = 0.0;
  int n_spikes = 0;
};

struct SolverTrace {
  std::vector<IterRecord> iters;
};

struct SolveResult {
  DiracMeasure measure;
  bool converged = false;
  SolverTrace trace;
  int slide_invocations = 0;
};

// T_lambda(mu) = f(Phi mu + b) + lambda |mu|(Omega), +inf off the feasible set.
inline double sfw_objective(const FidelityModel& fid, const ForwardModel& model,
                            const DiracMeasure& mu, double lambda, int alpha) {
  if (alpha)
    for (double a : mu.amplitudes)
      if (a < 0.0) return kInf;
  return fidelity_value(fid, apply_forward(model, mu)) + lambda * tv_norm(mu);
}

namespace detail {

// Largest eigenvalue of the kernel Gram matrix, by power iteration.
inline double gram_spectral_norm(const std::vector<std::vector<double>>& K) {
  const std::size_t n = K.size();
  if (n == 0) return 0.0;
  std::vector<double> G(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < K[i].size(); ++r) s += K[i][r] * K[j][r];
      G[i * n + j] = G[j * n + i] = s;
    }
  std::vector<double> v(n, 1.0), gv(n);
  double lam = 0.0;
  for (int it = 0; it < 60; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * v[j];
      gv[i] = s;
    }
    double nrm = 0.0;
    for (double x : gv) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) return 0.0;
    lam = nrm;
    for (std::size_t i = 0; i < n; ++i) v[i] = gv[i] / nrm;
  }
  return lam;
}

// Shrinkage for the amplitude block: nonnegative threshold when constrained
// (||a||_1 = sum a on a >= 0), plain soft-threshold otherwise.
inline double shrink_amp(double a, double g, double t, double lambda, int alpha) {
  if (alpha) return std::max(0.0, a - t * (g + lambda));
  const double z = a - t * g;
  const double m = std::abs(z) - t * lambda;
  return m > 0.0 ? (z > 0.0 ? m : -m) : 0.0;
}

}  // namespace detail

// Convex amplitude estimation at fixed positions:
//   min_a f(Phi_x a + b) + lambda ||a||_1 (+ indicator a >= 0 when alpha = 1)
// by proximal/projected gradient with backtracking. Step seeded at 1/L with L
// estimated from the kernel Gram matrix (scaled by the KL curvature bound when
// applicable). Accepted iterates never increase the objective.
inline std::vector<double> amplitude_step(const FidelityModel& fid,
                                          const ForwardModel& model,
                                          const std::vector<Vec>& positions,
                                          double lambda, int alpha,
                                          const AmpSolverConfig& cfg,
                                          const std::vector<double>& warm_start) {
  const std::size_t n = positions.size();
  if (warm_start.size() != n)
    throw ConfigError("amplitude_step: warm start size mismatch");
  if (n == 0) return {};
  for (const Vec& x : positions)
    if (!model.grid.domain.contains(x))
      throw PositionOutOfDomain("amplitude_step: position outside domain");

  std::vector<std::vector<double>> K(n);
  for (std::size_t i = 0; i < n; ++i) K[i] = kernel_column(model, positions[i]);
  const std::size_t m = model.grid.size();

  GridField w(model.grid);
  auto predict = [&](const std::vector<double>& a) {
    w.values = model.background.values;
    for (std::size_t i = 0; i < n; ++i) {
      const double ai = a[i];
      const double* col = K[i].data();
      for (std::size_t j = 0; j < m; ++j) w.values[j] += ai * col[j];
    }
  };
  auto full_obj = [&](const std::vector<double>& a) {
    predict(a);
    double l1 = 0.0;
    for (double ai : a) l1 += std::abs(ai);
    return fidelity_value(fid, w) + lambda * l1;
  };

  const double gram_l = detail::gram_spectral_norm(K);
  double t;
  if (fid.kind == FidelityKind::L2) {
    t = gram_l > 0.0 ? 1.0 / gram_l : 1.0;
  } else {
    // KL Hessian is K^T diag(y/w^2) K; bound the diagonal at the warm start.
    std::vector<double> a0 = warm_start;
    if (alpha)
      for (double& ai : a0) ai = std::max(ai, 0.0);
    predict(a0);
    double dmax = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double wj = std::max(w.values[j], 1e-300);
      dmax = std::max(dmax, fid.observation.values[j] / (wj * wj));
    }
    t = (gram_l * dmax > 0.0) ? 1.0 / (gram_l * dmax) : 1.0;
  }

  std::vector<double> a = warm_start;
  if (alpha)
    for (double& ai : a) ai = std::max(ai, 0.0);
  double fo = full_obj(a);
  std::vector<double> grad(n), an(n);
  for (int it = 0; it < cfg.max_iters; ++it) {
    predict(a);
    GridField fg = fidelity_gradient(fid, w);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const double* col = K[i].data();
      for (std::size_t j = 0; j < m; ++j) s += col[j] * fg.values[j];
      grad[i] = s;
    }
    bool accepted = false;
    double dn2 = 0.0;
    double fn = fo;
    while (t > 1e-300) {
      dn2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        an[i] = detail::shrink_amp(a[i], grad[i], t, lambda, alpha);
        const double d = an[i] - a[i];
        dn2 += d * d;
      }
      if (dn2 == 0.0) return a;  // fixed point
      fn = full_obj(an);
      if (fn <= fo && fn <= fo - 1e-4 * dn2 / t + 1e-300) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    a.swap(an);
    fo = fn;
    t *= 1.3;
    if (std::sqrt(dn2) / t <= cfg.grad_tol) break;
  }
  return a;
}

// Joint non-convex re-optimization of amplitudes and positions (the sliding
// step), by preconditioned proximal gradient: the position block is scaled per
// axis by sigma_k^2 so amplitude and position updates share one step size.
// Monotone in the true objective; positions stay in the domain by projection.
inline DiracMeasure sliding_step(const FidelityModel& fid, const ForwardModel& model,
                                 const DiracMeasure& mu, double lambda, int alpha,
                                 const SlideSolverConfig& cfg) {
  const std::size_t n = mu.size();
  if (n == 0) return mu;
  const int d = model.dim();
  const Domain& dom = model.grid.domain;

  std::vector<double> a = mu.amplitudes;
  std::vector<Vec> x = mu.positions;
  auto obj = [&](const std::vector<double>& a_, const std::vector<Vec>& x_) {
    DiracMeasure tmp(mu.dim);
    tmp.positions = x_;
    tmp.amplitudes = a_;
    return sfw_objective(fid, model, tmp, lambda, alpha);
  };

  // Step seed from the Gram spectral norm at the input positions.
  double t = 1.0;
  {
    std::vector<std::vector<double>> K(n);
    for (std::size_t i = 0; i < n; ++i) K[i] = kernel_column(model, x[i]);
    double gram_l = detail::gram_spectral_norm(K);
    if (fid.kind == FidelityKind::KL) {
      DiracMeasure tmp(mu.dim);
      tmp.positions = x;
      tmp.amplitudes = a;
      GridField w = apply_forward(model, tmp);
      double dmax = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double wj = std::max(w.values[j], 1e-300);
        dmax = std::max(dmax, fid.observation.values[j] / (wj * wj));
      }
      gram_l *= std::max(dmax, 1e-30);
    }
    t = 1.0 / std::max(gram_l, 1e-30);
  }

  double fo = obj(a, x);
  std::vector<double> an(n);
  std::vector<Vec> xn(n);
  for (int it = 0; it < cfg.max_iters; ++it) {
    DiracMeasure cur(mu.dim);
    cur.positions = x;
    cur.amplitudes = a;
    GridField w = apply_forward(model, cur);
    GridField fg = fidelity_gradient(fid, w);
    JacobianProducts jp = forward_jacobian_products(model, cur, fg);

    bool accepted = false;
    double dn2 = 0.0;
    double fn = fo;
    while (t > 1e-300) {
      dn2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        an[i] = detail::shrink_amp(a[i], jp.amp_grads[i], t, lambda, alpha);
        const double da = an[i] - a[i];
        dn2 += da * da;
        Vec xi = x[i];
        for (int k = 0; k < d; ++k) {
          const double sk = model.psf.sigma[k];
          xi[k] -= t * sk * sk * jp.pos_grads[i][k];
        }
        xn[i] = project_into_domain(xi, dom);
        for (int k = 0; k < d; ++k) {
          const double du = (xn[i][k] - x[i][k]) / model.psf.sigma[k];
          dn2 += du * du;
        }
      }
      if (dn2 == 0.0) {
        DiracMeasure out(mu.dim);
        out.positions = x;
        out.amplitudes = a;
        return out;
      }
      fn = obj(an, xn);
      if (fn <= fo && fn <= fo - cfg.armijo_c * dn2 / t + 1e-300) {
        accepted = true;
        break;
      }
      t *= cfg.backtrack_factor;
    }
    if (!accepted) break;
    a.swap(an);
    x.swap(xn);
    fo = fn;
    t *= 2.0;
    if (std::sqrt(dn2) / t <= cfg.grad_tol) break;
  }
  DiracMeasure out(mu.dim);
  out.positions = x;
  out.amplitudes = a;
  return out;
}

namespace detail {

// prune() guarded by the objective: dropping near-zero spikes must not raise
// T_lambda, which keeps the recorded trace non-increasing in exact floats.
inline DiracMeasure prune_guarded(const FidelityModel& fid, const ForwardModel& model,
                                  const DiracMeasure& mu, double lambda, int alpha,
                                  double prune_tol) {
  DiracMeasure pruned = prune(mu, prune_tol);
  if (pruned.size() == mu.size()) return mu;
  if (sfw_objective(fid, model, pruned, lambda, alpha) <=
      sfw_objective(fid, model, mu, lambda, alpha))
    return pruned;
  return mu;
}

}  // namespace detail

// Algorithm: Sliding Frank-Wolfe. Repeats insertion at the certificate argmax,
// convex amplitude estimation warm-started from the previous amplitudes,
// non-convex sliding and pruning, until sup |eta(lambda, mu)| <= 1 + tol or the
// iteration cap. The boosted variant skips sliding while the inserted spike's
// certificate value is above the trigger and runs one final sliding pass
// before termination.
inline SolveResult sfw_solve(const FidelityModel& fid, const ForwardModel& model,
                             const SFWConfig& cfg, const DiracMeasure& init = {}) {
  if (!(cfg.lambda > 0.0)) throw NonPositiveInput("sfw_solve: lambda must be > 0");
  if (cfg.max_outer_iters < 1) throw ConfigError("sfw_solve: max_outer_iters >= 1");
  if (fid.kind == FidelityKind::KL && !(model.min_background() > 0.0))
    throw ConfigError("sfw_solve: KL fidelity requires strictly positive background");
  if (cfg.alpha)
    for (double ai : init.amplitudes)
      if (ai < 0.0) throw ConfigError("sfw_solve: alpha=1 requires init amplitudes >= 0");
  for (const Vec& xi : init.positions)
    if (!model.grid.domain.contains(xi))
      throw PositionOutOfDomain("sfw_solve: init position outside domain");

  SolveResult res;
  DiracMeasure mu = init;
  if (mu.empty()) mu.dim = model.dim();
  bool skipped_slide = false;

  for (int k = 0;; ++k) {
    Certificate cert = build_certificate(fid, model, mu, cfg.lambda, cfg.alpha);
    ArgmaxResult am = certificate_argmax(cert, cfg.search);
    double sup = std::abs(am.value);
    const bool stop = sup <= 1.0 + cfg.optimality_tol || k >= cfg.max_outer_iters;

    if (stop && cfg.boosted && skipped_slide && !mu.empty()) {
      mu = sliding_step(fid, model, mu, cfg.lambda, cfg.alpha, cfg.slide_solver);
      ++res.slide_invocations;
      mu = detail::prune_guarded(fid, model, mu, cfg.lambda, cfg.alpha, cfg.prune_tol);
      skipped_slide = false;
      cert = build_certificate(fid, model, mu, cfg.lambda, cfg.alpha);
      am = certificate_argmax(cert, cfg.search);
      sup = std::abs(am.value);
    }

    IterRecord rec;
    rec.k = k;
    rec.objective = sfw_objective(fid, model, mu, cfg.lambda, cfg.alpha);
    rec.sup_eta = sup;
    rec.n_spikes = static_cast<int>(mu.size());
    res.trace.iters.push_back(rec);

    if (sup <= 1.0 + cfg.optimality_tol) {
      res.converged = true;
      break;
    }
    if (k >= cfg.max_outer_iters) break;

    // Insertion. A candidate exactly on an existing spike re-optimizes in place.
    std::vector<Vec> positions = mu.positions;
    std::vector<double> warm = mu.amplitudes;
    bool duplicate = false;
    for (const Vec& xi : positions)
      if (xi == am.point) {
        duplicate = true;
        break;
      }
    if (!duplicate) {
      positions.push_back(am.point);
      warm.push_back(0.0);
    }

    std::vector<double> amps = amplitude_step(fid, model, positions, cfg.lambda,
                                              cfg.alpha, cfg.amp_solver, warm);
    DiracMeasure half(model.dim());
    half.positions = positions;
    half.amplitudes = amps;

    if (!cfg.boosted || sup < cfg.boost_slide_trigger) {
      half = sliding_step(fid, model, half, cfg.lambda, cfg.alpha, cfg.slide_solver);
      ++res.slide_invocations;
      skipped_slide = false;
    } else {
      skipped_slide = true;
    }

    mu = detail::prune_guarded(fid, model, half, cfg.lambda, cfg.alpha, cfg.prune_tol);
  }

  res.measure = mu;
  return res;
}

inline SolveResult boosted_sfw_solve(const FidelityModel& fid, const ForwardModel& model,
                                     SFWConfig cfg, const DiracMeasure& init = {}) {
  cfg.boosted = true;
  return sfw_solve(fid, model, cfg, init);
}

}  // namespace spikesolve
