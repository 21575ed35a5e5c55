// Acceptance suite: end-to-end checks at desk scale, one pass/fail line each.
// Returns the number of failed criteria.

#include <atomic>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <thread>
#include <vector>

#include "spikesolve/spikesolve.hpp"

using namespace spikesolve;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& job) {
  unsigned hw = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("SPIKESOLVE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, static_cast<unsigned>(cap));
  }
  if (hw <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(hw, n); ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        job(i);
      }
    });
  for (auto& th : pool) th.join();
}

bool trace_non_increasing(const SolverTrace& tr) {
  for (std::size_t i = 1; i < tr.iters.size(); ++i)
    if (tr.iters[i].objective > tr.iters[i - 1].objective) return false;
  return true;
}

bool measure_feasible(const DiracMeasure& mu, const Domain& dom) {
  for (double a : mu.amplitudes)
    if (!(a >= 0.0)) return false;
  for (const Vec& x : mu.positions)
    if (!dom.contains(x)) return false;
  return true;
}

// Mask of grid samples farther than `radius_sigmas` PSF widths from every
// ground-truth spike (anisotropy handled per axis).
GridField clean_background_mask(const Grid& grid, const GaussianPSF& psf,
                                const DiracMeasure& gt, double radius_sigmas) {
  GridField mask(grid, 0.0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const Vec s = grid.point(j);
    bool clean = true;
    for (const Vec& x : gt.positions) {
      double r2 = 0.0;
      for (int k = 0; k < grid.dim(); ++k) {
        const double d = (s[k] - x[k]) / psf.sigma[k];
        r2 += d * d;
      }
      if (r2 < radius_sigmas * radius_sigmas) clean = false;
    }
    mask.values[j] = clean ? 1.0 : 0.0;
  }
  return mask;
}

// Shared audit flags accumulated across criteria 1-3 for criterion 10.
struct SolveAudit {
  std::atomic<int> traces{0};
  std::atomic<int> monotone{0};
  std::atomic<int> feasible_checked{0};
  std::atomic<int> feasible{0};
};
SolveAudit g_audit;

void audit_solve(const SolveResult& res, const Domain& dom, bool constrained) {
  g_audit.traces.fetch_add(1);
  if (trace_non_increasing(res.trace)) g_audit.monotone.fetch_add(1);
  if (constrained) {
    g_audit.feasible_checked.fetch_add(1);
    if (measure_feasible(res.measure, dom)) g_audit.feasible.fetch_add(1);
  }
}

// -----------------------------------------------------------------------------

void criterion1_noiseless_recovery() {
  const double z = 0.50308, amp = 1.0;
  bool pass = true;
  std::string detail;
  for (FidelityKind kind : {FidelityKind::KL, FidelityKind::L2}) {
    const double b = kind == FidelityKind::KL ? 0.01 : 0.0;
    ForwardModel model(GaussianPSF::isotropic(1, 0.07), Grid(Domain::unit(1), {128, 1, 1}), b);
    DiracMeasure gt(1);
    gt.positions.push_back(Vec(z));
    gt.amplitudes.push_back(amp);
    FidelityModel fid(kind, apply_forward(model, gt));
    SFWConfig cfg;
    cfg.lambda = 1e-3;
    cfg.alpha = kind == FidelityKind::KL ? 1 : 0;
    cfg.max_outer_iters = 8;

    const auto t0 = Clock::now();
    const SolveResult res = sfw_solve(fid, model, cfg);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    audit_solve(res, model.grid.domain, cfg.alpha == 1);

    const bool one = res.measure.size() == 1;
    const double pos_err = one ? std::abs(res.measure.positions[0][0] - z) : 1.0;
    const double amp_err = one ? std::abs(res.measure.amplitudes[0] - amp) / amp : 1.0;
    const bool ok = one && pos_err < 1e-3 && amp_err < 1e-2 && secs < 5.0;
    pass = pass && ok;
    detail += fmt("%s: n=%zu dx=%.2e da=%.2e %.2fs; ",
                  kind == FidelityKind::KL ? "kl" : "l2", res.measure.size(), pos_err,
                  amp_err, secs);
  }
  report(1, pass, "noiseless 1-spike exact recovery", detail);
}

struct SweepResult {
  double best_j_kl = 0.0, best_j_l2 = 0.0;
  double best_lambda_kl = 0.0, best_lambda_l2 = 0.0;
  double secs = 0.0;
};

SweepResult criterion2_sweep(int n_seeds = 20, int n_lambda = 20) {
  const auto t0 = Clock::now();
  std::vector<double> lambdas(n_lambda);
  for (int i = 0; i < n_lambda; ++i)
    lambdas[i] = std::exp(std::log(0.1) + (std::log(10.0) - std::log(0.1)) * i / (n_lambda - 1));

  struct Task {
    int seed, li;
    FidelityKind kind;
  };
  std::vector<Task> tasks;
  for (FidelityKind kind : {FidelityKind::KL, FidelityKind::L2})
    for (int li = 0; li < n_lambda; ++li)
      for (int s = 0; s < n_seeds; ++s) tasks.push_back({s, li, kind});

  std::vector<double> jacc(tasks.size(), 0.0);
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& t = tasks[i];
    ScenarioConfig cfg = paper_scenario("sim1d", static_cast<std::uint64_t>(t.seed));
    const DiracMeasure gt = generate_ground_truth(cfg);
    const GridField y = simulate_acquisition(cfg, gt);
    const ForwardModel model = cfg.model();
    const FidelityModel fid(t.kind, y);
    SFWConfig scfg;
    scfg.lambda = lambdas[t.li];
    scfg.alpha = t.kind == FidelityKind::KL ? 1 : 0;
    scfg.max_outer_iters = 2 * cfg.n_spikes;
    const SolveResult res = sfw_solve(fid, model, scfg);
    audit_solve(res, model.grid.domain, scfg.alpha == 1);
    jacc[i] = jaccard(match_spikes(gt, res.measure, 0.05));
  });

  SweepResult out;
  for (FidelityKind kind : {FidelityKind::KL, FidelityKind::L2}) {
    for (int li = 0; li < n_lambda; ++li) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].kind == kind && tasks[i].li == li) {
          sum += jacc[i];
          ++n;
        }
      const double mean = sum / n;
      if (kind == FidelityKind::KL && mean > out.best_j_kl) {
        out.best_j_kl = mean;
        out.best_lambda_kl = lambdas[li];
      }
      if (kind == FidelityKind::L2 && mean > out.best_j_l2) {
        out.best_j_l2 = mean;
        out.best_lambda_l2 = lambdas[li];
      }
    }
  }
  out.secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool pass = out.best_j_kl >= out.best_j_l2 - 0.02 && out.best_j_kl >= 0.55 &&
                    out.best_j_kl <= 0.95 && out.best_j_l2 >= 0.55 &&
                    out.best_j_l2 <= 0.95 && out.secs < 900.0;
  report(2, pass, "1D statistical comparison over the lambda sweep",
         fmt("best KL J=%.3f @ %.3g, best L2 J=%.3f @ %.3g, %.1fs", out.best_j_kl,
             out.best_lambda_kl, out.best_j_l2, out.best_lambda_l2, out.secs));
  return out;
}

void criterion3_homotopy(int n_seeds = 20) {
  std::vector<double> iters(n_seeds), jacc(n_seeds);
  std::vector<int> decreasing(n_seeds, 1), all_optimal(n_seeds, 0);
  parallel_for(static_cast<std::size_t>(n_seeds), [&](std::size_t s) {
    ScenarioConfig cfg = paper_scenario("sim1d", s);
    const DiracMeasure gt = generate_ground_truth(cfg);
    const GridField y = simulate_acquisition(cfg, gt);
    const ForwardModel model = cfg.model();
    const FidelityModel fid(FidelityKind::KL, y);

    HomotopyConfig hcfg;
    hcfg.gamma = 0.9;
    hcfg.c = 40.0;
    hcfg.sigma_target = 1.5 * residual_sigma(fid, apply_forward(model, gt));
    hcfg.t_max = 2 * cfg.n_spikes;
    hcfg.inner.alpha = 1;
    hcfg.inner.max_outer_iters = 1;

    const HomotopyResult res = homotopy_solve(fid, model, hcfg);
    iters[s] = static_cast<double>(res.lambda_trace.size());
    jacc[s] = jaccard(match_spikes(gt, res.measure, 0.05));

    bool inner_all = true, dec = true;
    for (std::size_t t = 0; t < res.lambda_trace.size(); ++t) {
      inner_all = inner_all && res.lambda_trace[t].inner_converged;
      if (t > 0 && !(res.lambda_trace[t].sigma < res.lambda_trace[t - 1].sigma))
        dec = false;
    }
    all_optimal[s] = inner_all ? 1 : 0;
    decreasing[s] = dec ? 1 : 0;

    g_audit.feasible_checked.fetch_add(1);
    if (measure_feasible(res.measure, model.grid.domain)) g_audit.feasible.fetch_add(1);
  });

  double mean_iters = 0.0, mean_j = 0.0;
  bool sigma_ok = true;
  int n_scoped = 0;
  for (int s = 0; s < n_seeds; ++s) {
    mean_iters += iters[s] / n_seeds;
    mean_j += jacc[s] / n_seeds;
    if (all_optimal[s]) {
      ++n_scoped;
      sigma_ok = sigma_ok && decreasing[s];
    }
  }
  const bool pass = mean_iters >= 2.0 && mean_iters <= 8.0 &&
                    std::abs(mean_j - 0.76) <= 0.15 && sigma_ok;
  report(3, pass, "homotopy reproduction (KL, c=40, gamma=0.9, inner=1)",
         fmt("mean iters=%.2f, mean J=%.3f, sigma decreasing on %d/%d scoped traces",
             mean_iters, mean_j, sigma_ok ? n_scoped : -1, n_scoped));
}

void criterion4_identities(int n_seeds = 5) {
  double worst_l1 = 0.0, worst_update = 0.0;
  for (int s = 0; s < n_seeds; ++s) {
    ScenarioConfig cfg = paper_scenario("sim1d", 100 + s);
    const DiracMeasure gt = generate_ground_truth(cfg);
    const GridField y = simulate_acquisition(cfg, gt);
    const ForwardModel model = cfg.model();
    const FidelityModel fid(FidelityKind::KL, y);

    const double gamma = 0.9, c = 40.0;
    double lambda = initial_lambda(fid, model, DiracMeasure(1), gamma, 1);
    {
      const Certificate cert = build_certificate(fid, model, DiracMeasure(1), lambda, 1);
      const double sup = std::abs(certificate_argmax(cert, {}).value);
      worst_l1 = std::max(worst_l1, std::abs(sup - 1.0 / gamma));
    }
    DiracMeasure mu;
    mu.dim = 1;
    for (int t = 0; t < 4; ++t) {
      SFWConfig scfg;
      scfg.lambda = lambda;
      scfg.alpha = 1;
      scfg.max_outer_iters = 1;
      const SolveResult inner = sfw_solve(fid, model, scfg, mu);
      mu = inner.measure;
      const double sup_t = inner.trace.iters.back().sup_eta;
      if (!(sup_t > 0.0)) break;
      const double lambda_next = update_lambda(lambda, sup_t, c);
      const Certificate cert = build_certificate(fid, model, mu, lambda_next, 1);
      const double sup_next = std::abs(certificate_argmax(cert, {}).value);
      worst_update = std::max(worst_update, std::abs(sup_next - (1.0 + c)));
      lambda = lambda_next;
    }
  }
  const bool pass = worst_l1 <= 1e-10 && worst_update <= 1e-10;
  report(4, pass, "homotopy algebraic identities",
         fmt("max |sup-1/gamma|=%.2e, max |sup-(1+c)|=%.2e", worst_l1, worst_update));
}

void criterion5_sigma_target(int n_seeds = 10) {
  bool pass = true;
  double worst_rel = 0.0;
  std::size_t min_mask = static_cast<std::size_t>(-1);
  for (int s = 0; s < n_seeds; ++s) {
    ScenarioConfig cfg = paper_scenario("sim2d", 200 + s);
    const DiracMeasure gt = generate_ground_truth(cfg);
    const GridField y = simulate_acquisition(cfg, gt);
    const ForwardModel model = cfg.model();
    const FidelityModel fid(FidelityKind::KL, y);

    const double theoretical = residual_sigma(fid, apply_forward(model, gt));
    const GridField mask = clean_background_mask(model.grid, cfg.psf, gt, 4.0);
    min_mask = std::min(min_mask, mask_count(mask));
    const double est = estimate_sigma_target(fid, mask, cfg.background);
    const double rel = std::abs(est - theoretical) / theoretical;
    worst_rel = std::max(worst_rel, rel);
    pass = pass && rel <= 0.15;
  }
  const bool exact = poisson_discrepancy_target(Grid(Domain::unit(2), {128, 128, 1})) == 8192.0 &&
                     poisson_discrepancy_target(Grid(Domain::unit(3), {40, 40, 8})) == 6400.0 &&
                     poisson_discrepancy_target(Grid(Domain::unit(3), {190, 190, 17})) == 306850.0;
  report(5, pass && exact, "sigma_target estimator on sim2d + discrepancy targets",
         fmt("worst rel err=%.3f (<=0.15), min mask=%zu, bertero exact=%d", worst_rel,
             min_mask, exact ? 1 : 0));
}

void criterion6_background(int n_seeds = 10) {
  bool pass = true;
  double worst = 0.0;
  for (int s = 0; s < n_seeds; ++s) {
    ScenarioConfig cfg = paper_scenario("sim3d", 300 + s);
    const DiracMeasure gt = generate_ground_truth(cfg);
    const GridField y = simulate_acquisition(cfg, gt);
    const GridField mask = clean_background_mask(cfg.grid(), cfg.psf, gt, 3.5);
    const double est = estimate_background(y, mask);
    worst = std::max(worst, std::abs(est - 0.5));
    pass = pass && std::abs(est - 0.5) <= 0.05;
  }
  report(6, pass, "background estimator on sim3d", fmt("worst |est-0.5|=%.4f", worst));
}

void criterion7_fwhm() {
  const auto s = calibrate_sigma_from_fwhm(508.0, 1.49, 2.0);
  const bool pass = s[0] >= 87.3 && s[0] <= 89.3 && s[1] == s[0] && s[2] == 2.0 * s[0];
  report(7, pass, "FWHM calibration", fmt("sigma_x=%.3f nm, sigma_z=%.3f nm", s[0], s[2]));
}

void criterion8_fenchel_young() {
  Rng rng(8080);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double t = rng.uniform(0.02, 20.0);
    const double lambda = rng.uniform(0.02, 20.0);
    const double s = rng.uniform(0.02, 20.0);
    const double s_star = (1.0 - t / s) / lambda;
    const double lhs = kl_scalar(t, lambda, s) + kl_scalar_conjugate(t, lambda, s_star);
    const double rhs = s * s_star;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  report(8, worst < 1e-10, "Fenchel-Young equality for the scalar KL conjugate",
         fmt("worst rel err=%.2e over 1e4 triples", worst));
}

void criterion9_gradients() {
  Rng rng(9090);
  double worst = 0.0;
  int checked = 0;
  for (int d = 1; d <= 3; ++d) {
    const int n = d == 1 ? 64 : (d == 2 ? 24 : 10);
    std::array<int, 3> shape{1, 1, 1};
    for (int k = 0; k < d; ++k) shape[k] = n;
    const Grid grid(Domain::unit(d), shape);
    const ForwardModel model(GaussianPSF::isotropic(d, 0.12), grid, 0.05);

    for (int rep = 0; rep < 100; ++rep) {
      // fidelity_gradient vs finite differences at one random sample
      GridField y(grid), w(grid);
      for (double& v : y.values) v = rng.uniform(0.1, 3.0);
      for (double& v : w.values) v = rng.uniform(0.3, 3.0);
      const FidelityKind kind = rep % 2 ? FidelityKind::KL : FidelityKind::L2;
      const FidelityModel fid(kind, y);
      {
        const GridField g = fidelity_gradient(fid, w);
        const std::size_t j = static_cast<std::size_t>(rng.uniform01() * grid.size());
        const double h = 1e-6;
        GridField wp = w, wm = w;
        wp.values[j] += h;
        wm.values[j] -= h;
        const double fd = (fidelity_value(fid, wp) - fidelity_value(fid, wm)) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(g.values[j]), 1e-3});
        worst = std::max(worst, std::abs(g.values[j] - fd) / scale);
      }
      // adjoint_gradient vs finite differences
      {
        GridField p(grid);
        for (double& v : p.values) v = rng.uniform(-1.0, 1.0);
        Vec x = Vec::zero(d);
        for (int k = 0; k < d; ++k) x[k] = rng.uniform(0.15, 0.85);
        const Vec g = adjoint_gradient(model, p, x);
        const double h = 1e-5;
        for (int k = 0; k < d; ++k) {
          Vec xp = x, xm = x;
          xp[k] += h;
          xm[k] -= h;
          const double fd = (adjoint_value(model, p, xp) - adjoint_value(model, p, xm)) / (2 * h);
          const double scale = std::max({std::abs(fd), std::abs(g[k]), 1e-3});
          worst = std::max(worst, std::abs(g[k] - fd) / scale);
        }
      }
      // sliding objective gradient (amplitude and position blocks)
      {
        DiracMeasure mu(d);
        for (int i = 0; i < 3; ++i) {
          Vec x = Vec::zero(d);
          for (int k = 0; k < d; ++k) x[k] = rng.uniform(0.15, 0.85);
          mu.positions.push_back(x);
          mu.amplitudes.push_back(rng.uniform(0.3, 1.5));
        }
        const double lambda = rng.uniform(0.1, 2.0);
        const GridField w2 = apply_forward(model, mu);
        const GridField gf = fidelity_gradient(fid, w2);
        const JacobianProducts jp = forward_jacobian_products(model, mu, gf);
        auto obj = [&](const DiracMeasure& q) {
          return fidelity_value(fid, apply_forward(model, q)) + lambda * tv_norm(q);
        };
        const std::size_t i = static_cast<std::size_t>(rng.uniform01() * mu.size());
        const double ha = 1e-6;
        DiracMeasure up = mu, dn = mu;
        up.amplitudes[i] += ha;
        dn.amplitudes[i] -= ha;
        const double fd_a = (obj(up) - obj(dn)) / (2 * ha);
        const double an = jp.amp_grads[i] + lambda;
        const double sa = std::max({std::abs(fd_a), std::abs(an), 1e-3});
        worst = std::max(worst, std::abs(an - fd_a) / sa);
        const double hx = 1e-6;
        for (int k = 0; k < d; ++k) {
          DiracMeasure xp = mu, xm = mu;
          xp.positions[i][k] += hx;
          xm.positions[i][k] -= hx;
          const double fd = (obj(xp) - obj(xm)) / (2 * hx);
          const double scale = std::max({std::abs(fd), std::abs(jp.pos_grads[i][k]), 1e-3});
          worst = std::max(worst, std::abs(jp.pos_grads[i][k] - fd) / scale);
        }
      }
      ++checked;
    }
  }
  report(9, worst < 1e-5, "gradient suite vs central finite differences",
         fmt("worst rel err=%.2e over %d instances x 3 gradient kinds", worst, checked));
}

void criterion10_monotonicity() {
  const int traces = g_audit.traces.load();
  const int monotone = g_audit.monotone.load();
  const int fc = g_audit.feasible_checked.load();
  const int fe = g_audit.feasible.load();
  const bool pass = traces > 0 && monotone == traces && fc > 0 && fe == fc;
  report(10, pass, "objective monotonicity and feasibility across criteria 1-3",
         fmt("monotone %d/%d traces, feasible %d/%d constrained outputs", monotone,
             traces, fe, fc));
}

void criterion11_matching_oracle() {
  Rng rng(1111);
  int agree = 0;
  const int total = 500;
  for (int rep = 0; rep < total; ++rep) {
    const int dim = 1 + static_cast<int>(rng.uniform01() * 2);
    DiracMeasure gt(dim), rc(dim);
    const std::size_t ng = 1 + static_cast<std::size_t>(rng.uniform01() * 6);
    const std::size_t nr = 1 + static_cast<std::size_t>(rng.uniform01() * 6);
    for (std::size_t i = 0; i < ng; ++i) {
      Vec x = Vec::zero(dim);
      for (int k = 0; k < dim; ++k) x[k] = rng.uniform01();
      gt.positions.push_back(x);
      gt.amplitudes.push_back(1.0);
    }
    for (std::size_t i = 0; i < nr; ++i) {
      Vec x = Vec::zero(dim);
      for (int k = 0; k < dim; ++k) x[k] = rng.uniform01();
      rc.positions.push_back(x);
      rc.amplitudes.push_back(1.0);
    }
    const double delta = rng.uniform(0.05, 0.4);

    // Brute-force maximum matching.
    std::vector<char> used(nr, 0);
    std::size_t best = 0;
    std::function<void(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t acc) {
      best = std::max(best, acc);
      if (i == ng) return;
      go(i + 1, acc);
      for (std::size_t j = 0; j < nr; ++j) {
        if (used[j]) continue;
        if (distance(gt.positions[i], rc.positions[j]) <= delta) {
          used[j] = 1;
          go(i + 1, acc + 1);
          used[j] = 0;
        }
      }
    };
    go(0, 0);
    if (match_spikes(gt, rc, delta).n_tp == best) ++agree;
  }
  report(11, agree == total, "greedy+augment matching equals the brute-force oracle",
         fmt("%d/%d instances agree", agree, total));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion1_noiseless_recovery();
  criterion2_sweep();
  criterion3_homotopy();
  criterion4_identities();
  criterion5_sigma_target();
  criterion6_background();
  criterion7_fwhm();
  criterion8_fenchel_young();
  criterion9_gradients();
  criterion10_monotonicity();
  criterion11_matching_oracle();
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%d criterion(s) failed, total %.1fs\n", g_failures, secs);
  return g_failures;
}
