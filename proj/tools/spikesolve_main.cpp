// spikesolve: off-the-grid sparse spike reconstruction CLI.
//
// Subcommands: simulate, solve, homotopy, metrics, bench, certdump.
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "spikesolve/spikesolve.hpp"

namespace fs = std::filesystem;
using namespace spikesolve;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string scenario_name;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

ScenarioConfig resolve_scenario(const CommonOpts& c) {
  std::optional<ScenarioConfig> cfg;
  if (!c.config_path.empty()) {
    json j = read_json(c.config_path);
    if (j.contains("scenario")) j = j["scenario"];
    if (j.contains("dim")) cfg = scenario_from_json(j);
  }
  if (!c.scenario_name.empty()) {
    if (cfg) throw ConfigError("both --scenario and a scenario config given");
    cfg = paper_scenario(c.scenario_name);
  }
  if (!cfg) throw ConfigError("no scenario: pass --scenario NAME or --config FILE");
  if (c.seed_set) cfg->seed = c.seed;
  return *cfg;
}

GridField load_acquisition(const std::string& path, const ScenarioConfig& cfg) {
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".csv") {
    GridField f = read_field_csv(path, cfg.domain);
    if (!(f.grid == cfg.grid()))
      throw ShapeMismatch("acquisition grid does not match the scenario grid");
    return f;
  }
  GridField f = ingest_volume(path);
  if (f.grid.shape != cfg.grid_shape)
    throw ShapeMismatch("volume shape does not match the scenario grid");
  return f;
}

void write_acquisition(const std::string& base, const GridField& y) {
  if (y.grid.dim() <= 2)
    write_field_csv(base + ".csv", y);
  else
    write_volume(base, y);
}

FidelityKind parse_model(const std::string& model) {
  if (model == "l2") return FidelityKind::L2;
  if (model == "kl") return FidelityKind::KL;
  throw ConfigError("unknown model '" + model + "' (expected l2 or kl)");
}

int default_alpha(FidelityKind kind) { return kind == FidelityKind::KL ? 1 : 0; }

// Solver block from --config, overridden by explicitly passed flags.
void apply_solver_config(const std::string& config_path, SFWConfig& cfg) {
  if (config_path.empty()) return;
  const json root = read_json(config_path);
  if (!root.contains("solver")) return;
  const json& s = root["solver"];
  cfg.lambda = s.value("lambda", cfg.lambda);
  cfg.alpha = s.value("alpha", cfg.alpha);
  cfg.max_outer_iters = s.value("max_outer_iters", cfg.max_outer_iters);
  cfg.optimality_tol = s.value("optimality_tol", cfg.optimality_tol);
  cfg.prune_tol = s.value("prune_tol", cfg.prune_tol);
  cfg.boosted = s.value("boosted", cfg.boosted);
  cfg.boost_slide_trigger = s.value("boost_slide_trigger", cfg.boost_slide_trigger);
  cfg.amp_solver.max_iters = s.value("amp_max_iters", cfg.amp_solver.max_iters);
  cfg.amp_solver.grad_tol = s.value("amp_grad_tol", cfg.amp_solver.grad_tol);
  cfg.slide_solver.max_iters = s.value("slide_max_iters", cfg.slide_solver.max_iters);
  cfg.slide_solver.grad_tol = s.value("slide_grad_tol", cfg.slide_solver.grad_tol);
  cfg.search.refine_factor = s.value("search_refine", cfg.search.refine_factor);
  cfg.search.topk = s.value("search_topk", cfg.search.topk);
}

std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  const auto dots = spec.find("..");
  if (dots == std::string::npos) return {std::stoull(spec)};
  const std::uint64_t a = std::stoull(spec.substr(0, dots));
  const std::uint64_t b = std::stoull(spec.substr(dots + 2));
  if (b < a) throw ConfigError("--seeds: empty range " + spec);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
  return seeds;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw ConfigError("bad lambda grid");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  return g;
}

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("SPIKESOLVE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

// Runs job(i) over [0, n) on a bounded pool; results must be written to
// preallocated slots so aggregation stays order-independent.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        job(i);
      }
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOpts& common) {
  const ScenarioConfig cfg = resolve_scenario(common);
  fs::create_directories(common.out_dir);
  const DiracMeasure gt = generate_ground_truth(cfg);
  const GridField y = simulate_acquisition(cfg, gt);
  write_spikes_csv(common.out_dir + "/ground_truth.csv", gt);
  write_acquisition(common.out_dir + "/acquisition", y);
  write_json(common.out_dir + "/scenario.json", scenario_to_json(cfg));
  std::printf("simulate: %s seed=%llu -> %zu spikes, %zu samples\n", cfg.name.c_str(),
              static_cast<unsigned long long>(cfg.seed), gt.size(), y.size());
  return 0;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

int cmd_solve(const CommonOpts& common, const std::string& acq_path,
              const std::string& model_name, SFWConfig scfg, bool alpha_set,
              double background_override) {
  const ScenarioConfig cfg = resolve_scenario(common);
  const FidelityKind kind = parse_model(model_name);
  if (!alpha_set) scfg.alpha = default_alpha(kind);
  apply_solver_config(common.config_path, scfg);

  const GridField y = load_acquisition(acq_path, cfg);
  const double b = background_override >= 0.0 ? background_override : cfg.background;
  const ForwardModel model(cfg.psf, cfg.grid(), b);
  const FidelityModel fid(kind, y);

  const SolveResult res = sfw_solve(fid, model, scfg);
  fs::create_directories(common.out_dir);
  write_spikes_csv(common.out_dir + "/spikes.csv", res.measure);
  write_json(common.out_dir + "/trace.json", trace_to_json(res));
  std::printf("solve: model=%s lambda=%g -> %zu spikes, converged=%d, objective=%g\n",
              model_name.c_str(), scfg.lambda, res.measure.size(),
              res.converged ? 1 : 0, res.trace.iters.back().objective);
  return 0;
}

// ---------------------------------------------------------------------------
// homotopy
// ---------------------------------------------------------------------------

int cmd_homotopy(const CommonOpts& common, const std::string& acq_path,
                 const std::string& model_name, const std::string& sigma_spec,
                 double bg_ring, const std::string& bg_mask_path, double c_param,
                 double gamma, int inner_iters, int t_max, bool boosted,
                 double background_override) {
  const ScenarioConfig cfg = resolve_scenario(common);
  const FidelityKind kind = parse_model(model_name);
  const GridField y = load_acquisition(acq_path, cfg);

  std::optional<GridField> mask;
  if (!bg_mask_path.empty()) {
    GridField m = read_field_csv(bg_mask_path, cfg.domain);
    if (!(m.grid == y.grid)) throw ShapeMismatch("--bg-mask grid mismatch");
    mask = std::move(m);
  } else if (bg_ring > 0.0) {
    mask = ring_mask(y.grid, bg_ring);
  }

  double b = background_override >= 0.0 ? background_override : cfg.background;
  if (background_override < 0.0 && mask) {
    b = estimate_background(y, *mask);
    std::printf("homotopy: background estimated from mask = %.6g\n", b);
  }
  const ForwardModel model(cfg.psf, cfg.grid(), b);
  const FidelityModel fid(kind, y);

  double sigma_target;
  if (sigma_spec == "auto") {
    if (!mask) throw ConfigError("--sigma-target auto needs --bg-ring or --bg-mask");
    sigma_target = estimate_sigma_target(fid, *mask, b);
    std::printf("homotopy: sigma_target (mask estimate) = %.6g\n", sigma_target);
  } else if (sigma_spec == "bertero") {
    sigma_target = poisson_discrepancy_target(y.grid);
    std::printf("homotopy: sigma_target (bertero |Omega|/2) = %.6g\n", sigma_target);
  } else {
    sigma_target = std::stod(sigma_spec);
  }

  HomotopyConfig hcfg;
  hcfg.gamma = gamma;
  hcfg.c = c_param;
  hcfg.sigma_target = sigma_target;
  hcfg.t_max = t_max > 0 ? t_max : 2 * cfg.n_spikes;
  hcfg.inner.alpha = default_alpha(kind);
  hcfg.inner.max_outer_iters = inner_iters;
  hcfg.inner.boosted = boosted;

  const HomotopyResult res = homotopy_solve(fid, model, hcfg);
  fs::create_directories(common.out_dir);
  write_spikes_csv(common.out_dir + "/spikes.csv", res.measure);
  write_json(common.out_dir + "/homotopy.json", homotopy_to_json(res));
  std::printf(
      "homotopy: %zu iterations, met_target=%d, final lambda=%g, %zu spikes\n",
      res.lambda_trace.size(), res.met_target ? 1 : 0,
      res.lambda_trace.back().lambda, res.measure.size());
  return 0;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

int cmd_metrics(const std::string& gt_path, const std::string& rec_path, double delta,
                const std::string& out_path) {
  const DiracMeasure gt = read_spikes_csv(gt_path);
  const DiracMeasure rec = read_spikes_csv(rec_path);
  const MatchReport rep = match_spikes(gt, rec, delta);
  const json j = metrics_to_json(rep, gt, rec);
  if (out_path.empty())
    std::printf("%s\n", j.dump(2).c_str());
  else
    write_json(out_path, j);
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct ReplicateOutcome {
  bool ok = false;
  std::string reason;
  double jaccard = 0.0, tp = 0.0, fp = 0.0, fn = 0.0;
  double rmse_x = 0.0, rmse_a = 0.0;
  bool have_rmse = false;
  double homotopy_iters = 0.0, final_lambda = 0.0, sigma_target = 0.0;
};

struct BenchTask {
  std::uint64_t seed = 0;
  FidelityKind kind = FidelityKind::KL;
  double lambda = 0.0;  // 0 means homotopy mode
};

ReplicateOutcome run_bench_task(const ScenarioConfig& base, const BenchTask& task,
                                double delta, int inner_iters) {
  ReplicateOutcome out;
  try {
    ScenarioConfig cfg = base;
    cfg.seed = task.seed;
    const DiracMeasure gt = generate_ground_truth(cfg);
    const GridField y = simulate_acquisition(cfg, gt);
    const ForwardModel model = cfg.model();
    const FidelityModel fid(task.kind, y);

    DiracMeasure rec;
    if (task.lambda > 0.0) {
      SFWConfig scfg;
      scfg.lambda = task.lambda;
      scfg.alpha = default_alpha(task.kind);
      scfg.max_outer_iters = 2 * cfg.n_spikes;
      rec = sfw_solve(fid, model, scfg).measure;
    } else {
      // Homotopy with the 1D comparison defaults: oracle target 1.5x the exact
      // residual, c = 40 (KL) / 15 (L2), gamma = 0.9.
      HomotopyConfig hcfg;
      hcfg.gamma = 0.9;
      hcfg.c = task.kind == FidelityKind::KL ? 40.0 : 15.0;
      hcfg.sigma_target = 1.5 * residual_sigma(fid, apply_forward(model, gt));
      hcfg.t_max = 2 * cfg.n_spikes;
      hcfg.inner.alpha = default_alpha(task.kind);
      hcfg.inner.max_outer_iters = inner_iters;
      const HomotopyResult hres = homotopy_solve(fid, model, hcfg);
      rec = hres.measure;
      out.homotopy_iters = static_cast<double>(hres.lambda_trace.size());
      out.final_lambda = hres.lambda_trace.back().lambda;
      out.sigma_target = hcfg.sigma_target;
    }

    const MatchReport rep = match_spikes(gt, rec, delta);
    out.jaccard = jaccard(rep);
    out.tp = static_cast<double>(rep.n_tp);
    out.fp = static_cast<double>(rep.n_fp);
    out.fn = static_cast<double>(rep.n_fn);
    if (rep.n_tp > 0) {
      out.rmse_x = rmse_positions(rep, gt, rec);
      out.rmse_a = rmse_amplitudes(rep, gt, rec);
      out.have_rmse = true;
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.reason = e.what();
  }
  return out;
}

int cmd_bench(const CommonOpts& common, const std::string& seeds_spec,
              const std::string& models_spec, const std::string& lambdas_spec,
              bool homotopy_mode, double delta, int inner_iters, int threads) {
  const ScenarioConfig base = resolve_scenario(common);
  const std::vector<std::uint64_t> seeds = parse_seed_range(seeds_spec);
  if (seeds.empty()) throw ConfigError("bench: empty seed list");

  std::vector<FidelityKind> kinds;
  if (models_spec == "both") {
    kinds = {FidelityKind::KL, FidelityKind::L2};
  } else {
    for (std::size_t start = 0; start < models_spec.size();) {
      auto comma = models_spec.find(',', start);
      if (comma == std::string::npos) comma = models_spec.size();
      kinds.push_back(parse_model(models_spec.substr(start, comma - start)));
      start = comma + 1;
    }
  }

  std::vector<double> lambdas;
  if (!homotopy_mode) {
    double lo = 0.1, hi = 10.0;
    int n = 20;
    if (!lambdas_spec.empty()) {
      const auto c1 = lambdas_spec.find(':');
      const auto c2 = lambdas_spec.find(':', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw ConfigError("--lambdas expects lo:hi:n");
      lo = std::stod(lambdas_spec.substr(0, c1));
      hi = std::stod(lambdas_spec.substr(c1 + 1, c2 - c1 - 1));
      n = std::stoi(lambdas_spec.substr(c2 + 1));
    }
    lambdas = log_grid(lo, hi, n);
  } else {
    lambdas = {0.0};
  }

  std::vector<BenchTask> tasks;
  for (FidelityKind kind : kinds)
    for (double lambda : lambdas)
      for (std::uint64_t seed : seeds) tasks.push_back({seed, kind, lambda});

  std::vector<ReplicateOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), worker_count(threads), [&](std::size_t i) {
    outcomes[i] = run_bench_task(base, tasks[i], delta, inner_iters);
  });

  fs::create_directories(common.out_dir);

  // Per-replicate rows.
  {
    auto f = std::ofstream(common.out_dir + "/replicates.csv");
    f << "model,lambda,seed,ok,jaccard,tp,fp,fn,rmse_x,rmse_a,homotopy_iters,"
         "final_lambda\n";
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& t = tasks[i];
      const auto& o = outcomes[i];
      f << (t.kind == FidelityKind::KL ? "kl" : "l2") << "," << t.lambda << ","
        << t.seed << "," << (o.ok ? 1 : 0) << "," << o.jaccard << "," << o.tp << ","
        << o.fp << "," << o.fn << "," << o.rmse_x << "," << o.rmse_a << ","
        << o.homotopy_iters << "," << o.final_lambda << "\n";
    }
  }

  // Aggregates in fixed (model, lambda) order, failures excluded and recorded.
  json agg;
  agg["schema_version"] = 1;
  agg["scenario"] = base.name;
  agg["delta"] = delta;
  agg["n_seeds"] = seeds.size();
  agg["results"] = json::array();
  agg["failures"] = json::array();

  for (FidelityKind kind : kinds) {
    const std::string model = kind == FidelityKind::KL ? "kl" : "l2";
    std::ofstream curve(common.out_dir + "/curve_" + model + ".csv");
    curve << "lambda,jaccard_mean,jaccard_std,tp_mean,fn_mean,fp_mean,rmse_x_mean,"
             "rmse_a_mean,n_ok\n";
    for (double lambda : lambdas) {
      std::vector<const ReplicateOutcome*> ok;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].kind != kind || tasks[i].lambda != lambda) continue;
        if (outcomes[i].ok) {
          ok.push_back(&outcomes[i]);
        } else {
          agg["failures"].push_back({{"seed", tasks[i].seed},
                                     {"model", model},
                                     {"lambda", lambda},
                                     {"reason", outcomes[i].reason}});
        }
      }
      auto mean_of = [&](auto proj) {
        double s = 0.0;
        for (const auto* o : ok) s += proj(*o);
        return ok.empty() ? 0.0 : s / static_cast<double>(ok.size());
      };
      const double jm = mean_of([](const ReplicateOutcome& o) { return o.jaccard; });
      double jv = 0.0;
      for (const auto* o : ok) jv += (o->jaccard - jm) * (o->jaccard - jm);
      const double jstd = ok.size() > 1 ? std::sqrt(jv / (ok.size() - 1)) : 0.0;

      json row;
      row["model"] = model;
      if (lambda > 0.0) row["lambda"] = lambda;
      row["n_ok"] = ok.size();
      row["jaccard_mean"] = jm;
      row["jaccard_std"] = jstd;
      row["tp_mean"] = mean_of([](const ReplicateOutcome& o) { return o.tp; });
      row["fp_mean"] = mean_of([](const ReplicateOutcome& o) { return o.fp; });
      row["fn_mean"] = mean_of([](const ReplicateOutcome& o) { return o.fn; });
      std::vector<const ReplicateOutcome*> with_rmse;
      for (const auto* o : ok)
        if (o->have_rmse) with_rmse.push_back(o);
      if (!with_rmse.empty()) {
        double rx = 0.0, ra = 0.0;
        for (const auto* o : with_rmse) {
          rx += o->rmse_x;
          ra += o->rmse_a;
        }
        row["rmse_x_mean"] = rx / static_cast<double>(with_rmse.size());
        row["rmse_a_mean"] = ra / static_cast<double>(with_rmse.size());
      }
      if (homotopy_mode) {
        row["homotopy_iters_mean"] =
            mean_of([](const ReplicateOutcome& o) { return o.homotopy_iters; });
        row["final_lambda_mean"] =
            mean_of([](const ReplicateOutcome& o) { return o.final_lambda; });
        row["sigma_target_mean"] =
            mean_of([](const ReplicateOutcome& o) { return o.sigma_target; });
      }
      agg["results"].push_back(row);

      curve << (lambda > 0.0 ? lambda : 0.0) << "," << jm << "," << jstd << ","
            << row["tp_mean"].get<double>() << "," << row["fn_mean"].get<double>()
            << "," << row["fp_mean"].get<double>() << ","
            << (row.contains("rmse_x_mean") ? row["rmse_x_mean"].get<double>() : 0.0)
            << ","
            << (row.contains("rmse_a_mean") ? row["rmse_a_mean"].get<double>() : 0.0)
            << "," << ok.size() << "\n";
    }
  }
  write_json(common.out_dir + "/aggregate.json", agg);
  std::printf("bench: %zu tasks done (%zu failures), results in %s\n", tasks.size(),
              agg["failures"].size(), common.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// certdump
// ---------------------------------------------------------------------------

int cmd_certdump(const CommonOpts& common, const std::string& acq_path,
                 const std::string& model_name, double lambda,
                 const std::string& spikes_path, int refine,
                 double background_override) {
  const ScenarioConfig cfg = resolve_scenario(common);
  const FidelityKind kind = parse_model(model_name);
  const GridField y = load_acquisition(acq_path, cfg);
  const double b = background_override >= 0.0 ? background_override : cfg.background;
  const ForwardModel model(cfg.psf, cfg.grid(), b);
  const FidelityModel fid(kind, y);

  DiracMeasure mu(cfg.domain.dim);
  if (!spikes_path.empty()) mu = read_spikes_csv(spikes_path);

  const Certificate cert = build_certificate(fid, model, mu, lambda, default_alpha(kind));
  std::array<std::vector<double>, 3> axes;
  std::array<int, 3> shape{1, 1, 1};
  for (int k = 0; k < cfg.domain.dim; ++k) {
    const int n = cfg.grid_shape[k] * refine;
    shape[k] = n;
    for (int i = 0; i < n; ++i)
      axes[k].push_back(cfg.domain.lower[k] + (i + 0.5) * cfg.domain.width(k) / n);
  }
  std::vector<double> values = adjoint_on_axes(model, cert.p, axes);
  double max_eta = 0.0;
  for (double& v : values) {
    v /= lambda;
    if (default_alpha(kind)) v = std::max(v, 0.0);
    max_eta = std::max(max_eta, std::abs(v));
  }
  const Grid dump_grid(cfg.domain, shape);
  fs::create_directories(common.out_dir);
  write_acquisition(common.out_dir + "/certificate", GridField(dump_grid, std::move(values)));
  std::printf("certdump: lambda=%g max|eta|=%.12g\n", lambda, max_eta);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"off-the-grid sparse spike reconstruction (KL/L2 + TV on measures)"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string acq_path, model_name = "kl", gt_path, rec_path, out_file;
  std::string sigma_spec = "auto", bg_mask_path, seeds_spec = "0", models_spec = "both";
  std::string lambdas_spec, spikes_path;
  double bg_ring = 0.0, delta = 0.05, c_param = 40.0, gamma = 0.9;
  double background_override = -1.0;
  int inner_iters = 1, t_max = 0, threads = 0, refine = 4;
  bool homotopy_mode = false, boosted = false, alpha_set = false;
  SFWConfig scfg;

  auto add_common = [&](CLI::App* sub, bool with_scenario = true) {
    sub->add_option("--config", common.config_path, "JSON config file");
    if (with_scenario)
      sub->add_option("--scenario", common.scenario_name, "named scenario (sim1d/sim2d/sim3d)");
    sub->add_option("--out", common.out_dir, "output directory");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate ground truth and acquisition");
  add_common(sim);
  sim->add_option("--seed", common.seed, "base seed")->each([&](const std::string&) {
    common.seed_set = true;
  });

  CLI::App* solve = app.add_subcommand("solve", "run sliding Frank-Wolfe at fixed lambda");
  add_common(solve);
  solve->add_option("--acquisition", acq_path, "acquisition file (.csv or volume .json)")
      ->required();
  solve->add_option("--model", model_name, "l2 or kl");
  solve->add_option("--lambda", scfg.lambda, "regularization parameter")->required();
  solve->add_option("--alpha", scfg.alpha, "0/1 non-negativity")->each([&](const std::string&) {
    alpha_set = true;
  });
  solve->add_option("--max-iters", scfg.max_outer_iters, "outer iteration cap");
  solve->add_option("--background", background_override, "constant background override");
  solve->add_flag("--boosted", scfg.boosted, "boosted sliding schedule");

  CLI::App* hom = app.add_subcommand("homotopy", "automatic lambda selection");
  add_common(hom);
  hom->add_option("--acquisition", acq_path, "acquisition file")->required();
  hom->add_option("--model", model_name, "l2 or kl");
  hom->add_option("--sigma-target", sigma_spec, "auto | bertero | VALUE");
  hom->add_option("--bg-ring", bg_ring, "background ring fraction per axis");
  hom->add_option("--bg-mask", bg_mask_path, "background mask field (csv)");
  hom->add_option("-c,--c", c_param, "homotopy margin c");
  hom->add_option("--gamma", gamma, "lambda_1 relaxation");
  hom->add_option("--inner-iters", inner_iters, "inner SFW iteration cap");
  hom->add_option("--tmax", t_max, "homotopy iteration cap (default 2 n_spikes)");
  hom->add_option("--background", background_override, "constant background override");
  hom->add_flag("--boosted", boosted, "boosted inner solver");

  CLI::App* met = app.add_subcommand("metrics", "match spikes and report quality");
  met->add_option("--gt", gt_path, "ground truth csv")->required();
  met->add_option("--rec", rec_path, "reconstruction csv")->required();
  met->add_option("--delta", delta, "matching radius");
  met->add_option("--out", out_file, "output json (stdout if omitted)");

  CLI::App* bench = app.add_subcommand("bench", "seeded replicate experiments");
  add_common(bench);
  bench->add_option("--seeds", seeds_spec, "seed or range a..b");
  bench->add_option("--models", models_spec, "kl, l2 or both");
  bench->add_option("--lambdas", lambdas_spec, "lo:hi:n log grid (sweep mode)");
  bench->add_flag("--homotopy", homotopy_mode, "homotopy mode instead of a sweep");
  bench->add_option("--delta", delta, "matching radius");
  bench->add_option("--inner-iters", inner_iters, "inner SFW cap in homotopy mode");
  bench->add_option("--threads", threads, "worker pool size");

  CLI::App* dump = app.add_subcommand("certdump", "dump the dual certificate field");
  add_common(dump);
  dump->add_option("--acquisition", acq_path, "acquisition file")->required();
  dump->add_option("--model", model_name, "l2 or kl");
  dump->add_option("--lambda", scfg.lambda, "lambda")->required();
  dump->add_option("--spikes", spikes_path, "measure csv (default: zero measure)");
  dump->add_option("--refine", refine, "search grid refinement factor");
  dump->add_option("--background", background_override, "constant background override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(common);
    if (solve->parsed())
      return cmd_solve(common, acq_path, model_name, scfg, alpha_set,
                       background_override);
    if (hom->parsed())
      return cmd_homotopy(common, acq_path, model_name, sigma_spec, bg_ring,
                          bg_mask_path, c_param, gamma, inner_iters, t_max, boosted,
                          background_override);
    if (met->parsed()) return cmd_metrics(gt_path, rec_path, delta, out_file);
    if (bench->parsed())
      return cmd_bench(common, seeds_spec, models_spec, lambdas_spec, homotopy_mode,
                       delta, inner_iters, threads);
    if (dump->parsed())
      return cmd_certdump(common, acq_path, model_name, scfg.lambda, spikes_path,
                          refine, background_override);
  } catch (const IoError& e) {
    std::fprintf(stderr, "spikesolve: io error: %s\n", e.what());
    return 4;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "spikesolve: numerical failure: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "spikesolve: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spikesolve: %s\n", e.what());
    return 2;
  }
  return 2;
}
