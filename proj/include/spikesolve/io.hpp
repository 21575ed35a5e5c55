#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikesolve/field.hpp"
#include "spikesolve/geometry.hpp"
#include "spikesolve/homotopy.hpp"
#include "spikesolve/metrics.hpp"
#include "spikesolve/sfw.hpp"
#include "spikesolve/simulation.hpp"

namespace spikesolve {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spikes CSV: header `x0[,x1[,x2]],amplitude`, one spike per row, LF endings.
// ---------------------------------------------------------------------------

inline void write_spikes_csv(const std::string& path, const DiracMeasure& mu) {
  auto f = detail::open_out(path);
  for (int k = 0; k < mu.dim; ++k) f << "x" << k << ",";
  f << "amplitude\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (int k = 0; k < mu.dim; ++k)
      f << detail::fmt_double(mu.positions[i][k]) << ",";
    f << detail::fmt_double(mu.amplitudes[i]) << "\n";
  }
}

inline DiracMeasure read_spikes_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw MalformedHeader("spikes csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto cols = detail::split_csv_line(line);
  const int dim = static_cast<int>(cols.size()) - 1;
  if (dim < 1 || dim > 3 || cols.back() != "amplitude")
    throw MalformedHeader("spikes csv: bad header in " + path);
  DiracMeasure mu(dim);
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != cols.size())
      throw MalformedHeader("spikes csv: ragged row in " + path);
    Vec x = Vec::zero(dim);
    for (int k = 0; k < dim; ++k) x[k] = std::stod(cells[k]);
    mu.positions.push_back(x);
    mu.amplitudes.push_back(std::stod(cells[dim]));
  }
  return mu;
}

// ---------------------------------------------------------------------------
// GridField I/O. 1D/2D go through CSV (row-major; one grid row per line);
// 3D through raw little-endian float32 with a JSON sidecar.
// ---------------------------------------------------------------------------

inline void write_field_csv(const std::string& path, const GridField& field) {
  if (field.grid.dim() > 2)
    throw ConfigError("write_field_csv: use the raw+sidecar format for 3D fields");
  auto f = detail::open_out(path);
  const int n0 = field.grid.shape[0];
  const int n1 = field.grid.dim() >= 2 ? field.grid.shape[1] : 1;
  for (int i0 = 0; i0 < n0; ++i0) {
    for (int i1 = 0; i1 < n1; ++i1) {
      if (i1) f << ",";
      f << detail::fmt_double(field.values[static_cast<std::size_t>(i0) * n1 + i1]);
    }
    f << "\n";
  }
}

// Reads a 1D/2D CSV field; the grid is reconstructed from `domain` (unit box
// by default, matching the simulators' normalized scenarios).
inline GridField read_field_csv(const std::string& path,
                                std::optional<Domain> domain = std::nullopt) {
  auto f = detail::open_in(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(std::stod(c));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeMismatch("field csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw MalformedHeader("field csv: empty file " + path);
  const int n0 = static_cast<int>(rows.size());
  const int n1 = static_cast<int>(rows.front().size());
  const int dim = n1 == 1 ? 1 : 2;
  Domain dom = domain ? *domain : Domain::unit(dim);
  if (dom.dim != dim) throw ShapeMismatch("field csv: domain dim mismatch");
  Grid grid(dom, {n0, n1, 1});
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n0) * n1);
  for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
  return GridField(grid, std::move(values));
}

// Raw volume: <base>.raw holds row-major little-endian float32; <base>.json is
// the sidecar {"shape", "spacing", "order", "origin"?}.
inline void write_volume(const std::string& base, const GridField& field) {
  const Grid& g = field.grid;
  nlohmann::json side;
  side["shape"] = {g.shape[0], g.shape[1], g.shape[2]};
  side["spacing"] = {g.spacing(0), g.dim() > 1 ? g.spacing(1) : 1.0,
                     g.dim() > 2 ? g.spacing(2) : 1.0};
  side["order"] = "row-major";
  side["origin"] = {g.domain.lower[0], g.dim() > 1 ? g.domain.lower[1] : 0.0,
                    g.dim() > 2 ? g.domain.lower[2] : 0.0};
  {
    auto f = detail::open_out(base + ".json");
    f << side.dump(2) << "\n";
  }
  auto f = detail::open_out(base + ".raw");
  for (double v : field.values) {
    const float x = static_cast<float>(v);
    f.write(reinterpret_cast<const char*>(&x), sizeof x);
  }
}

// Accepts the sidecar path (<base>.json) or the base path.
inline GridField ingest_volume(const std::string& path) {
  std::string base = path;
  if (base.size() > 5 && base.substr(base.size() - 5) == ".json")
    base = base.substr(0, base.size() - 5);
  nlohmann::json side;
  try {
    auto f = detail::open_in(base + ".json");
    f >> side;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader("ingest_volume: unparsable sidecar: " + std::string(e.what()));
  }
  if (!side.contains("shape") || !side.contains("spacing"))
    throw MalformedHeader("ingest_volume: sidecar missing shape/spacing");
  if (side.value("order", "row-major") != "row-major")
    throw MalformedHeader("ingest_volume: unsupported order");
  auto shape = side["shape"];
  auto spacing = side["spacing"];
  if (!shape.is_array() || shape.size() != 3 || !spacing.is_array() || spacing.size() != 3)
    throw MalformedHeader("ingest_volume: shape/spacing must be length-3 arrays");
  std::array<int, 3> n{shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()};
  std::array<double, 3> d{spacing[0].get<double>(), spacing[1].get<double>(),
                          spacing[2].get<double>()};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  if (side.contains("origin"))
    for (int k = 0; k < 3; ++k) origin[k] = side["origin"][k].get<double>();
  for (int k = 0; k < 3; ++k)
    if (n[k] < 1 || !(d[k] > 0.0))
      throw MalformedHeader("ingest_volume: non-positive shape or spacing");

  const int dim = n[2] > 1 ? 3 : (n[1] > 1 ? 2 : 1);
  Vec lo = Vec::zero(dim), hi = Vec::zero(dim);
  for (int k = 0; k < dim; ++k) {
    lo[k] = origin[k];
    hi[k] = origin[k] + n[k] * d[k];
  }
  Grid grid(Domain(lo, hi), n);

  auto f = detail::open_in(base + ".raw");
  f.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  if (bytes != grid.size() * sizeof(float))
    throw ShapeMismatch("ingest_volume: payload size does not match sidecar shape");
  std::vector<double> values(grid.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    float x;
    f.read(reinterpret_cast<char*>(&x), sizeof x);
    values[j] = static_cast<double>(x);
  }
  return GridField(grid, std::move(values));
}

// ---------------------------------------------------------------------------
// JSON emissions. Every document carries schema_version matching the schemas
// shipped under schemas/.
// ---------------------------------------------------------------------------

inline nlohmann::json trace_to_json(const SolveResult& res) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["converged"] = res.converged;
  j["iters"] = nlohmann::json::array();
  for (const IterRecord& r : res.trace.iters)
    j["iters"].push_back({{"k", r.k},
                          {"objective", r.objective},
                          {"sup_eta", r.sup_eta},
                          {"n_spikes", r.n_spikes}});
  return j;
}

inline nlohmann::json homotopy_to_json(const HomotopyResult& res) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["met_target"] = res.met_target;
  j["n_spikes"] = res.measure.size();
  j["lambda_trace"] = nlohmann::json::array();
  for (const HomotopyStep& s : res.lambda_trace)
    j["lambda_trace"].push_back({{"t", s.t}, {"lambda", s.lambda}, {"sigma", s.sigma}});
  return j;
}

inline nlohmann::json metrics_to_json(const MatchReport& rep, const DiracMeasure& gt,
                                      const DiracMeasure& rec) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["delta"] = rep.delta;
  j["tp"] = rep.n_tp;
  j["fp"] = rep.n_fp;
  j["fn"] = rep.n_fn;
  j["jaccard"] = (rep.n_tp + rep.n_fp + rep.n_fn) ? jaccard(rep) : 0.0;
  if (rep.n_tp > 0) {
    j["rmse_x"] = rmse_positions(rep, gt, rec);
    j["rmse_a"] = rmse_amplitudes(rep, gt, rec);
  } else {
    j["rmse_x"] = nullptr;
    j["rmse_a"] = nullptr;
  }
  return j;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["name"] = cfg.name;
  j["dim"] = cfg.domain.dim;
  j["lower"] = std::vector<double>(cfg.domain.lower.c.begin(),
                                   cfg.domain.lower.c.begin() + cfg.domain.dim);
  j["upper"] = std::vector<double>(cfg.domain.upper.c.begin(),
                                   cfg.domain.upper.c.begin() + cfg.domain.dim);
  j["shape"] = std::vector<int>(cfg.grid_shape.begin(),
                                cfg.grid_shape.begin() + cfg.domain.dim);
  j["sigma"] = std::vector<double>(cfg.psf.sigma.begin(),
                                   cfg.psf.sigma.begin() + cfg.domain.dim);
  j["n_spikes"] = cfg.n_spikes;
  j["amp_range"] = {cfg.amp_lo, cfg.amp_hi};
  j["background"] = cfg.background;
  j["noise"] = cfg.noise == NoiseKind::Poisson
                   ? "poisson"
                   : (cfg.noise == NoiseKind::Gaussian ? "gaussian" : "none");
  j["gaussian_std"] = cfg.gaussian_std;
  j["photon_scale"] = cfg.photon_scale;
  j["seed"] = cfg.seed;
  return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  try {
    cfg.name = j.value("name", "custom");
    const int dim = j.at("dim").get<int>();
    Vec lo = Vec::zero(dim), hi = Vec::zero(dim);
    for (int k = 0; k < dim; ++k) {
      lo[k] = j.at("lower")[k].get<double>();
      hi[k] = j.at("upper")[k].get<double>();
    }
    cfg.domain = Domain(lo, hi);
    cfg.grid_shape = {1, 1, 1};
    for (int k = 0; k < dim; ++k) cfg.grid_shape[k] = j.at("shape")[k].get<int>();
    std::array<double, 3> sig{1.0, 1.0, 1.0};
    for (int k = 0; k < dim; ++k) sig[k] = j.at("sigma")[k].get<double>();
    cfg.psf = GaussianPSF(dim, sig);
    cfg.n_spikes = j.at("n_spikes").get<int>();
    cfg.amp_lo = j.at("amp_range")[0].get<double>();
    cfg.amp_hi = j.at("amp_range")[1].get<double>();
    cfg.background = j.at("background").get<double>();
    const std::string noise = j.value("noise", "poisson");
    cfg.noise = noise == "poisson" ? NoiseKind::Poisson
                                   : (noise == "gaussian" ? NoiseKind::Gaussian
                                                          : NoiseKind::None);
    cfg.gaussian_std = j.value("gaussian_std", 0.0);
    cfg.photon_scale = j.value("photon_scale", 1.0);
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(0));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader("scenario json: " + std::string(e.what()));
  }
  return cfg;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto f = detail::open_out(path);
  f << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::string& path) {
  auto f = detail::open_in(path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader("json: " + path + ": " + std::string(e.what()));
  }
  return j;
}

}  // namespace spikesolve
