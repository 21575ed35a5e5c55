#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spikesolve/geometry.hpp"

namespace spikesolve {

struct MatchPair {
  std::size_t gt_index = 0;
  std::size_t rec_index = 0;
  double dist = 0.0;
};

struct MatchReport {
  std::vector<MatchPair> pairs;
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_fn = 0;
  double delta = 0.0;
};

// Spike matching within radius delta. Pairs are seeded greedily by ascending
// distance (ties by (gt_index, rec_index)), then augmented to maximum
// cardinality so the TP count equals the optimal assignment's.
inline MatchReport match_spikes(const DiracMeasure& gt, const DiracMeasure& rec,
                                double delta) {
  if (!(delta > 0.0)) throw ConfigError("match_spikes: delta must be > 0");
  const std::size_t ng = gt.size(), nr = rec.size();

  struct Edge {
    double d;
    std::size_t i, j;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < ng; ++i)
    for (std::size_t j = 0; j < nr; ++j) {
      const double d = distance(gt.positions[i], rec.positions[j]);
      if (d <= delta) edges.push_back({d, i, j});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rec_of_gt(ng, kUnmatched), gt_of_rec(nr, kUnmatched);
  for (const Edge& e : edges)
    if (rec_of_gt[e.i] == kUnmatched && gt_of_rec[e.j] == kUnmatched) {
      rec_of_gt[e.i] = e.j;
      gt_of_rec[e.j] = e.i;
    }

  // Kuhn augmentation; candidate order per gt spike by (distance, rec_index).
  std::vector<std::vector<std::size_t>> adj(ng);
  for (const Edge& e : edges) adj[e.i].push_back(e.j);
  std::vector<char> seen(nr);
  auto augment = [&](auto&& self, std::size_t i) -> bool {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (gt_of_rec[j] == kUnmatched || self(self, gt_of_rec[j])) {
        gt_of_rec[j] = i;
        rec_of_gt[i] = j;
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < ng; ++i) {
    if (rec_of_gt[i] != kUnmatched) continue;
    std::fill(seen.begin(), seen.end(), 0);
    augment(augment, i);
  }

  MatchReport rep;
  rep.delta = delta;
  for (std::size_t i = 0; i < ng; ++i)
    if (rec_of_gt[i] != kUnmatched)
      rep.pairs.push_back(
          {i, rec_of_gt[i], distance(gt.positions[i], rec.positions[rec_of_gt[i]])});
  rep.n_tp = rep.pairs.size();
  rep.n_fp = nr - rep.n_tp;
  rep.n_fn = ng - rep.n_tp;
  return rep;
}

inline double jaccard(const MatchReport& rep) {
  const std::size_t denom = rep.n_tp + rep.n_fp + rep.n_fn;
  if (denom == 0) throw EmptyComparison("jaccard: both measures empty");
  return static_cast<double>(rep.n_tp) / static_cast<double>(denom);
}

inline double rmse_positions(const MatchReport& rep, const DiracMeasure& gt,
                             const DiracMeasure& rec) {
  (void)gt;
  (void)rec;
  if (rep.n_tp == 0) throw NoMatches("rmse_positions: no matched pairs");
  double s = 0.0;
  for (const MatchPair& p : rep.pairs) s += p.dist * p.dist;
  return std::sqrt(s / static_cast<double>(rep.n_tp));
}

inline double rmse_amplitudes(const MatchReport& rep, const DiracMeasure& gt,
                              const DiracMeasure& rec) {
  if (rep.n_tp == 0) throw NoMatches("rmse_amplitudes: no matched pairs");
  double s = 0.0;
  for (const MatchPair& p : rep.pairs) {
    const double d = rec.amplitudes[p.rec_index] - gt.amplitudes[p.gt_index];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(rep.n_tp));
}

}  // namespace spikesolve
