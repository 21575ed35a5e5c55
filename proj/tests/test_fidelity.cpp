#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "spikesolve/fidelity.hpp"
#include "spikesolve/rng.hpp"

using namespace spikesolve;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Grid grid1d(int n) { return Grid(Domain::unit(1), {n, 1, 1}); }

GridField positive_field(const Grid& g, Rng& rng, double lo = 0.1, double hi = 3.0) {
  GridField f(g);
  for (double& v : f.values) v = rng.uniform(lo, hi);
  return f;
}

}  // namespace

TEST_CASE("fidelity_value vanishes at a perfect fit") {
  Rng rng(3);
  const Grid g = grid1d(32);
  const GridField y = positive_field(g, rng);
  for (FidelityKind kind : {FidelityKind::L2, FidelityKind::KL}) {
    const FidelityModel fid(kind, y);
    CHECK(fidelity_value(fid, y) == 0.0);
  }
}

TEST_CASE("KL value on a single sample") {
  const Grid g = grid1d(1);
  const FidelityModel fid(FidelityKind::KL, GridField(g, 1.0));
  CHECK_THAT(fidelity_value(fid, GridField(g, 2.0)),
             WithinRel(0.30685281944005469, 1e-14));
}

TEST_CASE("KL extension: any nonpositive prediction gives +inf") {
  const Grid g = grid1d(4);
  const FidelityModel fid(FidelityKind::KL, GridField(g, 1.0));
  GridField w(g, 1.0);
  w.values[2] = 0.0;
  CHECK(fidelity_value(fid, w) == kInf);
  w.values[2] = -0.5;
  CHECK(fidelity_value(fid, w) == kInf);
  CHECK_THROWS_AS(fidelity_gradient(fid, w), NonPositivePrediction);
}

TEST_CASE("observed zeros are admitted with the 0 log 0 convention") {
  const Grid g = grid1d(2);
  GridField y(g, 0.0);
  y.values[1] = 2.0;
  const FidelityModel fid(FidelityKind::KL, y);
  GridField w(g, 1.0);
  // sample 0: w - 0 = 1; sample 1: 1 - 2 + 2(log 2 - log 1)
  CHECK_THAT(fidelity_value(fid, w),
             WithinRel(1.0 + (1.0 - 2.0 + 2.0 * std::log(2.0)), 1e-14));
  const GridField grad = fidelity_gradient(fid, w);
  CHECK(grad.values[0] == 1.0);  // 1 - 0/w
}

TEST_CASE("gradients at the observation vanish") {
  Rng rng(5);
  const Grid g = grid1d(16);
  const GridField y = positive_field(g, rng);
  for (FidelityKind kind : {FidelityKind::L2, FidelityKind::KL}) {
    const FidelityModel fid(kind, y);
    const GridField grad = fidelity_gradient(fid, y);
    for (double v : grad.values) CHECK_THAT(v, WithinAbs(0.0, 1e-15));
  }
}

TEST_CASE("KL gradient on a single sample") {
  const Grid g = grid1d(1);
  const FidelityModel fid(FidelityKind::KL, GridField(g, 1.0));
  CHECK_THAT(fidelity_gradient(fid, GridField(g, 2.0)).values[0],
             WithinRel(0.5, 1e-15));
}

TEST_CASE("fidelity_gradient matches finite differences") {
  Rng rng(17);
  const Grid g = grid1d(24);
  for (FidelityKind kind : {FidelityKind::L2, FidelityKind::KL}) {
    for (int rep = 0; rep < 20; ++rep) {
      const GridField y = positive_field(g, rng);
      const FidelityModel fid(kind, y);
      GridField w = positive_field(g, rng, 0.3, 3.0);
      const GridField grad = fidelity_gradient(fid, w);
      for (std::size_t j = 0; j < 5; ++j) {
        const std::size_t idx = static_cast<std::size_t>(rng.uniform01() * g.size());
        const double h = 1e-6;
        GridField wp = w, wm = w;
        wp.values[idx] += h;
        wm.values[idx] -= h;
        const double fd = (fidelity_value(fid, wp) - fidelity_value(fid, wm)) / (2 * h);
        CHECK_THAT(grad.values[idx], WithinRel(fd, 1e-6));
      }
    }
  }
}

TEST_CASE("residual_sigma equals fidelity_value") {
  Rng rng(29);
  const Grid g = grid1d(32);
  for (int rep = 0; rep < 100; ++rep) {
    const GridField y = positive_field(g, rng);
    const GridField w = positive_field(g, rng);
    for (FidelityKind kind : {FidelityKind::L2, FidelityKind::KL}) {
      const FidelityModel fid(kind, y);
      CHECK(residual_sigma(fid, w) == fidelity_value(fid, w));
    }
  }
}

TEST_CASE("kl_scalar_conjugate closed form") {
  CHECK_THAT(kl_scalar_conjugate(1.0, 1.0, 0.5), WithinRel(0.69314718055994531, 1e-14));
  CHECK(kl_scalar_conjugate(2.5, 0.7, 0.0) == 0.0);
  CHECK(kl_scalar_conjugate(1.0, 2.0, 0.5) == kInf);
  CHECK(kl_scalar_conjugate(1.0, 2.0, 0.7) == kInf);
  CHECK_THROWS_AS(kl_scalar_conjugate(0.0, 1.0, 0.1), NonPositiveInput);
}

TEST_CASE("Fenchel-Young equality at s* = g_t'(s)") {
  Rng rng(71);
  for (int rep = 0; rep < 2000; ++rep) {
    const double t = rng.uniform(0.05, 10.0);
    const double lambda = rng.uniform(0.05, 10.0);
    const double s = rng.uniform(0.05, 10.0);
    const double s_star = (1.0 - t / s) / lambda;
    REQUIRE(s_star < 1.0 / lambda);
    const double lhs = kl_scalar(t, lambda, s) + kl_scalar_conjugate(t, lambda, s_star);
    const double rhs = s * s_star;
    CHECK_THAT(lhs, WithinAbs(rhs, 1e-10 * std::max(1.0, std::abs(rhs))));
  }
}

TEST_CASE("Fenchel-Young inequality for random feasible pairs") {
  Rng rng(73);
  for (int rep = 0; rep < 2000; ++rep) {
    const double t = rng.uniform(0.05, 5.0);
    const double lambda = rng.uniform(0.05, 5.0);
    const double s = rng.uniform(0.05, 5.0);
    const double s_star = rng.uniform(-5.0, 1.0 / lambda - 1e-6);
    const double lhs = kl_scalar(t, lambda, s) + kl_scalar_conjugate(t, lambda, s_star);
    CHECK(lhs >= s * s_star - 1e-9 * std::max(1.0, std::abs(s * s_star)));
  }
}

TEST_CASE("convexity along segments") {
  Rng rng(79);
  const Grid g = grid1d(16);
  for (FidelityKind kind : {FidelityKind::L2, FidelityKind::KL}) {
    for (int rep = 0; rep < 50; ++rep) {
      const FidelityModel fid(kind, positive_field(g, rng));
      const GridField w1 = positive_field(g, rng);
      const GridField w2 = positive_field(g, rng);
      const double th = rng.uniform01();
      GridField mix(g);
      for (std::size_t j = 0; j < g.size(); ++j)
        mix.values[j] = (1.0 - th) * w1.values[j] + th * w2.values[j];
      const double bound =
          (1.0 - th) * fidelity_value(fid, w1) + th * fidelity_value(fid, w2);
      CHECK(fidelity_value(fid, mix) <= bound + 1e-10 * std::max(1.0, bound));
    }
  }
}

TEST_CASE("KL nonnegativity and identity of indiscernibles") {
  Rng rng(83);
  const Grid g = grid1d(16);
  for (int rep = 0; rep < 100; ++rep) {
    const GridField y = positive_field(g, rng);
    const FidelityModel fid(FidelityKind::KL, y);
    const GridField w = positive_field(g, rng);
    const double v = fidelity_value(fid, w);
    CHECK(v >= 0.0);
    bool equal = true;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (w.values[j] != y.values[j]) equal = false;
    if (v == 0.0) CHECK(equal);
  }
}

TEST_CASE("grid mismatch is rejected") {
  const FidelityModel fid(FidelityKind::L2, GridField(grid1d(8), 1.0));
  CHECK_THROWS_AS(fidelity_value(fid, GridField(grid1d(9), 1.0)), GridMismatch);
}
