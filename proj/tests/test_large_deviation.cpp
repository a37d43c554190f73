#include <cmath>
#include <vector>

#include "doctest.h"
#include "metaswitch/large_deviation.hpp"
#include "metaswitch/linalg.hpp"
#include "metaswitch/spectral.hpp"
#include "test_util.hpp"

using namespace metaswitch;
using metaswitch::testing::optical_bloch_oracle;

namespace {

ModelParams at(int n, double delta) {
  ModelParams p;
  p.n_atoms = n;
  p.detuning = delta;
  return p;
}

SCGFCurve synthetic(const std::vector<double>& grid, double (*theta)(double)) {
  SCGFCurve c;
  c.params.n_atoms = 10;
  c.s = grid;
  for (double s : grid) c.theta.push_back(theta(s));
  c.failed.assign(grid.size(), false);
  return c;
}

// Smoothed kink between rates 8 (s < 0) and 1 (s > 0) with weak curvature on both branches.
double kinked(double s) {
  const double w = 1e-4;
  return -4.5 * s + 3.5 * (std::sqrt(s * s + w * w) - w) + 0.05 * s * s;
}

double quadratic(double s) { return 0.3 * s * s - 2.0 * s; }

}  // namespace

TEST_CASE("theta vanishes at s = 0") {
  for (int n : {1, 4, 9}) {
    for (double delta : {2.4, 3.4, 4.4}) {
      CHECK(std::abs(scgf_at(at(n, delta), 0.0)) < 1e-9);
    }
  }
}

TEST_CASE("single atom theta matches the tilted optical Bloch generator") {
  ModelParams p = at(1, 0.8);
  p.interaction = 0.0;
  for (double s : {-1.0, -0.3, 0.2, 1.0}) {
    const Eigen::VectorXcd oracle = eigenvalues(optical_bloch_oracle(p.rabi, 0.8, 1.0, s));
    CHECK(scgf_at(p, s) == doctest::Approx(oracle.real().maxCoeff()).epsilon(1e-10));
  }
}

TEST_CASE("mean emission rate equals gamma N n_e of the stationary state") {
  for (int n : {2, 6, 12}) {
    for (double delta : {2.4, 3.4, 4.4}) {
      CAPTURE(n);
      CAPTURE(delta);
      const ModelParams p = at(n, delta);
      const double expected = n * excitation_density(full_spectrum(p).rho_ss);
      CHECK(mean_emission_rate(p) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("scgf curve is convex and grid-ordered") {
  const SCGFCurve c = scgf(at(6, 3.4), uniform_grid(-1.0, 1.0, 41));
  CHECK(c.s.size() == 41);
  CHECK(c.min_second_difference() > -kConvexityTol);
  for (bool f : c.failed) CHECK_FALSE(f);
  CHECK_THROWS_AS(scgf(at(6, 3.4), {0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(scgf(at(70, 3.4), {0.0}), std::length_error);
}

TEST_CASE("default grid") {
  const std::vector<double> g = default_s_grid();
  REQUIRE(g.size() == 201);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == 1.0);
  CHECK(g[100] == doctest::Approx(0.0));
}

TEST_CASE("legendre transform of a quadratic is the analytic pair") {
  const RateFunction rf = legendre(synthetic(default_s_grid(), quadratic));
  REQUIRE(rf.k.size() == 199);
  for (std::size_t i = 0; i < rf.k.size(); ++i) {
    const double expected = (rf.k[i] - 2.0) * (rf.k[i] - 2.0) / (4.0 * 0.3);
    CHECK(rf.phi[i] == doctest::Approx(expected).epsilon(1e-6).scale(1.0));
    if (i > 0) CHECK(rf.k[i] > rf.k[i - 1]);
  }
  const BimodalityReport rep = bimodality_report(rf);
  CHECK(rep.n_maxima == 1);
  CHECK(rep.maxima[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("legendre rejects non-convex or short curves and skips failed points") {
  CHECK_THROWS_AS(legendre(synthetic(uniform_grid(-1, 1, 21), [](double s) { return -s * s; })),
                  LegendreError);
  CHECK_THROWS_AS(legendre(synthetic({0.0, 0.1}, quadratic)), LegendreError);
  SCGFCurve c = synthetic(uniform_grid(-1, 1, 21), quadratic);
  c.failed[7] = true;
  c.theta[7] = std::nan("");
  const RateFunction rf = legendre(c);
  CHECK(rf.k.size() == 18);
  for (std::size_t i = 0; i < rf.k.size(); ++i) {
    CHECK(rf.phi[i] == doctest::Approx((rf.k[i] - 2.0) * (rf.k[i] - 2.0) / 1.2).scale(1.0));
  }
}

TEST_CASE("kinked scgf gives two maxima at the branch rates") {
  const SCGFCurve c = synthetic(default_s_grid(), kinked);
  const RateFunction rf = legendre(c);
  const BimodalityReport rep = bimodality_report(rf);
  REQUIRE(rep.n_maxima == 2);
  CHECK(rep.maxima[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(rep.maxima[1] == doctest::Approx(8.0).epsilon(0.01));
  REQUIRE(rep.kink_s.size() == 1);
  CHECK(std::abs(rep.kink_s[0]) < 0.01);
  CHECK(rep.kink_span > 6.5);
  // Both maxima sit close to phi = 0 because the kink is at s ~ 0.
  for (std::size_t i = 0; i < rf.k.size(); ++i) {
    if (rf.k[i] == rep.maxima[0] || rf.k[i] == rep.maxima[1]) CHECK(rf.phi[i] < 1e-3);
  }
}

TEST_CASE("kink far from the typical rate is not a second mode") {
  // Same shape shifted to s = 0.5: the low-rate branch sits high up in phi.
  const SCGFCurve c = synthetic(default_s_grid(), [](double s) {
    const double shifted = kinked(s - 0.5) - kinked(-0.5);
    return shifted;
  });
  const BimodalityReport rep = bimodality_report(legendre(c));
  CHECK(rep.kink_s.size() == 1);
  CHECK(rep.n_maxima == 1);
  CHECK(rep.maxima[0] == doctest::Approx(8.0).epsilon(0.01));
}

TEST_CASE("refinement adds points only around spikes") {
  // Refinement calls the real eigensolver; use a system small enough to be quick.
  const ModelParams p = at(8, 3.4);
  const std::vector<double> grid = uniform_grid(-1.0, 1.0, 41);
  const SCGFCurve plain = scgf(p, grid);
  const SCGFCurve fine = scgf_refined(p, grid);
  CHECK(fine.s.size() > plain.s.size());
  CHECK(fine.s.size() < 2 * plain.s.size());
  for (std::size_t i = 1; i < fine.s.size(); ++i) CHECK(fine.s[i] > fine.s[i - 1]);
  // Every original point survives with the same value.
  std::size_t j = 0;
  for (std::size_t i = 0; i < fine.s.size() && j < grid.size(); ++i) {
    if (fine.s[i] == grid[j]) {
      CHECK(fine.theta[i] == plain.theta[j]);
      ++j;
    }
  }
  CHECK(j == grid.size());
  CHECK_THROWS_AS(scgf_refined(p, grid, RefineOptions{1, 1, 10.0}), std::invalid_argument);
}

TEST_CASE("legendre involution on the grid") {
  for (double delta : {2.4, 3.4}) {
    const SCGFCurve c = scgf_refined(at(8, delta), uniform_grid(-1.0, 1.0, 81));
    const RateFunction rf = legendre(c);
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < c.s.size(); ++i) {
      worst = std::max(worst, std::abs(theta_from_rate(rf, c.s[i]) - c.theta[i]));
    }
    CAPTURE(delta);
    CHECK(worst < 1e-4);
    CHECK(rf.phi.size() == rf.k.size());
    for (double phi : rf.phi) CHECK(phi > -1e-9);
  }
}

TEST_CASE("rate function narrows in k/N as N grows") {
  // Width of {phi(k) <= 0.05} in per-atom units.
  auto width = [](int n) {
    const RateFunction rf = legendre(scgf(at(n, 2.4), uniform_grid(-0.3, 0.3, 61)));
    const std::vector<double> x = rf.k_per_atom();
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (rf.phi[i] <= 0.05) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
      }
    }
    return hi - lo;
  };
  const double w4 = width(4), w8 = width(8), w12 = width(12);
  CHECK(w8 < w4);
  CHECK(w12 < w8);
}
