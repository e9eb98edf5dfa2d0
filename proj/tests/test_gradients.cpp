// Analytic-gradient verification: the finite-difference suite plus the
// closed-form gradient identities.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "margiheat/gradcheck.hpp"
#include "margiheat/heatmap.hpp"
#include "margiheat/losses.hpp"
#include "margiheat/rng.hpp"

using namespace margiheat;

TEST_CASE("soft-argmax gradient w.r.t. a PMF is the coordinate grid") {
  // mu_x is linear in the heatmap: d mu_x / d hm(j,i) == i
  const int rows = 5, cols = 7;
  std::vector<double> d_hm(static_cast<size_t>(rows) * cols, 0.0);
  soft_argmax_2d_backward(rows, cols, 1.0, 0.0, d_hm.data());
  const auto grid = CoordGrid::columns(rows, cols);
  for (size_t i = 0; i < d_hm.size(); ++i) CHECK(d_hm[i] == grid.v[i]);

  std::fill(d_hm.begin(), d_hm.end(), 0.0);
  soft_argmax_2d_backward(rows, cols, 0.0, 1.0, d_hm.data());
  const auto rgrid = CoordGrid::row_index(rows, cols);
  for (size_t i = 0; i < d_hm.size(); ++i) CHECK(d_hm[i] == rgrid.v[i]);
}

TEST_CASE("jsd gradient vanishes at p == q") {
  Rng rng(7);
  Heatmap2D raw(6, 6, Plane::XY, true);
  for (auto& x : raw.v) x = rng.uniform(-2, 2);
  const auto p = normalize_to_pmf(raw);
  std::vector<double> d_p(p.size(), 0.0);
  jsd_backward(p, p, 1.0, d_p.data(), nullptr);
  for (double g : d_p) CHECK(std::abs(g) < 1e-14);
}

TEST_CASE("coordinate l2 gradient is the unit direction") {
  const JointCoords3D mu{3.0, 4.0, 0.0}, gt{0.0, 0.0, 0.0};
  const auto g = loss_coords_l2_backward(mu, gt, 1.0);
  CHECK(g.mu_x == doctest::Approx(0.6));
  CHECK(g.mu_y == doctest::Approx(0.8));
  CHECK(g.mu_z == doctest::Approx(0.0));
  // subgradient 0 at the minimum
  const auto gz = loss_coords_l2_backward(gt, gt, 1.0);
  CHECK(gz.mu_x == 0.0);
  CHECK(gz.mu_y == 0.0);
  CHECK(gz.mu_z == 0.0);
}

TEST_CASE("finite-difference suite passes at spec tolerances over 20 seeds") {
  const auto report = gradcheck::run_suite(2718, 20);
  for (const auto& op : report.ops) {
    CAPTURE(op.op);
    CAPTURE(op.worst_rel_err);
    CHECK(op.pass);
  }
  CHECK(report.all_pass);
}

TEST_CASE("suite results are deterministic for a fixed seed") {
  const auto a = gradcheck::run_suite(31337, 2);
  const auto b = gradcheck::run_suite(31337, 2);
  REQUIRE(a.ops.size() == b.ops.size());
  for (size_t i = 0; i < a.ops.size(); ++i)
    CHECK(a.ops[i].worst_rel_err == b.ops[i].worst_rel_err);
}
