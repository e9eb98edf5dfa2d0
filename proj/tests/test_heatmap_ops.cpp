// Heatmap math against independent brute-force oracles: per-pixel Gaussian
// evaluation, direct exponentiation softmax, triple-loop expectations and
// marginalizations, and double-loop divergences.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "margiheat/heatmap.hpp"
#include "margiheat/losses.hpp"
#include "margiheat/rng.hpp"
#include "test_util.hpp"

using namespace margiheat;
using testutil::max_abs_diff;

namespace {

// -------- oracles (kept independent of the library code paths) --------

std::vector<double> oracle_gaussian(double cx, double cy, double sigma,
                                    int rows, int cols) {
  std::vector<double> g(static_cast<size_t>(rows) * cols);
  double total = 0.0;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) {
      const double dx = i - cx, dy = j - cy;
      g[j * cols + i] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total += g[j * cols + i];
    }
  for (auto& x : g) x /= total;
  return g;
}

std::vector<double> oracle_softmax(const std::vector<double>& raw) {
  std::vector<double> out(raw.size());
  double total = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::exp(raw[i]);
    total += out[i];
  }
  for (auto& x : out) x /= total;
  return out;
}

double oracle_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) acc += p[i] * std::log(p[i] / std::max(q[i], 1e-12));
  return acc;
}

VolumetricHeatmap random_volume(Rng& rng, int d, int h, int w) {
  VolumetricHeatmap vol(d, h, w);
  double total = 0.0;
  for (auto& x : vol.v) {
    x = rng.uniform(1e-4, 1.0);
    total += x;
  }
  for (auto& x : vol.v) x /= total;
  return vol;
}

Heatmap2D random_pmf_hm(Rng& rng, int rows, int cols, Plane plane = Plane::XY) {
  Heatmap2D hm(rows, cols, plane);
  double total = 0.0;
  for (auto& x : hm.v) {
    x = rng.uniform(1e-4, 1.0);
    total += x;
  }
  for (auto& x : hm.v) x /= total;
  return hm;
}

}  // namespace

TEST_CASE("render_gaussian_2d basics") {
  SUBCASE("centered 3x3 is symmetric with peak at center, sum 1") {
    auto hm = render_gaussian_2d(1.0, 1.0, 1.0, 3, 3);
    double s = 0.0;
    for (double x : hm.v) s += x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hm.at(1, 1) > hm.at(0, 0));
    CHECK(hm.at(0, 0) == doctest::Approx(hm.at(2, 2)).epsilon(1e-12));
    CHECK(hm.at(0, 1) == doctest::Approx(hm.at(2, 1)).epsilon(1e-12));
    CHECK(hm.at(1, 0) == doctest::Approx(hm.at(1, 2)).epsilon(1e-12));
  }
  SUBCASE("single cell takes all mass") {
    auto hm = render_gaussian_2d(0.0, 0.0, 1.0, 1, 1);
    CHECK(hm.at(0, 0) == 1.0);
  }
  SUBCASE("sub-pixel center matches per-pixel oracle") {
    auto hm = render_gaussian_2d(7.25, 3.5, 1.0, 16, 16);
    auto ref = oracle_gaussian(7.25, 3.5, 1.0, 16, 16);
    CHECK(max_abs_diff(hm.v, ref) < 1e-12);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(render_gaussian_2d(1, 1, 0.0, 4, 4), InvalidParameter);
    CHECK_THROWS_AS(render_gaussian_2d(1, 1, -1.0, 4, 4), InvalidParameter);
    CHECK_THROWS_AS(render_gaussian_2d(1e9, 1e9, 1.0, 4, 4), DegenerateError);
  }
  SUBCASE("translation equivariance away from borders") {
    // Both placements keep >= 6 sigma of clearance; the truncated tail mass
    // scales like exp(-d^2/2), so 4 sigma of clearance only reaches ~5e-8.
    const double sigma = 1.0;
    auto a = render_gaussian_2d(6.3, 7.1, sigma, 16, 16);
    auto b = render_gaussian_2d(8.3, 8.1, sigma, 16, 16);
    double worst = 0.0;
    for (int j = 0; j < 15; ++j)
      for (int i = 0; i < 14; ++i)
        worst = std::max(worst, std::abs(a.at(j, i) - b.at(j + 1, i + 2)));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("normalize_to_pmf is a spatial softmax") {
  SUBCASE("constant grid becomes uniform") {
    Heatmap2D raw(4, 4, Plane::XY, true);
    auto out = normalize_to_pmf(raw);
    for (double x : out.v) CHECK(x == doctest::Approx(1.0 / 16).epsilon(1e-12));
  }
  SUBCASE("large single entry saturates") {
    Heatmap2D raw(4, 4, Plane::XY, true);
    raw.at(2, 1) = 1000.0;
    auto out = normalize_to_pmf(raw);
    CHECK(out.at(2, 1) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("matches direct exponentiation and is shift invariant") {
    Rng rng(11);
    Heatmap2D raw(8, 8, Plane::XY, true);
    for (auto& x : raw.v) x = rng.uniform(-3.0, 3.0);
    auto out = normalize_to_pmf(raw);

    auto ref = oracle_softmax(raw.v);
    CHECK(max_abs_diff(out.v, ref) < 1e-12);

    double s = 0.0;
    for (double x : out.v) s += x;
    CHECK(std::abs(s - 1.0) < 1e-12);

    Heatmap2D shifted = raw;
    for (auto& x : shifted.v) x += 17.5;
    auto out2 = normalize_to_pmf(shifted);
    CHECK(max_abs_diff(out.v, out2.v) < 1e-12);
  }
  SUBCASE("rejects non-finite input") {
    Heatmap2D raw(2, 2, Plane::XY, true);
    raw.at(0, 1) = std::nan("");
    CHECK_THROWS_AS(normalize_to_pmf(raw), InvalidInput);
  }
}

TEST_CASE("soft_argmax_2d expectations") {
  SUBCASE("point mass") {
    Heatmap2D hm(8, 8, Plane::XY);
    hm.at(2, 5) = 1.0;
    auto mu = soft_argmax_2d(hm);
    CHECK(mu[0] == doctest::Approx(5.0));
    CHECK(mu[1] == doctest::Approx(2.0));
  }
  SUBCASE("uniform grid gives the index mean") {
    Heatmap2D hm(8, 8, Plane::XY);
    for (auto& x : hm.v) x = 1.0 / 64;
    auto mu = soft_argmax_2d(hm);
    CHECK(mu[0] == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(mu[1] == doctest::Approx(3.5).epsilon(1e-12));
  }
  SUBCASE("two equal masses average") {
    Heatmap2D hm(8, 8, Plane::XY);
    hm.at(0, 1) = 0.5;
    hm.at(0, 3) = 0.5;
    auto mu = soft_argmax_2d(hm);
    CHECK(mu[0] == doctest::Approx(2.0));
    CHECK(mu[1] == doctest::Approx(0.0));
  }
  SUBCASE("raw grids are rejected") {
    Heatmap2D hm(4, 4, Plane::XY, true);
    hm.at(0, 0) = 1.0;
    CHECK_THROWS_AS(soft_argmax_2d(hm), ContractViolation);
  }
  SUBCASE("expectation stays inside the index range") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
      auto hm = random_pmf_hm(rng, 6, 9);
      auto mu = soft_argmax_2d(hm);
      CHECK(mu[0] >= 0.0);
      CHECK(mu[0] <= 8.0);
      CHECK(mu[1] >= 0.0);
      CHECK(mu[1] <= 5.0);
    }
  }
}

TEST_CASE("soft_argmax_3d_volumetric") {
  SUBCASE("point mass at (z=1, y=2, x=3)") {
    VolumetricHeatmap vol(4, 4, 4);
    vol.at(1, 2, 3) = 1.0;
    auto mu = soft_argmax_3d_volumetric(vol);
    CHECK(mu.mu_x == doctest::Approx(3.0));
    CHECK(mu.mu_y == doctest::Approx(2.0));
    CHECK(mu.mu_z == doctest::Approx(1.0));
  }
  SUBCASE("uniform cube") {
    VolumetricHeatmap vol(4, 4, 4);
    for (auto& x : vol.v) x = 1.0 / 64;
    auto mu = soft_argmax_3d_volumetric(vol);
    CHECK(mu.mu_x == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(mu.mu_y == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(mu.mu_z == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("random volume matches triple-loop oracle") {
    Rng rng(3);
    auto vol = random_volume(rng, 5, 5, 5);
    double ex = 0, ey = 0, ez = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) {
          ex += vol.at(i, j, k) * k;
          ey += vol.at(i, j, k) * j;
          ez += vol.at(i, j, k) * i;
        }
    auto mu = soft_argmax_3d_volumetric(vol);
    CHECK(std::abs(mu.mu_x - ex) < 1e-12);
    CHECK(std::abs(mu.mu_y - ey) < 1e-12);
    CHECK(std::abs(mu.mu_z - ez) < 1e-12);
  }
}

TEST_CASE("marginalize_volume") {
  SUBCASE("point mass lands at the right spot in each plane") {
    VolumetricHeatmap vol(4, 4, 4);
    vol.at(1, 2, 3) = 1.0;
    auto set = marginalize_volume(vol);
    CHECK(set.xy.at(2, 3) == doctest::Approx(1.0));  // (row=y, col=x)
    CHECK(set.zy.at(2, 1) == doctest::Approx(1.0));  // (row=y, col=z)
    CHECK(set.xz.at(1, 3) == doctest::Approx(1.0));  // (row=z, col=x)
  }
  SUBCASE("uniform volume gives uniform marginals") {
    VolumetricHeatmap vol(3, 4, 5);
    for (auto& x : vol.v) x = 1.0 / 60;
    auto set = marginalize_volume(vol);
    for (double x : set.xy.v) CHECK(x == doctest::Approx(1.0 / 20).epsilon(1e-12));
    for (double x : set.zy.v) CHECK(x == doctest::Approx(1.0 / 12).epsilon(1e-12));
    for (double x : set.xz.v) CHECK(x == doctest::Approx(1.0 / 15).epsilon(1e-12));
  }
  SUBCASE("random 4x5x6 volume matches summation oracle, outputs are PMFs") {
    Rng rng(77);
    auto vol = random_volume(rng, 4, 5, 6);
    auto set = marginalize_volume(vol);
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 6; ++k) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += vol.at(i, j, k);
        CHECK(std::abs(set.xy.at(j, k) - s) < 1e-12);
      }
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int k = 0; k < 6; ++k) s += vol.at(i, j, k);
        CHECK(std::abs(set.zy.at(j, i) - s) < 1e-12);
      }
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 6; ++k) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += vol.at(i, j, k);
        CHECK(std::abs(set.xz.at(i, k) - s) < 1e-12);
      }
    CHECK(is_pmf(set.xy, 1e-9));
    CHECK(is_pmf(set.zy, 1e-9));
    CHECK(is_pmf(set.xz, 1e-9));
  }
}

TEST_CASE("marginal_coords") {
  SUBCASE("agrees with the volumetric estimate for a point mass") {
    VolumetricHeatmap vol(4, 4, 4);
    vol.at(1, 2, 3) = 1.0;
    auto mu = marginal_coords(marginalize_volume(vol));
    CHECK(mu.mu_x == doctest::Approx(3.0));
    CHECK(mu.mu_y == doctest::Approx(2.0));
    CHECK(mu.mu_z == doctest::Approx(1.0));
  }
  SUBCASE("z is the average of the two z expectations") {
    MarginalHeatmapSet set;
    set.xy = Heatmap2D(8, 8, Plane::XY);
    set.xy.at(2, 3) = 1.0;
    set.zy = Heatmap2D(8, 8, Plane::ZY);
    set.zy.at(0, 4) = 1.0;  // E[z] from zy = 4
    set.xz = Heatmap2D(8, 8, Plane::XZ);
    set.xz.at(6, 0) = 1.0;  // E[z] from xz = 6
    auto mu = marginal_coords(set);
    CHECK(mu.mu_z == doctest::Approx(5.0));
    CHECK(mu.mu_x == doctest::Approx(3.0));
    CHECK(mu.mu_y == doctest::Approx(2.0));
  }
  SUBCASE("marginal path equals volumetric soft-argmax on random volumes") {
    Rng rng(123);
    for (int t = 0; t < 100; ++t) {
      const int d = 2 + static_cast<int>(rng.uniform_int(7));
      const int h = 2 + static_cast<int>(rng.uniform_int(5));
      const int w = 2 + static_cast<int>(rng.uniform_int(4));
      auto vol = random_volume(rng, d, h, w);
      auto direct = soft_argmax_3d_volumetric(vol);
      auto via_marginals = marginal_coords(marginalize_volume(vol));
      CHECK(std::abs(direct.mu_x - via_marginals.mu_x) < 1e-10);
      CHECK(std::abs(direct.mu_y - via_marginals.mu_y) < 1e-10);
      CHECK(std::abs(direct.mu_z - via_marginals.mu_z) < 1e-10);
    }
  }
  SUBCASE("both routes to each coordinate agree for shared-source marginals") {
    Rng rng(9);
    auto vol = random_volume(rng, 6, 5, 7);
    auto set = marginalize_volume(vol);
    const auto xy = soft_argmax_2d(set.xy);
    const auto zy = soft_argmax_2d(set.zy);
    const auto xz = soft_argmax_2d(set.xz);
    CHECK(std::abs(xy[0] - xz[0]) < 1e-10);  // E[x] two ways
    CHECK(std::abs(xy[1] - zy[1]) < 1e-10);  // E[y] two ways
    CHECK(std::abs(zy[0] - xz[1]) < 1e-10);  // E[z] two ways
  }
  SUBCASE("dimension mismatch raises") {
    MarginalHeatmapSet set;
    set.xy = Heatmap2D(8, 8, Plane::XY);
    set.xy.at(0, 0) = 1.0;
    set.zy = Heatmap2D(7, 8, Plane::ZY);
    set.zy.at(0, 0) = 1.0;
    set.xz = Heatmap2D(8, 8, Plane::XZ);
    set.xz.at(0, 0) = 1.0;
    CHECK_THROWS_AS(marginal_coords(set), ShapeError);
  }
}

TEST_CASE("kl divergence") {
  Rng rng(42);
  SUBCASE("KL(p||p) is zero") {
    auto p = random_pmf_hm(rng, 8, 8);
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("closed form for a delta against uniform") {
    Heatmap2D p(1, 2, Plane::XY), q(1, 2, Plane::XY);
    p.at(0, 0) = 1.0;
    q.at(0, 0) = 0.5;
    q.at(0, 1) = 0.5;
    CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("random pair matches double-loop oracle") {
    auto p = random_pmf_hm(rng, 8, 8);
    auto q = random_pmf_hm(rng, 8, 8);
    CHECK(std::abs(kl_divergence(p, q) - oracle_kl(p.v, q.v)) < 1e-12);
  }
  SUBCASE("shape mismatch raises") {
    auto p = random_pmf_hm(rng, 4, 4);
    auto q = random_pmf_hm(rng, 4, 5);
    CHECK_THROWS_AS(kl_divergence(p, q), ShapeError);
  }
}

TEST_CASE("jensen-shannon divergence") {
  Rng rng(43);
  SUBCASE("jsd(p, p) is zero") {
    auto p = random_pmf_hm(rng, 8, 8);
    CHECK(jsd(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("disjoint deltas reach ln 2") {
    Heatmap2D p(2, 2, Plane::XY), q(2, 2, Plane::XY);
    p.at(0, 0) = 1.0;
    q.at(1, 1) = 1.0;
    CHECK(jsd(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("symmetry and bounds over random pairs") {
    for (int t = 0; t < 100; ++t) {
      auto p = random_pmf_hm(rng, 6, 7);
      auto q = random_pmf_hm(rng, 6, 7);
      const double fwd = jsd(p, q), bwd = jsd(q, p);
      CHECK(std::abs(fwd - bwd) < 1e-12);
      CHECK(fwd >= 0.0);
      CHECK(fwd <= std::log(2.0) + 1e-12);
    }
  }
  SUBCASE("matches a composition of KL halves") {
    auto p = random_pmf_hm(rng, 8, 8);
    auto q = random_pmf_hm(rng, 8, 8);
    Heatmap2D m(8, 8, Plane::XY);
    for (size_t i = 0; i < m.size(); ++i) m.v[i] = 0.5 * (p.v[i] + q.v[i]);
    const double ref = 0.5 * oracle_kl(p.v, m.v) + 0.5 * oracle_kl(q.v, m.v);
    CHECK(std::abs(jsd(p, q) - ref) < 1e-12);
  }
}

TEST_CASE("heatmap mse baseline") {
  SUBCASE("identical grids") {
    Heatmap2D a(3, 3, Plane::XY);
    a.at(1, 1) = 1.0;
    CHECK(loss_heatmap_mse(a, a) == 0.0);
  }
  SUBCASE("swapped deltas") {
    Heatmap2D a(1, 2, Plane::XY), b(1, 2, Plane::XY);
    a.at(0, 0) = 1.0;
    b.at(0, 1) = 1.0;
    CHECK(loss_heatmap_mse(a, b) == doctest::Approx(2.0));
  }
  SUBCASE("random pair matches loop oracle") {
    Rng rng(17);
    auto a = random_pmf_hm(rng, 8, 8);
    auto b = random_pmf_hm(rng, 8, 8);
    double ref = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const double d = a.v[i] - b.v[i];
      ref += d * d;
    }
    CHECK(std::abs(loss_heatmap_mse(a, b) - ref) < 1e-12);
  }
}

TEST_CASE("coordinate l2 loss") {
  CHECK(loss_coords_l2({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(loss_coords_l2({0, 0, 0}, {3, 4, 0}) == doctest::Approx(5.0));
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    JointCoords3D a{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    JointCoords3D b{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double ref = std::sqrt((a.mu_x - b.mu_x) * (a.mu_x - b.mu_x) +
                                 (a.mu_y - b.mu_y) * (a.mu_y - b.mu_y) +
                                 (a.mu_z - b.mu_z) * (a.mu_z - b.mu_z));
    CHECK(std::abs(loss_coords_l2(a, b) - ref) < 1e-12);
  }
}

TEST_CASE("hybrid 3d loss") {
  const double sigma = 1.0;
  const JointCoords3D gt{5.0, 7.0, 9.0};

  MarginalHeatmapSet perfect;
  perfect.xy = render_gaussian_2d(gt.mu_x, gt.mu_y, sigma, 16, 16, Plane::XY);
  perfect.zy = render_gaussian_2d(gt.mu_z, gt.mu_y, sigma, 16, 16, Plane::ZY);
  perfect.xz = render_gaussian_2d(gt.mu_x, gt.mu_z, sigma, 16, 16, Plane::XZ);

  SUBCASE("perfect prediction scores zero") {
    CHECK(loss_3d(perfect, gt, gt, sigma) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("only the coordinate term reacts to a mu offset") {
    JointCoords3D mu{gt.mu_x + 3.0, gt.mu_y + 4.0, gt.mu_z};
    CHECK(loss_3d(perfect, mu, gt, sigma) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("matches the term-by-term composition on random predictions") {
    Rng rng(31);
    MarginalHeatmapSet pred;
    pred.xy = random_pmf_hm(rng, 16, 16, Plane::XY);
    pred.zy = random_pmf_hm(rng, 16, 16, Plane::ZY);
    pred.xz = random_pmf_hm(rng, 16, 16, Plane::XZ);
    const auto mu = marginal_coords(pred);
    const double composed =
        loss_coords_l2(mu, gt) +
        jsd(pred.xy, render_gaussian_2d(gt.mu_x, gt.mu_y, sigma, 16, 16)) +
        jsd(pred.zy, render_gaussian_2d(gt.mu_z, gt.mu_y, sigma, 16, 16)) +
        jsd(pred.xz, render_gaussian_2d(gt.mu_x, gt.mu_z, sigma, 16, 16));
    CHECK(std::abs(loss_3d(pred, mu, gt, sigma) - composed) < 1e-12);
    CHECK(loss_3d(pred, mu, gt, sigma) >= 0.0);
  }
  SUBCASE("off-grid ground truth truncates rather than throws") {
    const JointCoords3D outside{-2.0, 3.0, 20.0};
    const auto mu = marginal_coords(perfect);
    CHECK(loss_3d(perfect, mu, outside, sigma) >= 0.0);
  }
}

TEST_CASE("xy-only 2d loss") {
  const double sigma = 1.0;
  auto target = render_gaussian_2d(4.0, 6.0, sigma, 16, 16);
  SUBCASE("perfect prediction scores zero") {
    CHECK(loss_2d(target, 4.0, 6.0, 4.0, 6.0, sigma) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("mu displacement contributes its norm") {
    CHECK(loss_2d(target, 4.0, 8.0, 4.0, 6.0, sigma) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("compositional oracle on random prediction") {
    Rng rng(37);
    auto pred = random_pmf_hm(rng, 16, 16);
    const auto mu = soft_argmax_2d(pred);
    const double dx = mu[0] - 4.0, dy = mu[1] - 6.0;
    const double ref = std::sqrt(dx * dx + dy * dy) + jsd(pred, target);
    CHECK(std::abs(loss_2d(pred, mu[0], mu[1], 4.0, 6.0, sigma) - ref) < 1e-12);
  }
}

TEST_CASE("pmf closure across producing ops") {
  Rng rng(53);
  auto check_closure = [](const Heatmap2D& hm) {
    double s = 0.0;
    for (double x : hm.v) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  };
  check_closure(render_gaussian_2d(3.3, 9.9, 0.75, 16, 16));
  Heatmap2D raw(16, 16, Plane::XY, true);
  for (auto& x : raw.v) x = rng.uniform(-4, 4);
  check_closure(normalize_to_pmf(raw));
  auto set = marginalize_volume(random_volume(rng, 6, 6, 6));
  check_closure(set.xy);
  check_closure(set.zy);
  check_closure(set.xz);
}
