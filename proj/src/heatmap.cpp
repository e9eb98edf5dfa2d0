#include "margiheat/heatmap.hpp"

#include <cmath>
#include <cstring>

#include "margiheat/kernels.hpp"

namespace margiheat {

namespace {
constexpr double kLogClamp = 1e-12;

void check_finite(const double* v, size_t n, const char* where) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(v[i]))
      throw InvalidInput(std::string(where) + ": non-finite entry");
}
}  // namespace

const char* plane_name(Plane p) {
  switch (p) {
    case Plane::XY: return "xy";
    case Plane::ZY: return "zy";
    case Plane::XZ: return "xz";
  }
  return "?";
}

double sigma_for_heatmap(int hm_size) {
  return std::max(0.75, static_cast<double>(hm_size) / 32.0);
}

CoordGrid CoordGrid::columns(int rows, int cols) {
  CoordGrid g{Axis::X, rows, cols, {}};
  g.v.resize(static_cast<size_t>(rows) * cols);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i)
      g.v[static_cast<size_t>(j) * cols + i] = static_cast<double>(i);
  return g;
}

CoordGrid CoordGrid::row_index(int rows, int cols) {
  CoordGrid g{Axis::Y, rows, cols, {}};
  g.v.resize(static_cast<size_t>(rows) * cols);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i)
      g.v[static_cast<size_t>(j) * cols + i] = static_cast<double>(j);
  return g;
}

bool is_pmf(const Heatmap2D& hm, double tol) {
  if (hm.raw) return false;
  double s = 0.0;
  for (double x : hm.v) {
    if (!(x >= 0.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

void require_pmf(const Heatmap2D& hm, const char* where) {
  if (hm.raw)
    throw ContractViolation(std::string(where) +
                            ": raw (unnormalized) heatmap rejected");
  if (!is_pmf(hm))
    throw ContractViolation(std::string(where) + ": grid is not a valid PMF");
}

void require_pmf(const VolumetricHeatmap& vol, const char* where) {
  double s = 0.0;
  for (double x : vol.v) {
    if (!(x >= 0.0))
      throw ContractViolation(std::string(where) + ": negative entry");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-6)
    throw ContractViolation(std::string(where) + ": volume does not sum to 1");
}

Heatmap2D render_gaussian_2d(double cx, double cy, double sigma, int rows,
                             int cols, Plane plane) {
  if (sigma <= 0.0) throw InvalidParameter("render_gaussian_2d: sigma <= 0");
  if (rows < 1 || cols < 1)
    throw InvalidParameter("render_gaussian_2d: empty grid");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw InvalidInput("render_gaussian_2d: non-finite center");

  Heatmap2D hm(rows, cols, plane);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  double total = 0.0;
  for (int j = 0; j < rows; ++j) {
    const double dy = static_cast<double>(j) - cy;
    for (int i = 0; i < cols; ++i) {
      const double dx = static_cast<double>(i) - cx;
      const double val = std::exp(-(dx * dx + dy * dy) * inv2s2);
      hm.at(j, i) = val;
      total += val;
    }
  }
  if (total <= 0.0 || !std::isfinite(total))
    throw DegenerateError("render_gaussian_2d: no mass on grid (center too far)");
  kernels::active().scale(1.0 / total, hm.v.data(), hm.size());
  return hm;
}

GaussianTarget make_gaussian_target(double cx, double cy, double sigma,
                                    int rows, int cols, Plane plane) {
  GaussianTarget t;
  t.cx = cx;
  t.cy = cy;
  t.sigma = sigma;
  t.rendered = render_gaussian_2d(cx, cy, sigma, rows, cols, plane);
  return t;
}

void softmax_inplace(double* grid, size_t n) {
  const auto& ops = kernels::active();
  const double m = ops.max(grid, n);
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    grid[i] = std::exp(grid[i] - m);
    s += grid[i];
  }
  ops.scale(1.0 / s, grid, n);
}

Heatmap2D normalize_to_pmf(int rows, int cols, const double* raw, Plane plane) {
  check_finite(raw, static_cast<size_t>(rows) * cols, "normalize_to_pmf");
  Heatmap2D out(rows, cols, plane);
  std::memcpy(out.v.data(), raw, sizeof(double) * out.size());
  softmax_inplace(out.v.data(), out.size());
  return out;
}

Heatmap2D normalize_to_pmf(const Heatmap2D& raw) {
  return normalize_to_pmf(raw.rows, raw.cols, raw.v.data(), raw.plane);
}

void softmax_backward(const double* pmf, const double* upstream, double* d_raw,
                      size_t n) {
  const double inner = kernels::active().dot(upstream, pmf, n);
  for (size_t i = 0; i < n; ++i) d_raw[i] = pmf[i] * (upstream[i] - inner);
}

std::array<double, 2> soft_argmax_2d(const Heatmap2D& hm) {
  require_pmf(hm, "soft_argmax_2d");
  double ex = 0.0, ey = 0.0;
  for (int j = 0; j < hm.rows; ++j) {
    const double* row = hm.v.data() + static_cast<size_t>(j) * hm.cols;
    double rowsum = 0.0, rowdot = 0.0;
    for (int i = 0; i < hm.cols; ++i) {
      rowsum += row[i];
      rowdot += row[i] * static_cast<double>(i);
    }
    ex += rowdot;
    ey += rowsum * static_cast<double>(j);
  }
  return {ex, ey};
}

void soft_argmax_2d_backward(int rows, int cols, double d_mu_x, double d_mu_y,
                             double* d_hm_accum) {
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i)
      d_hm_accum[static_cast<size_t>(j) * cols + i] +=
          d_mu_x * static_cast<double>(i) + d_mu_y * static_cast<double>(j);
}

JointCoords3D soft_argmax_3d_volumetric(const VolumetricHeatmap& vol) {
  require_pmf(vol, "soft_argmax_3d_volumetric");
  JointCoords3D mu;
  for (int i = 0; i < vol.d; ++i)
    for (int j = 0; j < vol.h; ++j) {
      const double* row = vol.v.data() + (static_cast<size_t>(i) * vol.h + j) * vol.w;
      double rowsum = 0.0, rowdot = 0.0;
      for (int k = 0; k < vol.w; ++k) {
        rowsum += row[k];
        rowdot += row[k] * static_cast<double>(k);
      }
      mu.mu_x += rowdot;
      mu.mu_y += rowsum * static_cast<double>(j);
      mu.mu_z += rowsum * static_cast<double>(i);
    }
  return mu;
}

MarginalHeatmapSet marginalize_volume(const VolumetricHeatmap& vol) {
  require_pmf(vol, "marginalize_volume");
  MarginalHeatmapSet set;
  set.xy = Heatmap2D(vol.h, vol.w, Plane::XY);   // rows=y, cols=x
  set.zy = Heatmap2D(vol.h, vol.d, Plane::ZY);   // rows=y, cols=z
  set.xz = Heatmap2D(vol.d, vol.w, Plane::XZ);   // rows=z, cols=x
  for (int i = 0; i < vol.d; ++i)
    for (int j = 0; j < vol.h; ++j)
      for (int k = 0; k < vol.w; ++k) {
        const double p = vol.at(i, j, k);
        set.xy.at(j, k) += p;  // sum over z
        set.zy.at(j, i) += p;  // sum over x, transposed to (y, z)
        set.xz.at(i, k) += p;  // sum over y
      }
  return set;
}

JointCoords3D marginal_coords(const MarginalHeatmapSet& set) {
  if (set.xy.rows != set.zy.rows || set.xy.cols != set.xz.cols ||
      set.zy.cols != set.xz.rows)
    throw ShapeError("marginal_coords: inconsistent plane dimensions");
  const auto xy = soft_argmax_2d(set.xy);
  const auto zy = soft_argmax_2d(set.zy);
  const auto xz = soft_argmax_2d(set.xz);
  JointCoords3D mu;
  mu.mu_x = xy[0];
  mu.mu_y = xy[1];
  // z sits on the column axis of zy and the row axis of xz
  mu.mu_z = 0.5 * zy[0] + 0.5 * xz[1];
  return mu;
}

void marginal_coords_backward(const MarginalHeatmapSet& set, double d_mu_x,
                              double d_mu_y, double d_mu_z, double* d_xy,
                              double* d_zy, double* d_xz) {
  if (d_xy) soft_argmax_2d_backward(set.xy.rows, set.xy.cols, d_mu_x, d_mu_y, d_xy);
  if (d_zy)
    soft_argmax_2d_backward(set.zy.rows, set.zy.cols, 0.5 * d_mu_z, 0.0, d_zy);
  if (d_xz)
    soft_argmax_2d_backward(set.xz.rows, set.xz.cols, 0.0, 0.5 * d_mu_z, d_xz);
}

namespace {
void require_pair(const Heatmap2D& p, const Heatmap2D& q, const char* where) {
  if (p.rows != q.rows || p.cols != q.cols)
    throw ShapeError(std::string(where) + ": shape mismatch");
  require_pmf(p, where);
  require_pmf(q, where);
}
}  // namespace

double kl_divergence(const Heatmap2D& p, const Heatmap2D& q) {
  require_pair(p, q, "kl_divergence");
  // Terms with p = 0 contribute nothing; both log arguments share the same
  // clamp so KL(p || p) is exactly zero.
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = p.v[i];
    if (pi <= 0.0) continue;
    acc += pi * std::log(std::max(pi, kLogClamp) / std::max(q.v[i], kLogClamp));
  }
  return acc;
}

double jsd(const Heatmap2D& p, const Heatmap2D& q) {
  require_pair(p, q, "jsd");
  // m >= p/2 wherever p > 0, so the ratio is in (0, 2] and needs no clamp;
  // identical inputs give log(1) = 0 per entry, hence an exact zero.
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = p.v[i], qi = q.v[i];
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) acc += 0.5 * pi * std::log(pi / mi);
    if (qi > 0.0) acc += 0.5 * qi * std::log(qi / mi);
  }
  return std::max(acc, 0.0);
}

void jsd_backward(const Heatmap2D& p, const Heatmap2D& q, double upstream,
                  double* d_p, double* d_q) {
  require_pair(p, q, "jsd_backward");
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = std::max(p.v[i], kLogClamp);
    const double qi = std::max(q.v[i], kLogClamp);
    const double mi = 0.5 * (pi + qi);
    if (d_p) d_p[i] += upstream * 0.5 * std::log(pi / mi);
    if (d_q) d_q[i] += upstream * 0.5 * std::log(qi / mi);
  }
}

void kl_divergence_backward(const Heatmap2D& p, const Heatmap2D& q,
                            double upstream, double* d_p, double* d_q) {
  require_pair(p, q, "kl_divergence_backward");
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = std::max(p.v[i], kLogClamp);
    const double qi = std::max(q.v[i], kLogClamp);
    if (d_p) d_p[i] += upstream * (std::log(pi / qi) + 1.0);
    if (d_q) d_q[i] += upstream * (-pi / qi);
  }
}

}  // namespace margiheat
