#pragma once

// Probability-mass heatmap math: Gaussian target rendering, spatial softmax,
// soft-argmax expectations, volumetric marginalization and the divergences
// used by the losses. Everything here is a pure function; gradients are
// exposed as explicit *_backward companions so callers can assemble chains
// without an autodiff framework.

#include <array>
#include <vector>

#include "margiheat/errors.hpp"

namespace margiheat {

enum class Plane { XY, ZY, XZ };

const char* plane_name(Plane p);

// A 2D grid of probability mass. `rows` runs down the vertical axis, `cols`
// along the horizontal axis of the named plane:
//   XY: rows = y, cols = x
//   ZY: rows = y, cols = z
//   XZ: rows = z, cols = x
// A grid with raw=true holds unnormalized values (e.g. network activations
// loaded from a file) and is rejected by expectation / divergence ops.
struct Heatmap2D {
  int rows = 0, cols = 0;
  Plane plane = Plane::XY;
  bool raw = false;
  std::vector<double> v;

  Heatmap2D() = default;
  Heatmap2D(int r, int c, Plane p, bool raw_flag = false)
      : rows(r), cols(c), plane(p), raw(raw_flag) {
    v.assign(static_cast<size_t>(r) * c, 0.0);
  }

  double& at(int j, int i) { return v[static_cast<size_t>(j) * cols + i]; }
  double at(int j, int i) const { return v[static_cast<size_t>(j) * cols + i]; }
  size_t size() const { return v.size(); }
};

// D x H x W probability mass over (z, y, x); index order [i][j][k] = (z, y, x).
struct VolumetricHeatmap {
  int d = 0, h = 0, w = 0;
  std::vector<double> v;

  VolumetricHeatmap() = default;
  VolumetricHeatmap(int d_, int h_, int w_) : d(d_), h(h_), w(w_) {
    v.assign(static_cast<size_t>(d_) * h_ * w_, 0.0);
  }

  double& at(int i, int j, int k) {
    return v[(static_cast<size_t>(i) * h + j) * w + k];
  }
  double at(int i, int j, int k) const {
    return v[(static_cast<size_t>(i) * h + j) * w + k];
  }
};

// The three marginal views of one joint's location distribution.
struct MarginalHeatmapSet {
  Heatmap2D xy, zy, xz;
};

struct JointCoords3D {
  double mu_x = 0.0, mu_y = 0.0, mu_z = 0.0;
};

enum class Axis { X, Y, Z };

// Grid of index values in pixel units: X-grid entry (j,i) == i, Y-grid
// entry (j,i) == j. Dotting a PMF against one of these yields the
// corresponding coordinate expectation.
struct CoordGrid {
  Axis axis;
  int rows = 0, cols = 0;
  std::vector<double> v;

  static CoordGrid columns(int rows, int cols);  // entry = column index
  static CoordGrid row_index(int rows, int cols);  // entry = row index
};

// A rendered Gaussian supervision target.
struct GaussianTarget {
  double cx = 0.0, cy = 0.0;  // pixel units, (col, row)
  double sigma = 1.0;
  Heatmap2D rendered;
};

// Target Gaussian width for a given heatmap edge length. 1 px at 32x32,
// scaled proportionally and floored at 0.75 px.
double sigma_for_heatmap(int hm_size);

// Isotropic Gaussian centred at (cx, cy) in pixel units, truncated at the
// grid border and renormalized to sum exactly 1. Centers may lie off-grid.
// Throws InvalidParameter (sigma <= 0, empty shape) or DegenerateError
// (no representable mass on the grid).
Heatmap2D render_gaussian_2d(double cx, double cy, double sigma, int rows,
                             int cols, Plane plane = Plane::XY);

GaussianTarget make_gaussian_target(double cx, double cy, double sigma,
                                    int rows, int cols,
                                    Plane plane = Plane::XY);

// Spatial softmax over a raw grid. Output is strictly positive and sums to 1.
// Throws InvalidInput on NaN/Inf entries.
Heatmap2D normalize_to_pmf(const Heatmap2D& raw);
Heatmap2D normalize_to_pmf(int rows, int cols, const double* raw,
                           Plane plane = Plane::XY);

// In-place variant on bare buffers, used by the network head.
void softmax_inplace(double* grid, size_t n);

// d(raw) for a softmax output `pmf` given d(pmf): the standard
// softmax-Jacobian product  d_raw = pmf .* (up - <up, pmf>).
void softmax_backward(const double* pmf, const double* upstream, double* d_raw,
                      size_t n);

// Expectation of (column index, row index) under a PMF heatmap.
// Throws ContractViolation if the grid is raw or not a valid PMF.
std::array<double, 2> soft_argmax_2d(const Heatmap2D& hm);

// d(hm) for  a*mu_x + b*mu_y  given upstream (a, b): the coordinate grids.
void soft_argmax_2d_backward(int rows, int cols, double d_mu_x, double d_mu_y,
                             double* d_hm_accum);

JointCoords3D soft_argmax_3d_volumetric(const VolumetricHeatmap& vol);

// The three axis sums of a volumetric PMF; each output is a valid PMF.
MarginalHeatmapSet marginalize_volume(const VolumetricHeatmap& vol);

// Coordinate estimate from a marginal set: x and y from the xy map alone,
// z as the average of the zy and xz expectations.
JointCoords3D marginal_coords(const MarginalHeatmapSet& set);

// Accumulates d(xy)/d(zy)/d(xz) for upstream gradients on (mu_x, mu_y, mu_z).
void marginal_coords_backward(const MarginalHeatmapSet& set, double d_mu_x,
                              double d_mu_y, double d_mu_z, double* d_xy,
                              double* d_zy, double* d_xz);

// KL(p || q) in nats with 0*log(0/q) = 0 and q clamped at 1e-12 inside logs.
double kl_divergence(const Heatmap2D& p, const Heatmap2D& q);

// Jensen-Shannon divergence in nats; symmetric, bounded by ln 2.
double jsd(const Heatmap2D& p, const Heatmap2D& q);

// dJSD/dp = 0.5*ln(p/m) elementwise (m the mixture); same form for q.
// Accumulates into the provided buffers (either may be null).
void jsd_backward(const Heatmap2D& p, const Heatmap2D& q, double upstream,
                  double* d_p, double* d_q);

void kl_divergence_backward(const Heatmap2D& p, const Heatmap2D& q,
                            double upstream, double* d_p, double* d_q);

// Validation helpers.
void require_pmf(const Heatmap2D& hm, const char* where);
void require_pmf(const VolumetricHeatmap& vol, const char* where);
bool is_pmf(const Heatmap2D& hm, double tol = 1e-6);

}  // namespace margiheat
