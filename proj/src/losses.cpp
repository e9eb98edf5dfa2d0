#include "margiheat/losses.hpp"

#include <cmath>

namespace margiheat {

double loss_heatmap_mse(const Heatmap2D& pred, const Heatmap2D& target) {
  if (pred.rows != target.rows || pred.cols != target.cols)
    throw ShapeError("loss_heatmap_mse: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    acc += d * d;
  }
  return acc;
}

void loss_heatmap_mse_backward(const Heatmap2D& pred, const Heatmap2D& target,
                               double upstream, double* d_pred) {
  if (pred.rows != target.rows || pred.cols != target.cols)
    throw ShapeError("loss_heatmap_mse_backward: shape mismatch");
  for (size_t i = 0; i < pred.size(); ++i)
    d_pred[i] += upstream * 2.0 * (pred.v[i] - target.v[i]);
}

double loss_coords_l2(const JointCoords3D& mu, const JointCoords3D& gt) {
  const double dx = mu.mu_x - gt.mu_x;
  const double dy = mu.mu_y - gt.mu_y;
  const double dz = mu.mu_z - gt.mu_z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

JointCoords3D loss_coords_l2_backward(const JointCoords3D& mu,
                                      const JointCoords3D& gt,
                                      double upstream) {
  const double dist = loss_coords_l2(mu, gt);
  JointCoords3D g;
  if (dist < 1e-12) return g;  // subgradient at the minimum
  const double s = upstream / dist;
  g.mu_x = s * (mu.mu_x - gt.mu_x);
  g.mu_y = s * (mu.mu_y - gt.mu_y);
  g.mu_z = s * (mu.mu_z - gt.mu_z);
  return g;
}

namespace {

// Gaussian targets for the three planes of one ground-truth joint.
struct PlaneTargets {
  Heatmap2D xy, zy, xz;
};

PlaneTargets targets_for(const MarginalHeatmapSet& pred,
                         const JointCoords3D& gt, double sigma) {
  PlaneTargets t;
  // xy: (col=x, row=y); zy: (col=z, row=y); xz: (col=x, row=z)
  t.xy = render_gaussian_2d(gt.mu_x, gt.mu_y, sigma, pred.xy.rows,
                            pred.xy.cols, Plane::XY);
  t.zy = render_gaussian_2d(gt.mu_z, gt.mu_y, sigma, pred.zy.rows,
                            pred.zy.cols, Plane::ZY);
  t.xz = render_gaussian_2d(gt.mu_x, gt.mu_z, sigma, pred.xz.rows,
                            pred.xz.cols, Plane::XZ);
  return t;
}

}  // namespace

double loss_3d(const MarginalHeatmapSet& pred, const JointCoords3D& mu,
               const JointCoords3D& gt, double sigma) {
  const PlaneTargets t = targets_for(pred, gt, sigma);
  return loss_coords_l2(mu, gt) + jsd(pred.xy, t.xy) + jsd(pred.zy, t.zy) +
         jsd(pred.xz, t.xz);
}

double loss_2d(const Heatmap2D& pred_xy, double mu_x, double mu_y, double gt_x,
               double gt_y, double sigma) {
  const Heatmap2D target = render_gaussian_2d(gt_x, gt_y, sigma, pred_xy.rows,
                                              pred_xy.cols, Plane::XY);
  const double dx = mu_x - gt_x, dy = mu_y - gt_y;
  return std::sqrt(dx * dx + dy * dy) + jsd(pred_xy, target);
}

void loss_3d_backward(const MarginalHeatmapSet& pred, const JointCoords3D& mu,
                      const JointCoords3D& gt, double sigma, double upstream,
                      double* d_xy, double* d_zy, double* d_xz) {
  const PlaneTargets t = targets_for(pred, gt, sigma);
  // coordinate term through mu = marginal_coords(pred)
  const JointCoords3D d_mu = loss_coords_l2_backward(mu, gt, upstream);
  marginal_coords_backward(pred, d_mu.mu_x, d_mu.mu_y, d_mu.mu_z, d_xy, d_zy,
                           d_xz);
  // divergence terms act on each plane directly
  jsd_backward(pred.xy, t.xy, upstream, d_xy, nullptr);
  jsd_backward(pred.zy, t.zy, upstream, d_zy, nullptr);
  jsd_backward(pred.xz, t.xz, upstream, d_xz, nullptr);
}

void loss_2d_backward(const Heatmap2D& pred_xy, double mu_x, double mu_y,
                      double gt_x, double gt_y, double sigma, double upstream,
                      double* d_xy) {
  const Heatmap2D target = render_gaussian_2d(gt_x, gt_y, sigma, pred_xy.rows,
                                              pred_xy.cols, Plane::XY);
  const double dx = mu_x - gt_x, dy = mu_y - gt_y;
  const double dist = std::sqrt(dx * dx + dy * dy);
  if (dist >= 1e-12)
    soft_argmax_2d_backward(pred_xy.rows, pred_xy.cols, upstream * dx / dist,
                            upstream * dy / dist, d_xy);
  jsd_backward(pred_xy, target, upstream, d_xy, nullptr);
}

}  // namespace margiheat
