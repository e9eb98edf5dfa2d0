#pragma once

// Joint-location losses: the heatmap-matching MSE baseline, the coordinate
// l2 loss, and the hybrid losses combining coordinate error with
// Jensen-Shannon divergence from Gaussian targets (full 3D form and the
// xy-only form used for 2D-annotated examples).

#include "margiheat/heatmap.hpp"

namespace margiheat {

// ||pred - target||_2^2, summed over entries. Baseline only.
double loss_heatmap_mse(const Heatmap2D& pred, const Heatmap2D& target);
void loss_heatmap_mse_backward(const Heatmap2D& pred, const Heatmap2D& target,
                               double upstream, double* d_pred);

// Euclidean distance ||mu - gt||_2 (not squared).
double loss_coords_l2(const JointCoords3D& mu, const JointCoords3D& gt);

// d(mu); at mu == gt the subgradient 0 is used.
JointCoords3D loss_coords_l2_backward(const JointCoords3D& mu,
                                      const JointCoords3D& gt,
                                      double upstream);

// Per-joint hybrid 3D loss: coordinate l2 plus the JSD of each marginal from
// a Gaussian target centred on the ground truth projection into that plane.
// `gt` is in heatmap pixel units; off-grid centers yield truncated,
// renormalized targets rather than errors.
double loss_3d(const MarginalHeatmapSet& pred, const JointCoords3D& mu,
               const JointCoords3D& gt, double sigma);

// xy-only variant for examples with 2D annotations.
double loss_2d(const Heatmap2D& pred_xy, double mu_x, double mu_y,
               double gt_x, double gt_y, double sigma);

// Gradients of loss_3d with respect to the predicted heatmaps, with the
// coordinate chain (mu = marginal_coords(pred)) folded in. Accumulates.
void loss_3d_backward(const MarginalHeatmapSet& pred, const JointCoords3D& mu,
                      const JointCoords3D& gt, double sigma, double upstream,
                      double* d_xy, double* d_zy, double* d_xz);

void loss_2d_backward(const Heatmap2D& pred_xy, double mu_x, double mu_y,
                      double gt_x, double gt_y, double sigma, double upstream,
                      double* d_xy);

}  // namespace margiheat
