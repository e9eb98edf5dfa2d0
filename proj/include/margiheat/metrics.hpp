#pragma once

// Evaluation: MPJPE / PCK / AUC, similarity-transform (Procrustes) alignment,
// and file-level evaluation producing aggregate reports.

#include <string>
#include <vector>

#include "margiheat/skeleton.hpp"

namespace margiheat {

// Mean Euclidean distance over the subset joints (millimetres in, mm out).
double mpjpe(const Pose3D& pred, const Pose3D& gt, const std::vector<int>& subset);

// Percentage of subset joints strictly closer than threshold_mm.
double pck(const Pose3D& pred, const Pose3D& gt, const std::vector<int>& subset,
           double threshold_mm = 150.0);

// Mean PCK over thresholds 0, 5, ..., 150 mm (31 samples).
double auc(const Pose3D& pred, const Pose3D& gt, const std::vector<int>& subset);

// Least-squares similarity transform (rotation with det +1, uniform scale,
// translation) mapping pred onto gt, fit on the subset joints and applied to
// all joints. Throws DegenerateError for coincident/collinear subsets.
Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt,
                        const std::vector<int>& subset);

struct EvalOptions {
  bool procrustes = false;
  bool universal = false;  // rescale both poses to the 920 mm knee-neck length
  std::vector<int> subset;  // defaults to all 17 joints when empty
  double pck_threshold_mm = 150.0;
};

struct PoseMetrics {
  std::string id;
  double mpjpe = 0.0, pck = 0.0, auc = 0.0;
};

struct EvalReport {
  int n_poses = 0;
  double mpjpe = 0.0;  // mm, unweighted mean over poses
  double pck = 0.0;    // %
  double auc = 0.0;    // %
  double pck_threshold_mm = 150.0;
  bool procrustes_applied = false;
  bool universal_scaling = false;
  std::vector<int> subset;
  std::vector<double> per_joint_mpjpe;  // size 17; NaN for excluded joints
  std::vector<PoseMetrics> per_pose;
};

// Pairs poses by id, converts each to root-relative millimetres, applies the
// requested alignment and aggregates. Both lists must cover the same ids.
EvalReport evaluate(const std::vector<NamedPose>& pred,
                    const std::vector<NamedPose>& gt, const EvalOptions& opt);

EvalReport evaluate_files(const std::string& pred_path,
                          const std::string& gt_path, const EvalOptions& opt);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);
void write_report_csv(const EvalReport& report, const std::string& path);

// Jacobi eigendecomposition of a symmetric n x n matrix (row-major),
// ascending eigenvalues; used by the alignment and exposed for tests.
void symmetric_eigen(const double* m, int n, double* eigenvalues,
                     double* eigenvectors /* column-major, n x n */);

}  // namespace margiheat
