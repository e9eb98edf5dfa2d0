#include "margiheat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

namespace margiheat {

namespace {

double joint_dist(const Pose3D& a, const Pose3D& b, int j) {
  const double dx = a[j][0] - b[j][0];
  const double dy = a[j][1] - b[j][1];
  const double dz = a[j][2] - b[j][2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void require_subset(const std::vector<int>& subset, const char* where) {
  if (subset.empty()) throw InvalidParameter(std::string(where) + ": empty subset");
  for (int j : subset)
    if (j < 0 || j >= kNumJoints)
      throw InvalidParameter(std::string(where) + ": joint index out of range");
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt,
             const std::vector<int>& subset) {
  require_subset(subset, "mpjpe");
  double acc = 0.0;
  for (int j : subset) acc += joint_dist(pred, gt, j);
  return acc / static_cast<double>(subset.size());
}

double pck(const Pose3D& pred, const Pose3D& gt, const std::vector<int>& subset,
           double threshold_mm) {
  require_subset(subset, "pck");
  int hits = 0;
  for (int j : subset)
    if (joint_dist(pred, gt, j) < threshold_mm) ++hits;
  return 100.0 * hits / static_cast<double>(subset.size());
}

double auc(const Pose3D& pred, const Pose3D& gt, const std::vector<int>& subset) {
  require_subset(subset, "auc");
  double acc = 0.0;
  for (int k = 0; k <= 30; ++k) acc += pck(pred, gt, subset, 5.0 * k);
  return acc / 31.0;
}

void symmetric_eigen(const double* m, int n, double* eigenvalues,
                     double* eigenvectors) {
  // Cyclic Jacobi sweeps; plenty for the 3x3/4x4 matrices used here.
  std::vector<double> a(m, m + n * n);
  std::vector<double> v(n * n, 0.0);
  for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
  }
  // sort ascending by eigenvalue
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return a[x * n + x] < a[y * n + y]; });
  for (int i = 0; i < n; ++i) {
    eigenvalues[i] = a[order[i] * n + order[i]];
    for (int k = 0; k < n; ++k)
      eigenvectors[k * n + i] = v[k * n + order[i]];
  }
}

Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt,
                        const std::vector<int>& subset) {
  require_subset(subset, "procrustes_align");
  if (subset.size() < 3)
    throw DegenerateError("procrustes_align: need at least 3 joints");
  const double n = static_cast<double>(subset.size());

  double pc[3] = {0, 0, 0}, gc[3] = {0, 0, 0};
  for (int j : subset)
    for (int a = 0; a < 3; ++a) {
      pc[a] += pred[j][a] / n;
      gc[a] += gt[j][a] / n;
    }

  // cross-covariance and per-set scatter
  double S[3][3] = {{0}};
  double p_sq = 0.0;
  double p_cov[3][3] = {{0}}, g_cov[3][3] = {{0}};
  for (int j : subset) {
    double p[3], g[3];
    for (int a = 0; a < 3; ++a) {
      p[a] = pred[j][a] - pc[a];
      g[a] = gt[j][a] - gc[a];
    }
    for (int a = 0; a < 3; ++a) {
      p_sq += p[a] * p[a];
      for (int b = 0; b < 3; ++b) {
        S[a][b] += p[a] * g[b];
        p_cov[a][b] += p[a] * p[b];
        g_cov[a][b] += g[a] * g[b];
      }
    }
  }

  // degenerate joint sets: coincident (zero scatter) or collinear
  // (second-largest scatter eigenvalue vanishes) in either set
  for (const auto& cov : {p_cov, g_cov}) {
    double evals[3], evecs[9];
    symmetric_eigen(&cov[0][0], 3, evals, evecs);
    const double scale = std::max(evals[2], 0.0);
    if (scale < 1e-18 || evals[1] <= 1e-12 * scale)
      throw DegenerateError(
          "procrustes_align: coincident or collinear joint set");
  }

  // Horn's quaternion method: the rotation maximizing sum(g . R p) is the
  // top eigenvector of this symmetric 4x4 built from the cross-covariance.
  const double K[16] = {
      S[0][0] + S[1][1] + S[2][2], S[1][2] - S[2][1], S[2][0] - S[0][2],
      S[0][1] - S[1][0],
      S[1][2] - S[2][1], S[0][0] - S[1][1] - S[2][2], S[0][1] + S[1][0],
      S[2][0] + S[0][2],
      S[2][0] - S[0][2], S[0][1] + S[1][0], -S[0][0] + S[1][1] - S[2][2],
      S[1][2] + S[2][1],
      S[0][1] - S[1][0], S[2][0] + S[0][2], S[1][2] + S[2][1],
      -S[0][0] - S[1][1] + S[2][2]};
  double evals[4], evecs[16];
  symmetric_eigen(K, 4, evals, evecs);
  const double qw = evecs[0 * 4 + 3], qx = evecs[1 * 4 + 3],
               qy = evecs[2 * 4 + 3], qz = evecs[3 * 4 + 3];

  // unit quaternion -> rotation matrix (det +1 by construction)
  double R[3][3];
  R[0][0] = qw * qw + qx * qx - qy * qy - qz * qz;
  R[0][1] = 2.0 * (qx * qy - qw * qz);
  R[0][2] = 2.0 * (qx * qz + qw * qy);
  R[1][0] = 2.0 * (qx * qy + qw * qz);
  R[1][1] = qw * qw - qx * qx + qy * qy - qz * qz;
  R[1][2] = 2.0 * (qy * qz - qw * qx);
  R[2][0] = 2.0 * (qx * qz - qw * qy);
  R[2][1] = 2.0 * (qy * qz + qw * qx);
  R[2][2] = qw * qw - qx * qx - qy * qy + qz * qz;

  // least-squares scale for s R p + t ~ g
  double num = 0.0;
  for (int j : subset) {
    double p[3];
    for (int a = 0; a < 3; ++a) p[a] = pred[j][a] - pc[a];
    for (int a = 0; a < 3; ++a) {
      const double rp = R[a][0] * p[0] + R[a][1] * p[1] + R[a][2] * p[2];
      num += rp * (gt[j][a] - gc[a]);
    }
  }
  const double s = num / p_sq;
  if (!(s > 0.0))
    throw DegenerateError("procrustes_align: non-positive optimal scale");

  Pose3D out = pred;
  for (int j = 0; j < kNumJoints; ++j) {
    double p[3];
    for (int a = 0; a < 3; ++a) p[a] = pred[j][a] - pc[a];
    for (int a = 0; a < 3; ++a)
      out[j][a] =
          s * (R[a][0] * p[0] + R[a][1] * p[1] + R[a][2] * p[2]) + gc[a];
  }
  return out;
}

namespace {

Pose3D to_root_relative_mm(const Pose3D& p, const std::string& id) {
  switch (p.space) {
    case Space::NormalizedCube:
      return normalized_to_mm(p);
    case Space::MillimetresCamera:
    case Space::MillimetresRootRelative:
      return root_align(p);
    case Space::PixelHeatmap:
      throw InvalidParameter("evaluate: pose '" + id +
                             "' is in heatmap pixels; convert it first");
  }
  throw InvalidParameter("evaluate: unknown space");
}

}  // namespace

EvalReport evaluate(const std::vector<NamedPose>& pred,
                    const std::vector<NamedPose>& gt, const EvalOptions& opt) {
  EvalReport report;
  report.subset = opt.subset.empty() ? all_joint_subset() : opt.subset;
  require_subset(report.subset, "evaluate");
  report.procrustes_applied = opt.procrustes;
  report.universal_scaling = opt.universal;
  report.pck_threshold_mm = opt.pck_threshold_mm;

  std::map<std::string, const Pose3D*> gt_by_id;
  for (const auto& np : gt) gt_by_id[np.id] = &np.pose;
  if (gt_by_id.size() != gt.size())
    throw InvalidInput("evaluate: duplicate ids in ground truth");

  report.per_joint_mpjpe.assign(kNumJoints,
                                std::numeric_limits<double>::quiet_NaN());
  std::vector<double> joint_acc(kNumJoints, 0.0);

  for (const auto& np : pred) {
    const auto it = gt_by_id.find(np.id);
    if (it == gt_by_id.end())
      throw InvalidInput("evaluate: no ground truth for id '" + np.id + "'");
    Pose3D p = to_root_relative_mm(np.pose, np.id);
    Pose3D g = to_root_relative_mm(*it->second, np.id);
    if (opt.universal) {
      p = universal_scale(p);
      g = universal_scale(g);
    }
    if (opt.procrustes) p = procrustes_align(p, g, report.subset);

    PoseMetrics pm;
    pm.id = np.id;
    pm.mpjpe = mpjpe(p, g, report.subset);
    pm.pck = pck(p, g, report.subset, opt.pck_threshold_mm);
    pm.auc = auc(p, g, report.subset);
    report.per_pose.push_back(pm);
    for (int j : report.subset) joint_acc[j] += joint_dist(p, g, j);
  }
  report.n_poses = static_cast<int>(report.per_pose.size());
  if (report.n_poses == 0)
    throw InvalidInput("evaluate: no poses to evaluate");

  for (const auto& pm : report.per_pose) {
    report.mpjpe += pm.mpjpe;
    report.pck += pm.pck;
    report.auc += pm.auc;
  }
  report.mpjpe /= report.n_poses;
  report.pck /= report.n_poses;
  report.auc /= report.n_poses;
  for (int j : report.subset) report.per_joint_mpjpe[j] = joint_acc[j] / report.n_poses;
  return report;
}

EvalReport evaluate_files(const std::string& pred_path,
                          const std::string& gt_path, const EvalOptions& opt) {
  const auto pred = read_pose_file(pred_path);
  const auto gt = read_pose_file(gt_path);
  if (pred.size() != gt.size())
    throw InvalidInput("evaluate: pose counts differ between files");
  return evaluate(pred, gt, opt);
}

std::string report_to_json(const EvalReport& r) {
  const auto& sk = CanonicalSkeleton::get();
  nlohmann::json j;
  j["n_poses"] = r.n_poses;
  j["mpjpe_mm"] = r.mpjpe;
  j["pck_pct"] = r.pck;
  j["auc_pct"] = r.auc;
  j["pck_threshold_mm"] = r.pck_threshold_mm;
  j["procrustes"] = r.procrustes_applied;
  j["universal_scaling"] = r.universal_scaling;
  auto subset = nlohmann::json::array();
  for (int jt : r.subset) subset.push_back(sk.names[jt]);
  j["subset"] = std::move(subset);
  nlohmann::json per_joint;
  for (int jt : r.subset) per_joint[sk.names[jt]] = r.per_joint_mpjpe[jt];
  j["per_joint_mpjpe_mm"] = std::move(per_joint);
  return j.dump(2);
}

std::string report_to_table(const EvalReport& r) {
  const auto& sk = CanonicalSkeleton::get();
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "poses: %d   procrustes: %s   universal: %s   joints: %zu\n",
                r.n_poses, r.procrustes_applied ? "yes" : "no",
                r.universal_scaling ? "yes" : "no", r.subset.size());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-12s %12s %10s %10s\n", "metric", "value",
                "", "");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-12s %12.3f mm\n", "MPJPE", r.mpjpe);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-12s %12.3f %%  (@ %.0f mm)\n", "PCK",
                r.pck, r.pck_threshold_mm);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-12s %12.3f %%\n", "AUC", r.auc);
  out += buf;
  out += "per-joint MPJPE (mm):\n";
  for (int jt : r.subset) {
    std::snprintf(buf, sizeof(buf), "  %-12s %10.3f\n", sk.names[jt],
                  r.per_joint_mpjpe[jt]);
    out += buf;
  }
  return out;
}

void write_report_csv(const EvalReport& r, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_report_csv: cannot open " + path);
  f << "id,mpjpe_mm,pck_pct,auc_pct\n";
  char buf[160];
  for (const auto& pm : r.per_pose) {
    std::snprintf(buf, sizeof(buf), "%s,%.9f,%.9f,%.9f\n", pm.id.c_str(),
                  pm.mpjpe, pm.pck, pm.auc);
    f << buf;
  }
}

}  // namespace margiheat
