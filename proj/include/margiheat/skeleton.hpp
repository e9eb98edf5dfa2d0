#pragma once

// Canonical 17-joint skeleton, pose coordinate spaces and the conversions
// between them, flip semantics, universal scaling and root-depth recovery.

#include <array>
#include <string>
#include <vector>

#include "margiheat/errors.hpp"

namespace margiheat {

namespace joints {
// Canonical joint order; every pose in the system uses it.
enum Joint : int {
  kHeadTop = 0,
  kHeadFront,
  kNeck,
  kLShoulder,
  kRShoulder,
  kLElbow,
  kRElbow,
  kLWrist,
  kRWrist,
  kLHip,
  kRHip,
  kLKnee,
  kRKnee,
  kLAnkle,
  kRAnkle,
  kPelvis,
  kSpineMid,
  kCount
};
}  // namespace joints

constexpr int kNumJoints = joints::kCount;

struct CanonicalSkeleton {
  std::array<const char*, kNumJoints> names;
  // parent[j] for a tree rooted at the pelvis (parent[pelvis] == pelvis)
  std::array<int, kNumJoints> parent;
  // involution over joint indices; midline joints map to themselves
  std::array<int, kNumJoints> mirror;

  static const CanonicalSkeleton& get();
  int index_of(const std::string& name) const;  // -1 when unknown
};

// The 14-joint evaluation subset: canonical minus pelvis, spine_mid and
// head_front.
const std::vector<int>& eval_joint_subset();
std::vector<int> all_joint_subset();

enum class Space {
  PixelHeatmap,            // heatmap pixel indices, [0, hm-1] per axis
  NormalizedCube,          // [-1, 1] per axis
  MillimetresRootRelative,  // mm, pelvis at origin
  MillimetresCamera,       // mm, camera frame (absolute depth)
};

const char* space_name(Space s);
Space space_from_name(const std::string& name);

struct Pose3D {
  std::array<std::array<double, 3>, kNumJoints> joints{};
  Space space = Space::NormalizedCube;

  std::array<double, 3>& operator[](int j) { return joints[j]; }
  const std::array<double, 3>& operator[](int j) const { return joints[j]; }
};

// index -> (2*index/(hm-1)) - 1, per axis. hm_size >= 2.
Pose3D hm_to_normalized(const Pose3D& p, int hm_size);
Pose3D normalized_to_hm(const Pose3D& p, int hm_size);

// Scale by the cube half-extent (default 1000 mm) and root-align.
Pose3D normalized_to_mm(const Pose3D& p, double cube_half_extent_mm = 1000.0);
Pose3D mm_to_normalized(const Pose3D& p, double cube_half_extent_mm = 1000.0);

// Translate so the pelvis sits at the origin. Keeps the space tag except
// that camera-space poses become root-relative.
Pose3D root_align(const Pose3D& p);

// Uniformly scale so the knee-neck path (right knee -> right hip -> pelvis
// -> spine_mid -> neck, summed edge lengths) measures 920 mm.
Pose3D universal_scale(const Pose3D& p);
double knee_neck_length(const Pose3D& p);
constexpr double kUniversalKneeNeckMm = 920.0;

// Add the ground-truth root depth to every z coordinate.
Pose3D recover_depth_with_root(const Pose3D& p, double gt_root_depth_mm);

// Negate x and swap the left/right joint pairing.
Pose3D flip_pose(const Pose3D& p);

// ---- JSON Lines pose files ----
// One pose per line: {"id": ..., "space": ..., "joints": [[x,y,z] x 17]}.

struct NamedPose {
  std::string id;
  Pose3D pose;
};

void write_pose_file(const std::string& path, const std::vector<NamedPose>& poses);
std::vector<NamedPose> read_pose_file(const std::string& path);

}  // namespace margiheat
