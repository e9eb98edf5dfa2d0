#include "margiheat/skeleton.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace margiheat {

using joints::Joint;

const CanonicalSkeleton& CanonicalSkeleton::get() {
  static const CanonicalSkeleton sk = [] {
    CanonicalSkeleton s;
    s.names = {"head_top", "head_front", "neck",    "l_shoulder", "r_shoulder",
               "l_elbow",  "r_elbow",    "l_wrist", "r_wrist",    "l_hip",
               "r_hip",    "l_knee",     "r_knee",  "l_ankle",    "r_ankle",
               "pelvis",   "spine_mid"};
    auto& p = s.parent;
    p[Joint::kPelvis] = Joint::kPelvis;
    p[Joint::kSpineMid] = Joint::kPelvis;
    p[Joint::kNeck] = Joint::kSpineMid;
    p[Joint::kHeadFront] = Joint::kNeck;
    p[Joint::kHeadTop] = Joint::kHeadFront;
    p[Joint::kLShoulder] = Joint::kNeck;
    p[Joint::kRShoulder] = Joint::kNeck;
    p[Joint::kLElbow] = Joint::kLShoulder;
    p[Joint::kRElbow] = Joint::kRShoulder;
    p[Joint::kLWrist] = Joint::kLElbow;
    p[Joint::kRWrist] = Joint::kRElbow;
    p[Joint::kLHip] = Joint::kPelvis;
    p[Joint::kRHip] = Joint::kPelvis;
    p[Joint::kLKnee] = Joint::kLHip;
    p[Joint::kRKnee] = Joint::kRHip;
    p[Joint::kLAnkle] = Joint::kLKnee;
    p[Joint::kRAnkle] = Joint::kRKnee;
    for (int j = 0; j < kNumJoints; ++j) s.mirror[j] = j;
    const int pairs[6][2] = {
        {Joint::kLShoulder, Joint::kRShoulder}, {Joint::kLElbow, Joint::kRElbow},
        {Joint::kLWrist, Joint::kRWrist},       {Joint::kLHip, Joint::kRHip},
        {Joint::kLKnee, Joint::kRKnee},         {Joint::kLAnkle, Joint::kRAnkle}};
    for (const auto& pr : pairs) {
      s.mirror[pr[0]] = pr[1];
      s.mirror[pr[1]] = pr[0];
    }
    return s;
  }();
  return sk;
}

int CanonicalSkeleton::index_of(const std::string& name) const {
  for (int j = 0; j < kNumJoints; ++j)
    if (name == names[j]) return j;
  return -1;
}

const std::vector<int>& eval_joint_subset() {
  static const std::vector<int> subset = [] {
    std::vector<int> s;
    for (int j = 0; j < kNumJoints; ++j)
      if (j != Joint::kPelvis && j != Joint::kSpineMid && j != Joint::kHeadFront)
        s.push_back(j);
    return s;
  }();
  return subset;
}

std::vector<int> all_joint_subset() {
  std::vector<int> s(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) s[j] = j;
  return s;
}

const char* space_name(Space s) {
  switch (s) {
    case Space::PixelHeatmap: return "pixel_hm";
    case Space::NormalizedCube: return "normalized_cube";
    case Space::MillimetresRootRelative: return "mm_root_relative";
    case Space::MillimetresCamera: return "mm_camera";
  }
  return "?";
}

Space space_from_name(const std::string& name) {
  if (name == "pixel_hm") return Space::PixelHeatmap;
  if (name == "normalized_cube") return Space::NormalizedCube;
  if (name == "mm_root_relative") return Space::MillimetresRootRelative;
  if (name == "mm_camera") return Space::MillimetresCamera;
  throw IoError("unknown pose space '" + name + "'");
}

Pose3D hm_to_normalized(const Pose3D& p, int hm_size) {
  if (hm_size < 2) throw InvalidParameter("hm_to_normalized: hm_size < 2");
  Pose3D out = p;
  out.space = Space::NormalizedCube;
  const double scale = 2.0 / (hm_size - 1);
  for (auto& j : out.joints)
    for (double& x : j) x = x * scale - 1.0;
  return out;
}

Pose3D normalized_to_hm(const Pose3D& p, int hm_size) {
  if (hm_size < 2) throw InvalidParameter("normalized_to_hm: hm_size < 2");
  Pose3D out = p;
  out.space = Space::PixelHeatmap;
  const double scale = (hm_size - 1) / 2.0;
  for (auto& j : out.joints)
    for (double& x : j) x = (x + 1.0) * scale;
  return out;
}

Pose3D root_align(const Pose3D& p) {
  Pose3D out = p;
  const auto root = p[Joint::kPelvis];
  for (auto& j : out.joints)
    for (int a = 0; a < 3; ++a) j[a] -= root[a];
  if (out.space == Space::MillimetresCamera)
    out.space = Space::MillimetresRootRelative;
  return out;
}

Pose3D normalized_to_mm(const Pose3D& p, double cube_half_extent_mm) {
  if (cube_half_extent_mm <= 0.0)
    throw InvalidParameter("normalized_to_mm: non-positive extent");
  Pose3D out = p;
  for (auto& j : out.joints)
    for (double& x : j) x *= cube_half_extent_mm;
  out.space = Space::MillimetresRootRelative;
  return root_align(out);
}

Pose3D mm_to_normalized(const Pose3D& p, double cube_half_extent_mm) {
  if (cube_half_extent_mm <= 0.0)
    throw InvalidParameter("mm_to_normalized: non-positive extent");
  Pose3D out = p;
  for (auto& j : out.joints)
    for (double& x : j) x /= cube_half_extent_mm;
  out.space = Space::NormalizedCube;
  return out;
}

double knee_neck_length(const Pose3D& p) {
  const int path[] = {Joint::kRKnee, Joint::kRHip, Joint::kPelvis,
                      Joint::kSpineMid, Joint::kNeck};
  double len = 0.0;
  for (int i = 0; i + 1 < 5; ++i) {
    const auto& a = p[path[i]];
    const auto& b = p[path[i + 1]];
    len += std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                     (a[1] - b[1]) * (a[1] - b[1]) +
                     (a[2] - b[2]) * (a[2] - b[2]));
  }
  return len;
}

Pose3D universal_scale(const Pose3D& p) {
  const double len = knee_neck_length(p);
  if (len < 1e-9)
    throw DegenerateError("universal_scale: zero knee-neck length");
  const double s = kUniversalKneeNeckMm / len;
  Pose3D out = p;
  for (auto& j : out.joints)
    for (double& x : j) x *= s;
  return out;
}

Pose3D recover_depth_with_root(const Pose3D& p, double gt_root_depth_mm) {
  Pose3D out = p;
  for (auto& j : out.joints) j[2] += gt_root_depth_mm;
  out.space = Space::MillimetresCamera;
  return out;
}

Pose3D flip_pose(const Pose3D& p) {
  const auto& sk = CanonicalSkeleton::get();
  Pose3D out = p;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& src = p[sk.mirror[j]];
    out[j] = {-src[0], src[1], src[2]};
  }
  return out;
}

void write_pose_file(const std::string& path,
                     const std::vector<NamedPose>& poses) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("write_pose_file: cannot open " + path);
  for (const auto& np : poses) {
    nlohmann::json j;
    j["id"] = np.id;
    j["space"] = space_name(np.pose.space);
    auto arr = nlohmann::json::array();
    for (const auto& joint : np.pose.joints)
      arr.push_back({joint[0], joint[1], joint[2]});
    j["joints"] = std::move(arr);
    f << j.dump() << "\n";
  }
  if (!f) throw IoError("write_pose_file: write failed for " + path);
}

std::vector<NamedPose> read_pose_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_pose_file: cannot open " + path);
  std::vector<NamedPose> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": malformed JSON line (" + e.what() + ")");
    }
    NamedPose np;
    try {
      np.id = j.at("id").get<std::string>();
      np.pose.space = space_from_name(j.at("space").get<std::string>());
      const auto& arr = j.at("joints");
      if (!arr.is_array() || arr.size() != kNumJoints)
        throw IoError(path + ":" + std::to_string(lineno) +
                      ": pose must have exactly 17 joints");
      for (int ji = 0; ji < kNumJoints; ++ji) {
        const auto& triplet = arr.at(ji);
        if (!triplet.is_array() || triplet.size() != 3)
          throw IoError(path + ":" + std::to_string(lineno) +
                        ": joint entries must be [x, y, z]");
        for (int a = 0; a < 3; ++a)
          np.pose.joints[ji][a] = triplet.at(a).get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(np));
  }
  return out;
}

}  // namespace margiheat
