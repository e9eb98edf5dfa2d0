#include "margiheat/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "margiheat/pgm.hpp"
#include "margiheat/rng.hpp"

namespace margiheat {

using joints::Joint;

namespace {

// Canonical rig: bone lengths in cube units, child joint <- direction.
constexpr double kBoneLen[kNumJoints] = {
    0.12,  // head_top (from head_front)
    0.14,  // head_front (from neck)
    0.25,  // neck (from spine_mid)
    0.18, 0.18,  // shoulders (from neck)
    0.28, 0.28,  // elbows
    0.26, 0.26,  // wrists
    0.11, 0.11,  // hips (from pelvis)
    0.40, 0.40,  // knees
    0.40, 0.40,  // ankles
    0.0,   // pelvis (root)
    0.25,  // spine_mid (from pelvis)
};

struct Keyframe {
  const char* name;
  double root[3];
  // unit-ish direction parent -> child per joint (root entry unused)
  double dir[kNumJoints][3];
};

// y grows downward (image rows), the camera sits at z = -4 looking toward
// +z, so "toward the camera" is -z.
const Keyframe kLibrary[] = {
    {"stand",
     {0.0, 0.1, 0.0},
     {
         {0.0, -0.9, 0.44},   // head_top
         {0.0, -0.6, -0.8},   // head_front
         {0.0, -1.0, 0.0},    // neck
         {-1.0, 0.1, 0.0},    // l_shoulder
         {1.0, 0.1, 0.0},     // r_shoulder
         {-0.25, 1.0, 0.0},   // l_elbow
         {0.25, 1.0, 0.0},    // r_elbow
         {-0.1, 1.0, 0.0},    // l_wrist
         {0.1, 1.0, 0.0},     // r_wrist
         {-1.0, 0.15, 0.0},   // l_hip
         {1.0, 0.15, 0.0},    // r_hip
         {0.0, 1.0, 0.0},     // l_knee
         {0.0, 1.0, 0.0},     // r_knee
         {0.0, 1.0, 0.0},     // l_ankle
         {0.0, 1.0, 0.0},     // r_ankle
         {0.0, 0.0, 0.0},     // pelvis
         {0.0, -1.0, 0.0},    // spine_mid
     }},
    {"sit",
     {0.0, 0.25, 0.2},
     {
         {0.0, -0.9, 0.44},
         {0.0, -0.6, -0.8},
         {0.0, -1.0, 0.1},
         {-1.0, 0.1, 0.0},
         {1.0, 0.1, 0.0},
         {-0.2, 1.0, -0.2},
         {0.2, 1.0, -0.2},
         {0.0, 0.2, -1.0},
         {0.0, 0.2, -1.0},
         {-1.0, 0.15, 0.0},
         {1.0, 0.15, 0.0},
         {0.0, 0.25, -1.0},
         {0.0, 0.25, -1.0},
         {0.0, 1.0, 0.15},
         {0.0, 1.0, 0.15},
         {0.0, 0.0, 0.0},
         {0.0, -1.0, -0.1},
     }},
    {"reach",
     {0.0, 0.12, 0.0},
     {
         {0.0, -0.9, 0.44},
         {0.0, -0.6, -0.8},
         {0.0, -1.0, 0.0},
         {-1.0, 0.05, 0.0},
         {1.0, 0.1, 0.0},
         {-0.5, -1.0, 0.0},   // left arm raised
         {0.3, 1.0, -0.1},
         {-0.2, -1.0, 0.0},
         {0.1, 1.0, -0.2},
         {-1.0, 0.15, 0.0},
         {1.0, 0.15, 0.0},
         {0.0, 1.0, 0.0},
         {0.05, 1.0, 0.0},
         {0.0, 1.0, 0.0},
         {0.0, 1.0, 0.05},
         {0.0, 0.0, 0.0},
         {0.0, -1.0, 0.0},
     }},
    {"walk",
     {0.0, 0.1, 0.0},
     {
         {0.0, -0.9, 0.44},
         {0.0, -0.6, -0.8},
         {0.0, -1.0, 0.05},
         {-1.0, 0.1, 0.0},
         {1.0, 0.1, 0.0},
         {-0.15, 1.0, -0.3},  // arms swing opposite the legs
         {0.15, 1.0, 0.3},
         {-0.05, 1.0, -0.35},
         {0.05, 1.0, 0.4},
         {-1.0, 0.15, 0.0},
         {1.0, 0.15, 0.0},
         {0.0, 1.0, -0.35},   // left leg forward
         {0.0, 1.0, 0.35},    // right leg back
         {0.0, 1.0, 0.3},
         {0.0, 1.0, -0.3},
         {0.0, 0.0, 0.0},
         {0.0, -1.0, 0.0},
     }},
};

constexpr int kNumLibrary = 4;

// topological order: parents before children
const int kTopoOrder[kNumJoints] = {
    Joint::kPelvis,   Joint::kSpineMid, Joint::kNeck,     Joint::kHeadFront,
    Joint::kHeadTop,  Joint::kLShoulder, Joint::kRShoulder, Joint::kLElbow,
    Joint::kRElbow,   Joint::kLWrist,   Joint::kRWrist,   Joint::kLHip,
    Joint::kRHip,     Joint::kLKnee,    Joint::kRKnee,    Joint::kLAnkle,
    Joint::kRAnkle};

void normalize3(double v[3]) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (int i = 0; i < 3; ++i) v[i] /= n;
}

// Rodrigues rotation of v about unit axis by angle.
void rotate_about(double v[3], const double axis[3], double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
  double cross[3] = {axis[1] * v[2] - axis[2] * v[1],
                     axis[2] * v[0] - axis[0] * v[2],
                     axis[0] * v[1] - axis[1] * v[0]};
  for (int i = 0; i < 3; ++i)
    v[i] = v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c);
}

Pose3D build_pose(int lib_index, double scale,
                  const double dirs[kNumJoints][3]) {
  const auto& sk = CanonicalSkeleton::get();
  Pose3D p;
  p.space = Space::NormalizedCube;
  p[Joint::kPelvis] = {0.0, 0.0, 0.0};
  for (int j : kTopoOrder) {
    if (j == Joint::kPelvis) continue;
    const auto& par = p[sk.parent[j]];
    for (int a = 0; a < 3; ++a)
      p[j][a] = par[a] + dirs[j][a] * kBoneLen[j] * scale;
  }
  (void)lib_index;
  return p;
}

// Eight constant-luminance limb colors (each sums to 1.5, max component kept
// below 0.66 so the brightness factor never saturates a channel).
constexpr double kPalette[8][3] = {
    {0.65, 0.45, 0.40}, {0.45, 0.65, 0.40}, {0.40, 0.45, 0.65},
    {0.65, 0.40, 0.45}, {0.40, 0.65, 0.45}, {0.45, 0.40, 0.65},
    {0.55, 0.55, 0.40}, {0.50, 0.45, 0.55}};

struct Bone {
  int joint;   // child joint; parent is sk.parent[joint]
  int parent;
};

std::vector<Bone> skeleton_bones() {
  const auto& sk = CanonicalSkeleton::get();
  std::vector<Bone> bones;
  for (int j = 0; j < kNumJoints; ++j)
    if (j != Joint::kPelvis) bones.push_back({j, sk.parent[j]});
  return bones;
}

}  // namespace

int n_library_poses() { return kNumLibrary; }

Pose3D library_pose(int index) {
  if (index < 0 || index >= kNumLibrary)
    throw InvalidParameter("library_pose: index out of range");
  const auto& kf = kLibrary[index];
  double dirs[kNumJoints][3];
  for (int j = 0; j < kNumJoints; ++j) {
    for (int a = 0; a < 3; ++a) dirs[j][a] = kf.dir[j][a];
    if (j != Joint::kPelvis) normalize3(dirs[j]);
  }
  Pose3D p = build_pose(index, 1.0, dirs);
  for (auto& j : p.joints)
    for (int a = 0; a < 3; ++a) j[a] += kf.root[a];
  return p;
}

Pose3D sample_pose(Rng& rng, const PoseSampleParams& params) {
  const int index = static_cast<int>(rng.uniform_int(kNumLibrary));
  const auto& kf = kLibrary[index];

  double dirs[kNumJoints][3];
  for (int j = 0; j < kNumJoints; ++j) {
    for (int a = 0; a < 3; ++a) dirs[j][a] = kf.dir[j][a];
    if (j == Joint::kPelvis) continue;
    normalize3(dirs[j]);
    if (params.max_perturb_rad > 0.0) {
      double axis[3] = {rng.normal(), rng.normal(), rng.normal()};
      normalize3(axis);
      rotate_about(dirs[j], axis, rng.uniform(0.0, params.max_perturb_rad));
      normalize3(dirs[j]);
    }
  }
  const double scale = rng.uniform(params.scale_lo, params.scale_hi);
  Pose3D p = build_pose(index, scale, dirs);

  // root placement keeping every joint inside the shrunken cube
  const double limit = 1.0 - params.cube_margin;
  double lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    double mn = 1e9, mx = -1e9;
    for (const auto& j : p.joints) {
      mn = std::min(mn, j[a]);
      mx = std::max(mx, j[a]);
    }
    lo[a] = -limit - mn;
    hi[a] = limit - mx;
    if (lo[a] > hi[a])
      throw DegenerateError("sample_pose: pose exceeds the cube");
  }
  double root[3];
  for (int a = 0; a < 3; ++a) {
    if (params.randomize_root) {
      root[a] = rng.uniform(lo[a], hi[a]);
    } else {
      root[a] = std::clamp(kf.root[a], lo[a], hi[a]);
    }
  }
  for (auto& j : p.joints)
    for (int a = 0; a < 3; ++a) j[a] += root[a];
  return p;
}

std::array<double, 3> project_point(double x, double y, double z, int size) {
  const double depth = z - kCameraZ;
  const double sx = kFocal * x / depth;
  const double sy = kFocal * y / depth;
  return {(sx + 1.0) * 0.5 * (size - 1), (sy + 1.0) * 0.5 * (size - 1), depth};
}

RenderResult render_pose(const Pose3D& pose, int size) {
  RenderResult out;
  out.image.resize(3, size, size);
  out.top_bone.assign(static_cast<size_t>(size) * size, -1);

  const auto bones = skeleton_bones();
  out.bone_depth.resize(bones.size());

  // paint far to near
  std::vector<int> order(bones.size());
  for (size_t i = 0; i < bones.size(); ++i) {
    const auto& b = bones[i];
    const double dz = 0.5 * (pose[b.joint][2] + pose[b.parent][2]) - kCameraZ;
    out.bone_depth[i] = dz;
    order[i] = static_cast<int>(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (out.bone_depth[a] != out.bone_depth[b])
      return out.bone_depth[a] > out.bone_depth[b];
    return a < b;
  });

  for (int bi : order) {
    const auto& b = bones[bi];
    const auto pa =
        project_point(pose[b.parent][0], pose[b.parent][1], pose[b.parent][2], size);
    const auto pb =
        project_point(pose[b.joint][0], pose[b.joint][1], pose[b.joint][2], size);
    const double depth = out.bone_depth[bi];
    const double near_factor = (-kCameraZ) / depth;  // 1 at z = 0
    const double radius =
        1.5 * (size / 64.0) * near_factor;  // thicker when closer
    const double brightness = std::pow(near_factor, 1.5);
    const double* base = kPalette[bi % 8];
    double color[3];
    for (int c = 0; c < 3; ++c) color[c] = base[c] * brightness;

    const int x0 = std::max(0, static_cast<int>(std::floor(
                                   std::min(pa[0], pb[0]) - radius - 1)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(
                                          std::max(pa[0], pb[0]) + radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(
                                   std::min(pa[1], pb[1]) - radius - 1)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(
                                          std::max(pa[1], pb[1]) + radius + 1)));
    const double vx = pb[0] - pa[0], vy = pb[1] - pa[1];
    const double vlen2 = vx * vx + vy * vy;
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        const double dx = px - pa[0], dy = py - pa[1];
        double t = vlen2 > 1e-12 ? (dx * vx + dy * vy) / vlen2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double cx = pa[0] + t * vx - px;
        const double cy = pa[1] + t * vy - py;
        const double dist = std::sqrt(cx * cx + cy * cy);
        const double cov = std::clamp(radius + 0.5 - dist, 0.0, 1.0);
        if (cov <= 0.0) continue;
        const size_t idx = static_cast<size_t>(py) * size + px;
        for (int c = 0; c < 3; ++c) {
          double& v = out.image.v[static_cast<size_t>(c) * size * size + idx];
          v = v * (1.0 - cov) + color[c] * cov;
        }
        if (cov >= 0.5) out.top_bone[idx] = bi;
      }
  }
  for (auto& v : out.image.v) v = std::clamp(v, 0.0, 1.0);
  return out;
}

SynthExample render_example(const Pose3D& pose, int size, uint64_t seed,
                            bool has_3d) {
  SynthExample ex;
  ex.image = render_pose(pose, size).image;
  ex.pose_gt = pose;
  ex.has_3d = has_3d;
  ex.rng_seed = seed;
  return ex;
}

SynthExample make_example(uint64_t seed, int size,
                          const PoseSampleParams& params, bool has_3d) {
  Rng rng(seed);
  return render_example(sample_pose(rng, params), size, seed, has_3d);
}

std::vector<LimbCue> measure_limb_cues(const Pose3D& pose, int size) {
  const RenderResult r = render_pose(pose, size);
  const auto bones = skeleton_bones();
  std::vector<double> acc(bones.size(), 0.0);
  std::vector<int> count(bones.size(), 0);
  const size_t plane = static_cast<size_t>(size) * size;
  for (size_t i = 0; i < plane; ++i) {
    const int b = r.top_bone[i];
    if (b < 0) continue;
    acc[b] += (r.image.v[i] + r.image.v[plane + i] + r.image.v[2 * plane + i]) / 3.0;
    ++count[b];
  }
  std::vector<LimbCue> cues;
  for (size_t b = 0; b < bones.size(); ++b) {
    if (count[b] < 4) continue;  // occluded or off-screen
    cues.push_back({static_cast<int>(b), acc[b] / count[b], r.bone_depth[b]});
  }
  return cues;
}

SynthExample augment(const SynthExample& ex, Rng& rng,
                     const AugmentParams& params) {
  const int size = ex.image.h;
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    const bool flip = rng.bernoulli(params.flip_prob);
    const double angle =
        rng.uniform(-params.max_rotate_deg, params.max_rotate_deg) * M_PI / 180.0;
    const double scale = rng.uniform(params.scale_lo, params.scale_hi);
    const double tx = rng.uniform(-params.max_translate_px, params.max_translate_px);
    const double ty = rng.uniform(-params.max_translate_px, params.max_translate_px);
    double gains[3];
    for (double& g : gains) g = rng.uniform(params.gain_lo, params.gain_hi);

    Pose3D p = flip ? flip_pose(ex.pose_gt) : ex.pose_gt;
    const double c = std::cos(angle), s = std::sin(angle);
    for (auto& j : p.joints) {
      // in-plane rotation and scale act on cube x,y (z untouched); both
      // commute exactly with the perspective projection about the center
      const double x = j[0], y = j[1];
      j[0] = scale * (c * x - s * y);
      j[1] = scale * (s * x + c * y);
      // a uniform pixel shift needs a depth-compensated cube shift
      const double depth = j[2] - kCameraZ;
      j[0] += tx * (2.0 / (size - 1)) * depth / kFocal;
      j[1] += ty * (2.0 / (size - 1)) * depth / kFocal;
    }
    bool inside = true;
    for (const auto& j : p.joints)
      for (int a = 0; a < 3; ++a)
        if (std::abs(j[a]) > 1.0) inside = false;
    if (!inside) continue;

    SynthExample out;
    out.image = render_pose(p, size).image;
    const size_t plane = static_cast<size_t>(size) * size;
    for (int ch = 0; ch < 3; ++ch)
      for (size_t i = 0; i < plane; ++i) {
        double& v = out.image.v[ch * plane + i];
        v = std::clamp(v * gains[ch], 0.0, 1.0);
      }
    out.pose_gt = p;
    out.has_3d = ex.has_3d;
    out.rng_seed = ex.rng_seed;
    return out;
  }
  return ex;  // every retry left the cube; keep the original
}

std::vector<SynthExample> make_batch(Rng& rng, int n3d, int n2d, int size,
                                     const PoseSampleParams& params) {
  std::vector<SynthExample> batch;
  batch.reserve(n3d + n2d);
  for (int i = 0; i < n3d + n2d; ++i) {
    const uint64_t seed = rng.next_u64();
    batch.push_back(make_example(seed, size, params, i < n3d));
  }
  // Fisher-Yates with the caller's stream keeps the composition exact while
  // decorrelating position from the 3d/2d flag
  for (size_t i = batch.size(); i > 1; --i)
    std::swap(batch[i - 1], batch[rng.uniform_int(i)]);
  return batch;
}

void dump_dataset(const std::string& out_dir, uint64_t seed, int n, int size,
                  int n2d) {
  namespace fs = std::filesystem;
  if (n2d > n) throw InvalidParameter("dump_dataset: n2d > n");
  fs::create_directories(fs::path(out_dir) / "images");

  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["n"] = n;
  manifest["size"] = size;
  manifest["n2d"] = n2d;
  auto entries = nlohmann::json::array();

  std::vector<NamedPose> poses;
  for (int i = 0; i < n; ++i) {
    const uint64_t ex_seed = derive_seed(seed, rng_tag::kExample, i);
    const bool has_3d = i >= n2d;
    const SynthExample ex = make_example(ex_seed, size, {}, has_3d);
    char id[32];
    std::snprintf(id, sizeof(id), "ex%05d", i);
    const size_t plane = static_cast<size_t>(size) * size;
    const char* chan_names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) {
      const std::string img_path = (fs::path(out_dir) / "images" /
                                    (std::string(id) + "_" + chan_names[c] + ".pgm"))
                                       .string();
      write_pgm16(img_path, size, size, ex.image.v.data() + c * plane, 1.0);
    }
    poses.push_back({id, ex.pose_gt});
    nlohmann::json e;
    e["id"] = id;
    e["seed"] = ex_seed;
    e["has_3d"] = has_3d;
    entries.push_back(std::move(e));
  }
  manifest["examples"] = std::move(entries);

  write_pose_file((fs::path(out_dir) / "poses.jsonl").string(), poses);
  std::ofstream f(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!f) throw IoError("dump_dataset: cannot write manifest");
  f << manifest.dump(2) << "\n";
}

}  // namespace margiheat
