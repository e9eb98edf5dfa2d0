#pragma once

// Synthetic training data: parametric stick-figure poses rendered as
// anti-aliased capsules under a perspective camera. Nearer limbs draw
// thicker and brighter, so depth is recoverable from monocular cues.
// Everything is a pure function of its seed.

#include <cstdint>
#include <string>
#include <vector>

#include "margiheat/rng.hpp"
#include "margiheat/skeleton.hpp"
#include "margiheat/tensor.hpp"

namespace margiheat {

struct SynthExample {
  Tensor image;     // 3 x S x S, values in [0, 1]
  Pose3D pose_gt;   // normalized cube; for has_3d == false the z values are
                    // present but treated as withheld by consumers
  bool has_3d = true;
  uint64_t rng_seed = 0;
};

// ---- pose sampling ----

struct PoseSampleParams {
  double max_perturb_rad = 0.35;  // per-bone rotation bound
  double scale_lo = 0.9, scale_hi = 1.1;
  bool randomize_root = true;
  double cube_margin = 0.05;  // keep joints within +-(1 - margin)
};

int n_library_poses();
// The unperturbed keyframe (stand, sit, reach, walk), pelvis at its default
// root position, guaranteed inside the cube.
Pose3D library_pose(int index);

// Keyframe pick + bounded per-bone rotations + global scale + root placement.
// Bone length ratios are those of the canonical rig for every sample.
Pose3D sample_pose(Rng& rng, const PoseSampleParams& params = {});

// ---- rendering ----

constexpr double kCameraZ = -4.0;  // cube units
constexpr double kFocal = 2.0;

// Perspective projection to pixel coordinates; returns (px, py, depth) with
// depth measured from the camera plane.
std::array<double, 3> project_point(double x, double y, double z, int size);

struct RenderResult {
  Tensor image;                // 3 x S x S
  std::vector<int> top_bone;   // per pixel: bone index whose core covers it
                               // topmost, or -1
  std::vector<double> bone_depth;  // per bone: camera distance at midpoint
};

RenderResult render_pose(const Pose3D& pose, int size);

SynthExample render_example(const Pose3D& pose, int size, uint64_t seed,
                            bool has_3d = true);

// sample + render in one step
SynthExample make_example(uint64_t seed, int size,
                          const PoseSampleParams& params = {},
                          bool has_3d = true);

// Mean rendered intensity of each visible limb paired with its camera
// distance; used to verify that the depth cue is informative.
struct LimbCue {
  int bone = 0;
  double mean_intensity = 0.0;
  double camera_distance = 0.0;
};
std::vector<LimbCue> measure_limb_cues(const Pose3D& pose, int size);

// ---- augmentation ----

struct AugmentParams {
  double scale_lo = 0.7, scale_hi = 1.3;
  double max_translate_px = 8.0;
  double max_rotate_deg = 30.0;
  double gain_lo = 0.8, gain_hi = 1.2;
  double flip_prob = 0.5;
  int max_retries = 20;
};

// Applies flip / in-plane rotation / scale / translation / color gain. The
// geometric transform acts on the pose (rotation and scale on cube x,y;
// translation as a per-joint depth-compensated shift so every projected
// joint moves by exactly the same pixel offset), and the image is re-rendered
// from the transformed pose. Transforms pushing joints outside the cube are
// resampled up to max_retries; after that the example is returned unchanged.
SynthExample augment(const SynthExample& ex, Rng& rng,
                     const AugmentParams& params = {});

// n3d examples flagged 3D plus n2d flagged 2D, deterministically shuffled.
std::vector<SynthExample> make_batch(Rng& rng, int n3d, int n2d, int size,
                                     const PoseSampleParams& params = {});

// ---- dataset dump ----

// Writes images/{id}_{r,g,b}.pgm, poses.jsonl and manifest.json (seeds and
// flags sufficient to regenerate the set exactly).
void dump_dataset(const std::string& out_dir, uint64_t seed, int n, int size,
                  int n2d = 0);

}  // namespace margiheat
