// Synthetic data generation: determinism, cube containment, bone-ratio
// stability, projection against an independent pinhole formula, depth-cue
// informativeness, and the augmentation consistency oracle.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "margiheat/data_synth.hpp"
#include "margiheat/pgm.hpp"
#include "margiheat/rng.hpp"

using namespace margiheat;
using namespace margiheat::joints;

namespace {

double dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) +
                   (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

// independent pinhole projection: camera at z = -4, focal 2, pixel mapping
// [-1, 1] -> [0, size-1]
std::array<double, 2> oracle_project(const std::array<double, 3>& p, int size) {
  const double d = p[2] + 4.0;
  return {(2.0 * p[0] / d + 1.0) * 0.5 * (size - 1),
          (2.0 * p[1] / d + 1.0) * 0.5 * (size - 1)};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("zero perturbation reproduces the library keyframe") {
  for (int trial = 0; trial < 8; ++trial) {
    Rng rng(trial * 31 + 7);
    Rng probe = rng;  // same stream: the first draw picks the library index
    const int index = static_cast<int>(probe.uniform_int(n_library_poses()));
    PoseSampleParams p;
    p.max_perturb_rad = 0.0;
    p.scale_lo = p.scale_hi = 1.0;
    p.randomize_root = false;
    const Pose3D sampled = sample_pose(rng, p);
    const Pose3D lib = library_pose(index);
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a)
        CHECK(sampled[j][a] == doctest::Approx(lib[j][a]).epsilon(1e-12));
  }
}

TEST_CASE("fixed seed reproduces the pose and image bit-for-bit") {
  const auto a = make_example(12345, 64);
  const auto b = make_example(12345, 64);
  CHECK(a.image.v == b.image.v);
  for (int j = 0; j < kNumJoints; ++j)
    for (int ax = 0; ax < 3; ++ax) CHECK(a.pose_gt[j][ax] == b.pose_gt[j][ax]);
  CHECK(a.rng_seed == 12345);
}

TEST_CASE("sampled poses stay in the cube with constant bone ratios") {
  // reference ratios from the unperturbed rig
  const Pose3D ref = library_pose(0);
  const auto& sk = CanonicalSkeleton::get();
  const double ref_l_arm = dist(ref[kLElbow], ref[kLShoulder]);
  const double ref_thigh = dist(ref[kLKnee], ref[kLHip]);
  const double ref_ratio = ref_l_arm / ref_thigh;

  Rng rng(99);
  double max_ratio_err = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Pose3D p = sample_pose(rng);
    for (const auto& j : p.joints)
      for (int a = 0; a < 3; ++a) {
        CHECK(j[a] >= -1.0);
        CHECK(j[a] <= 1.0);
      }
    const double ratio =
        dist(p[kLElbow], p[kLShoulder]) / dist(p[kLKnee], p[kLHip]);
    max_ratio_err = std::max(max_ratio_err, std::abs(ratio - ref_ratio));
    (void)sk;
  }
  CHECK(max_ratio_err < 1e-9);
}

TEST_CASE("projected joint centers match the pinhole oracle") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const Pose3D p = sample_pose(rng);
    for (int j = 0; j < kNumJoints; ++j) {
      const auto got = project_point(p[j][0], p[j][1], p[j][2], 64);
      const auto want = oracle_project(p[j], 64);
      CHECK(std::abs(got[0] - want[0]) < 0.5);
      CHECK(std::abs(got[1] - want[1]) < 0.5);
    }
  }
}

TEST_CASE("nearer limbs render thicker and brighter") {
  // two standing poses, one nearer the camera
  PoseSampleParams p;
  p.max_perturb_rad = 0.0;
  p.scale_lo = p.scale_hi = 1.0;
  p.randomize_root = false;
  Pose3D near_pose = library_pose(0);
  Pose3D far_pose = near_pose;
  for (auto& j : near_pose.joints) j[2] -= 0.6;
  for (auto& j : far_pose.joints) j[2] += 0.6;

  const auto near_cues = measure_limb_cues(near_pose, 64);
  const auto far_cues = measure_limb_cues(far_pose, 64);
  REQUIRE(!near_cues.empty());
  REQUIRE(!far_cues.empty());
  double near_mean = 0, far_mean = 0;
  for (const auto& c : near_cues) near_mean += c.mean_intensity / near_cues.size();
  for (const auto& c : far_cues) far_mean += c.mean_intensity / far_cues.size();
  CHECK(near_mean > far_mean * 1.15);

  // the same limb covers more pixels when closer
  const auto count_lit = [](const Pose3D& pose) {
    const auto r = render_pose(pose, 64);
    int lit = 0;
    for (int v : r.top_bone) lit += v >= 0 ? 1 : 0;
    return lit;
  };
  CHECK(count_lit(near_pose) > count_lit(far_pose));
}

TEST_CASE("depth cue correlation over sampled examples") {
  Rng rng(2024);
  std::vector<double> intensity, distance;
  for (int t = 0; t < 1000; ++t) {
    const Pose3D p = sample_pose(rng);
    for (const auto& cue : measure_limb_cues(p, 64)) {
      intensity.push_back(cue.mean_intensity);
      distance.push_back(cue.camera_distance);
    }
  }
  REQUIRE(intensity.size() > 5000);
  const double rho = pearson(intensity, distance);
  MESSAGE("limb intensity vs distance correlation: ", rho);
  CHECK(rho < -0.5);
}

TEST_CASE("augmentation") {
  Rng seed_rng(7);
  const SynthExample ex = make_example(777, 64);

  SUBCASE("identity parameters leave the example unchanged") {
    AugmentParams id;
    id.scale_lo = id.scale_hi = 1.0;
    id.max_translate_px = 0.0;
    id.max_rotate_deg = 0.0;
    id.gain_lo = id.gain_hi = 1.0;
    id.flip_prob = 0.0;
    Rng rng(1);
    const auto out = augment(ex, rng, id);
    CHECK(out.image.v == ex.image.v);
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a)
        CHECK(out.pose_gt[j][a] == doctest::Approx(ex.pose_gt[j][a]).epsilon(1e-12));
  }

  SUBCASE("flip-only mirrors the pose and the image landmarks") {
    AugmentParams fl;
    fl.scale_lo = fl.scale_hi = 1.0;
    fl.max_translate_px = 0.0;
    fl.max_rotate_deg = 0.0;
    fl.gain_lo = fl.gain_hi = 1.0;
    fl.flip_prob = 1.0;
    Rng rng(1);
    const auto out = augment(ex, rng, fl);
    const Pose3D expect = flip_pose(ex.pose_gt);
    for (int j = 0; j < kNumJoints; ++j)
      for (int a = 0; a < 3; ++a)
        CHECK(out.pose_gt[j][a] == doctest::Approx(expect[j][a]).epsilon(1e-12));
  }

  SUBCASE("random transforms keep projections consistent to 0.5 px") {
    const auto& sk = CanonicalSkeleton::get();
    for (int t = 0; t < 50; ++t) {
      // replicate the transform draw to build the image-space oracle
      Rng rng(derive_seed(7, 42, t));
      Rng probe = rng;
      AugmentParams ap;
      const bool flip = probe.bernoulli(ap.flip_prob);
      const double angle =
          probe.uniform(-ap.max_rotate_deg, ap.max_rotate_deg) * M_PI / 180.0;
      const double scale = probe.uniform(ap.scale_lo, ap.scale_hi);
      const double tx = probe.uniform(-ap.max_translate_px, ap.max_translate_px);
      const double ty = probe.uniform(-ap.max_translate_px, ap.max_translate_px);

      const auto out = augment(ex, rng, ap);
      // if augment retried (rare), the probe parameters are stale; detect by
      // checking whether the first attempt produced out directly
      bool first_attempt = true;
      {
        Pose3D p = flip ? flip_pose(ex.pose_gt) : ex.pose_gt;
        const double c = std::cos(angle), s = std::sin(angle);
        for (auto& j : p.joints) {
          const double x = j[0], y = j[1];
          j[0] = scale * (c * x - s * y);
          j[1] = scale * (s * x + c * y);
          const double depth = j[2] + 4.0;
          j[0] += tx * (2.0 / 63.0) * depth / 2.0;
          j[1] += ty * (2.0 / 63.0) * depth / 2.0;
        }
        for (const auto& j : p.joints)
          for (int a = 0; a < 3; ++a)
            if (std::abs(j[a]) > 1.0) first_attempt = false;
      }
      if (!first_attempt) continue;

      // image-space oracle: flip about the center, rotate, scale, translate
      const double ctr = 63.0 / 2.0;
      const double c = std::cos(angle), s = std::sin(angle);
      for (int j = 0; j < kNumJoints; ++j) {
        const int src = flip ? sk.mirror[j] : j;
        auto px = oracle_project(ex.pose_gt[src], 64);
        if (flip) px[0] = 2 * ctr - px[0];
        const double rx = px[0] - ctr, ry = px[1] - ctr;
        const double ex_px = ctr + scale * (c * rx - s * ry) + tx;
        const double ex_py = ctr + scale * (s * rx + c * ry) + ty;
        const auto got = oracle_project(out.pose_gt[j], 64);
        CHECK(std::abs(got[0] - ex_px) < 0.5);
        CHECK(std::abs(got[1] - ex_py) < 0.5);
      }
    }
  }

  SUBCASE("augmented joints never leave the cube") {
    Rng rng(31);
    for (int t = 0; t < 200; ++t) {
      const auto out = augment(ex, rng);
      for (const auto& j : out.pose_gt.joints)
        for (int a = 0; a < 3; ++a) {
          CHECK(j[a] >= -1.0);
          CHECK(j[a] <= 1.0);
        }
    }
  }
}

TEST_CASE("batches carry exact 3d/2d composition") {
  Rng rng(11);
  const auto batch = make_batch(rng, 16, 16, 32);
  CHECK(batch.size() == 32);
  int n3d = 0;
  for (const auto& ex : batch) n3d += ex.has_3d ? 1 : 0;
  CHECK(n3d == 16);

  Rng rng2(12);
  const auto single = make_batch(rng2, 1, 0, 32);
  CHECK(single.size() == 1);
  CHECK(single[0].has_3d);

  // exact counts across many seeds
  for (int t = 0; t < 100; ++t) {
    Rng r(t);
    const auto b = make_batch(r, 3, 5, 16);
    int c3 = 0;
    for (const auto& ex : b) c3 += ex.has_3d ? 1 : 0;
    CHECK(c3 == 3);
    CHECK(b.size() == 8);
  }
}

TEST_CASE("dataset dump is regenerable and self-consistent") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "margiheat_ds_test";
  fs::remove_all(dir);
  dump_dataset(dir.string(), 4242, 10, 32, 3);

  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "poses.jsonl"));
  int n_images = 0;
  for (const auto& e : fs::directory_iterator(dir / "images")) {
    ++n_images;
    (void)e;
  }
  CHECK(n_images == 30);  // r/g/b per example

  const auto poses = read_pose_file((dir / "poses.jsonl").string());
  REQUIRE(poses.size() == 10);
  for (const auto& np : poses)
    for (const auto& j : np.pose.joints)
      for (int a = 0; a < 3; ++a) CHECK(std::abs(j[a]) <= 1.0);

  // regenerating from the manifest seeds reproduces the poses exactly
  std::ifstream mf(dir / "manifest.json");
  std::string text((std::istreambuf_iterator<char>(mf)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"seed\": 4242") != std::string::npos);
  const uint64_t seed0 = derive_seed(4242, rng_tag::kExample, 0);
  const auto ex0 = make_example(seed0, 32, {}, false);
  for (int a = 0; a < 3; ++a)
    CHECK(ex0.pose_gt[0][a] == doctest::Approx(poses[0].pose[0][a]).epsilon(1e-12));

  // image channel round-trips through the 16-bit pgm within quantization
  const auto img = read_pgm((dir / "images" / "ex00000_r.pgm").string());
  CHECK(img.w == 32);
  CHECK(img.h == 32);
  double worst = 0;
  for (int i = 0; i < 32 * 32; ++i)
    worst = std::max(worst, std::abs(img.v[i] - ex0.image.v[i]));
  CHECK(worst < 1.0 / 65535.0);
  fs::remove_all(dir);
}
