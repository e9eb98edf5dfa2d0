#pragma once

// The heatmap prediction model: a strided-conv feature extractor, stacked
// prediction stages with per-plane branches (the zy/xz branches permute the
// channel axis with a spatial axis mid-branch), 1x1 adapters between stages,
// and a binary checkpoint format.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "margiheat/heatmap.hpp"
#include "margiheat/layers.hpp"
#include "margiheat/tensor.hpp"

namespace margiheat {

// A C x H x W activation tensor tagged with the plane its spatial axes span.
struct FeatureMap {
  Tensor t;
  Plane orient = Plane::XY;
};

// Swaps the channel axis with one spatial axis: ZY exchanges channels with
// the horizontal axis, XZ with the vertical axis. Parameter-free, invertible
// (it is its own inverse). Requires the channel count to equal the spatial
// extent being exchanged.
void axis_permute(const Tensor& in, Plane target, Tensor& out);
FeatureMap axis_permute(const FeatureMap& fm, Plane target);

struct ModelConfig {
  int n_stages = 1;
  int n_joints = 17;
  int input_size = 64;
  int heatmap_size = 16;
  int width = 32;  // trunk/branch channel width (even)

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Heatmap triples and derived coordinates for every joint at one stage.
struct StagePrediction {
  int stage_index = 0;
  std::vector<MarginalHeatmapSet> joints;
  std::vector<JointCoords3D> coords;
};

// Activation-memory accounting: scalars held by a marginal head versus a
// volumetric head at equal resolution H (cubic volume, J joints).
size_t marginal_activation_scalars(int n_joints, int hm_size);
size_t volumetric_activation_scalars(int n_joints, int hm_size);
double activation_memory_ratio(int hm_size);  // == 3 / H exactly for 2^k H

class Model;

// One heatmap prediction stage: a shared residual trunk, then three branch
// paths ending in per-joint spatial softmax.
class Stage {
public:
  struct BranchTrace {
    ResidualBlock::Trace rb1;
    Tensor reduced;   // 1x1 conv to heatmap_size channels
    Tensor permuted;  // axis-permuted activations (zy/xz only)
    ResidualBlock::Trace rb2;
    Tensor logits;    // n_joints x hm x hm
    Tensor pmf;       // per-joint softmax of logits
  };
  struct Trace {
    ResidualBlock::Trace trunk1, trunk2;
    std::array<BranchTrace, 3> branch;  // xy, zy, xz
  };

  Stage() = default;
  Stage(ParamStore& store, const std::string& name, const ModelConfig& cfg);

  void init(double* params, Rng& rng) const;
  void forward(const double* params, const Tensor& features, Trace& t) const;
  // d_pmf holds gradients w.r.t. the softmaxed heatmaps (xy, zy, xz).
  // Accumulates into d_features and dg.
  void backward(const double* params, const Tensor& features, const Trace& t,
                const std::array<Tensor, 3>& d_pmf, Tensor* d_features,
                double* dg) const;

private:
  ModelConfig cfg_;
  ResidualBlock trunk1_, trunk2_;
  struct Branch {
    ResidualBlock rb1;
    Conv2d reduce;
    ResidualBlock rb2;
    Conv2d head;
  };
  std::array<Branch, 3> branch_;
};

class Model {
public:
  struct Trace {
    std::vector<Tensor> feat_pre, feat;   // extractor conv outputs pre/post relu
    std::vector<Tensor> stage_input;      // features entering each stage
    std::vector<Stage::Trace> stages;
    std::vector<Tensor> concat_pmf;       // adapter inputs (3J channels)
  };

  Model(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  size_t param_count() const { return store_.size(); }
  double* params() { return store_.data(); }
  const double* params() const { return store_.data(); }
  const std::vector<ParamStore::Entry>& param_entries() const {
    return store_.entries();
  }

  // Forward pass for one image (3 x S x S). Thread-safe for concurrent
  // callers as long as parameters are not being mutated.
  void forward(const Tensor& image, Trace& t) const;
  std::vector<StagePrediction> predictions(const Trace& t) const;
  std::vector<StagePrediction> predict(const Tensor& image) const;

  // Backward from per-stage heatmap gradients. Accumulates into dg, which
  // must have param_count() entries. Callers own one GradStore per example.
  void backward(const Tensor& image, const Trace& t,
                const std::vector<std::array<Tensor, 3>>& d_pmf,
                double* dg) const;

  // Rounds parameters to f32 precision in place (the checkpoint format
  // stores f32, and save/resume must be bit-exact).
  void quantize_params();

private:
  friend struct ModelIo;
  ModelConfig cfg_;
  ParamStore store_;
  std::vector<Conv2d> feat_convs_;
  std::vector<Stage> stages_;
  std::vector<Conv2d> adapters_;
};

// ---- checkpoint io ----

struct Checkpoint {
  ModelConfig config;
  uint32_t iteration = 0;
  std::vector<float> params;
  std::vector<float> velocity;  // empty when the file carries none
};

// Binary format: magic "MHPM1"; little-endian u32 fields (version, n_stages,
// n_joints, input_size, heatmap_size, width, flags, iteration, param_count);
// then param_count f32 parameters in declaration order; then, if flags bit 0
// is set, param_count f32 velocity entries. A JSON sidecar (<path>.json)
// duplicates the config for human inspection.
void save_checkpoint(const std::string& path, Model& model, uint32_t iteration,
                     std::vector<double>* velocity);
Checkpoint read_checkpoint(const std::string& path);
Model model_from_checkpoint(const Checkpoint& ck);

}  // namespace margiheat
