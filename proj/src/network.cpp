#include "margiheat/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace margiheat {

void axis_permute(const Tensor& in, Plane target, Tensor& out) {
  if (target == Plane::ZY) {
    // channels <-> horizontal: out[c][j][i] = in[i][j][c]
    if (in.c != in.w)
      throw ShapeError("axis_permute(ZY): channel count != horizontal extent");
    out.resize(in.w, in.h, in.c);
    for (int c = 0; c < out.c; ++c)
      for (int j = 0; j < out.h; ++j)
        for (int i = 0; i < out.w; ++i) out.at(c, j, i) = in.at(i, j, c);
  } else if (target == Plane::XZ) {
    // channels <-> vertical: out[c][j][i] = in[j][c][i]
    if (in.c != in.h)
      throw ShapeError("axis_permute(XZ): channel count != vertical extent");
    out.resize(in.h, in.c, in.w);
    for (int c = 0; c < out.c; ++c)
      for (int j = 0; j < out.h; ++j)
        for (int i = 0; i < out.w; ++i) out.at(c, j, i) = in.at(j, c, i);
  } else {
    throw InvalidParameter("axis_permute: target must be ZY or XZ");
  }
}

FeatureMap axis_permute(const FeatureMap& fm, Plane target) {
  if (fm.orient != Plane::XY)
    throw ContractViolation("axis_permute: input must be in xy orientation");
  FeatureMap out;
  out.orient = target;
  axis_permute(fm.t, target, out.t);
  return out;
}

void ModelConfig::validate() const {
  if (n_stages < 1) throw InvalidParameter("ModelConfig: n_stages < 1");
  if (n_joints < 1) throw InvalidParameter("ModelConfig: n_joints < 1");
  if (heatmap_size < 2 || heatmap_size > 64)
    throw InvalidParameter("ModelConfig: heatmap_size out of range [2, 64]");
  if (width < 2 || width % 2 != 0)
    throw InvalidParameter("ModelConfig: width must be even and >= 2");
  if (input_size < heatmap_size || (input_size & (input_size - 1)) != 0)
    throw InvalidParameter(
        "ModelConfig: input_size must be a power of two >= heatmap_size");
  int ratio = input_size / heatmap_size;
  if (ratio * heatmap_size != input_size || ratio > 16)
    throw InvalidParameter("ModelConfig: input/heatmap ratio unsupported");
}

size_t marginal_activation_scalars(int n_joints, int hm_size) {
  return 3ull * n_joints * hm_size * hm_size;
}

size_t volumetric_activation_scalars(int n_joints, int hm_size) {
  return static_cast<size_t>(n_joints) * hm_size * hm_size * hm_size;
}

double activation_memory_ratio(int hm_size) {
  return static_cast<double>(marginal_activation_scalars(1, hm_size)) /
         static_cast<double>(volumetric_activation_scalars(1, hm_size));
}

// ---- Stage ----

Stage::Stage(ParamStore& store, const std::string& name, const ModelConfig& cfg)
    : cfg_(cfg) {
  const int w = cfg.width, hm = cfg.heatmap_size, j = cfg.n_joints;
  trunk1_ = ResidualBlock(store, name + ".trunk1", w, w);
  trunk2_ = ResidualBlock(store, name + ".trunk2", w, w);
  const char* bn[3] = {"xy", "zy", "xz"};
  for (int b = 0; b < 3; ++b) {
    const std::string base = name + "." + bn[b];
    branch_[b].rb1 = ResidualBlock(store, base + ".rb1", w, w);
    branch_[b].reduce = Conv2d(store, base + ".reduce", w, hm, 1, 1, 0);
    branch_[b].rb2 = ResidualBlock(store, base + ".rb2", hm, hm);
    branch_[b].head = Conv2d(store, base + ".head", hm, j, 1, 1, 0);
  }
}

void Stage::init(double* params, Rng& rng) const {
  trunk1_.init(params, rng);
  trunk2_.init(params, rng);
  for (const auto& b : branch_) {
    b.rb1.init(params, rng);
    b.reduce.init(params, rng);
    b.rb2.init(params, rng);
    b.head.init(params, rng);
  }
}

namespace {
const Plane kBranchPlane[3] = {Plane::XY, Plane::ZY, Plane::XZ};
}

void Stage::forward(const double* params, const Tensor& features,
                    Trace& t) const {
  if (features.c != cfg_.width || features.h != cfg_.heatmap_size ||
      features.w != cfg_.heatmap_size)
    throw ShapeError("Stage::forward: feature shape mismatch");
  trunk1_.forward(params, features, t.trunk1);
  trunk2_.forward(params, t.trunk1.y, t.trunk2);
  for (int b = 0; b < 3; ++b) {
    auto& br = t.branch[b];
    const auto& lb = branch_[b];
    lb.rb1.forward(params, t.trunk2.y, br.rb1);
    lb.reduce.forward(params, br.rb1.y, br.reduced);
    const Tensor* rb2_in = &br.reduced;
    if (kBranchPlane[b] != Plane::XY) {
      axis_permute(br.reduced, kBranchPlane[b], br.permuted);
      rb2_in = &br.permuted;
    }
    lb.rb2.forward(params, *rb2_in, br.rb2);
    lb.head.forward(params, br.rb2.y, br.logits);
    br.pmf = br.logits;
    const size_t grid = static_cast<size_t>(br.pmf.h) * br.pmf.w;
    for (int jn = 0; jn < cfg_.n_joints; ++jn)
      softmax_inplace(br.pmf.chan(jn), grid);
  }
}

void Stage::backward(const double* params, const Tensor& features,
                     const Trace& t, const std::array<Tensor, 3>& d_pmf,
                     Tensor* d_features, double* dg) const {
  Tensor d_trunk_out(t.trunk2.y.c, t.trunk2.y.h, t.trunk2.y.w);
  for (int b = 0; b < 3; ++b) {
    const auto& br = t.branch[b];
    const auto& lb = branch_[b];
    // softmax jacobian per joint: d_logits from d_pmf
    Tensor d_logits(br.logits.c, br.logits.h, br.logits.w);
    const size_t grid = static_cast<size_t>(br.logits.h) * br.logits.w;
    for (int jn = 0; jn < cfg_.n_joints; ++jn)
      softmax_backward(br.pmf.chan(jn), d_pmf[b].chan(jn), d_logits.chan(jn),
                       grid);
    Tensor d_rb2y(br.rb2.y.c, br.rb2.y.h, br.rb2.y.w);
    const Tensor* rb2_in =
        kBranchPlane[b] == Plane::XY ? &br.reduced : &br.permuted;
    lb.head.backward(params, br.rb2.y, d_logits, &d_rb2y, dg);
    Tensor d_rb2_in(rb2_in->c, rb2_in->h, rb2_in->w);
    lb.rb2.backward(params, *rb2_in, br.rb2, d_rb2y, &d_rb2_in, dg);
    Tensor d_reduced_owned;
    const Tensor* d_reduced = &d_rb2_in;
    if (kBranchPlane[b] != Plane::XY) {
      // the permutation is involutive, so its gradient is itself
      axis_permute(d_rb2_in, kBranchPlane[b], d_reduced_owned);
      d_reduced = &d_reduced_owned;
    }
    Tensor d_rb1y(br.rb1.y.c, br.rb1.y.h, br.rb1.y.w);
    lb.reduce.backward(params, br.rb1.y, *d_reduced, &d_rb1y, dg);
    lb.rb1.backward(params, t.trunk2.y, br.rb1, d_rb1y, &d_trunk_out, dg);
  }
  Tensor d_trunk1(t.trunk1.y.c, t.trunk1.y.h, t.trunk1.y.w);
  trunk2_.backward(params, t.trunk1.y, t.trunk2, d_trunk_out, &d_trunk1, dg);
  trunk1_.backward(params, features, t.trunk1, d_trunk1, d_features, dg);
}

// ---- Model ----

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  // feature extractor: four conv+relu blocks; the leading blocks use
  // stride 2 until the spatial size reaches the heatmap resolution
  int n_stride2 = 0;
  for (int s = cfg_.input_size; s > cfg_.heatmap_size; s /= 2) ++n_stride2;
  if (n_stride2 > 4)
    throw InvalidParameter("Model: input/heatmap ratio needs more than 4 blocks");
  const int chans[5] = {3, cfg_.width / 2, cfg_.width, cfg_.width, cfg_.width};
  for (int i = 0; i < 4; ++i) {
    const int stride = i < n_stride2 ? 2 : 1;
    feat_convs_.emplace_back(store_, "feat.conv" + std::to_string(i + 1),
                             chans[i], chans[i + 1], 3, stride, 1);
  }
  for (int s = 0; s < cfg_.n_stages; ++s)
    stages_.emplace_back(store_, "stage" + std::to_string(s + 1), cfg_);
  for (int s = 0; s + 1 < cfg_.n_stages; ++s)
    adapters_.emplace_back(store_, "adapter" + std::to_string(s + 1),
                           3 * cfg_.n_joints, cfg_.width, 1, 1, 0);
  store_.finalize();

  Rng rng(derive_seed(seed, rng_tag::kInit, 0));
  for (const auto& c : feat_convs_) c.init(store_.data(), rng);
  for (const auto& s : stages_) s.init(store_.data(), rng);
  for (const auto& a : adapters_) a.init(store_.data(), rng);
}

void Model::forward(const Tensor& image, Trace& t) const {
  if (image.c != 3 || image.h != cfg_.input_size || image.w != cfg_.input_size)
    throw ShapeError("Model::forward: image must be 3 x S x S per config");
  const double* p = store_.data();

  t.feat_pre.resize(feat_convs_.size());
  t.feat.resize(feat_convs_.size());
  const Tensor* cur = &image;
  for (size_t i = 0; i < feat_convs_.size(); ++i) {
    feat_convs_[i].forward(p, *cur, t.feat_pre[i]);
    relu_forward(t.feat_pre[i], t.feat[i]);
    cur = &t.feat[i];
  }

  t.stage_input.resize(stages_.size());
  t.stages.resize(stages_.size());
  t.concat_pmf.assign(adapters_.size(), Tensor());
  t.stage_input[0] = *cur;
  for (size_t s = 0; s < stages_.size(); ++s) {
    stages_[s].forward(p, t.stage_input[s], t.stages[s]);
    if (s + 1 < stages_.size()) {
      // next input = this input + adapter(concat of predicted heatmaps)
      Tensor& cat = t.concat_pmf[s];
      const int hm = cfg_.heatmap_size, j = cfg_.n_joints;
      cat.resize(3 * j, hm, hm);
      for (int b = 0; b < 3; ++b)
        std::memcpy(cat.chan(b * j), t.stages[s].branch[b].pmf.data(),
                    sizeof(double) * static_cast<size_t>(j) * hm * hm);
      Tensor adapted;
      adapters_[s].forward(p, cat, adapted);
      Tensor& next = t.stage_input[s + 1];
      next.resize(adapted.c, adapted.h, adapted.w);
      kernels::active().add(t.stage_input[s].data(), adapted.data(),
                            next.data(), next.size());
    }
  }
}

std::vector<StagePrediction> Model::predictions(const Trace& t) const {
  std::vector<StagePrediction> out(stages_.size());
  const int hm = cfg_.heatmap_size, j = cfg_.n_joints;
  const size_t grid = static_cast<size_t>(hm) * hm;
  for (size_t s = 0; s < stages_.size(); ++s) {
    auto& sp = out[s];
    sp.stage_index = static_cast<int>(s);
    sp.joints.resize(j);
    sp.coords.resize(j);
    for (int jn = 0; jn < j; ++jn) {
      auto& set = sp.joints[jn];
      set.xy = Heatmap2D(hm, hm, Plane::XY);
      set.zy = Heatmap2D(hm, hm, Plane::ZY);
      set.xz = Heatmap2D(hm, hm, Plane::XZ);
      std::memcpy(set.xy.v.data(), t.stages[s].branch[0].pmf.chan(jn),
                  sizeof(double) * grid);
      std::memcpy(set.zy.v.data(), t.stages[s].branch[1].pmf.chan(jn),
                  sizeof(double) * grid);
      std::memcpy(set.xz.v.data(), t.stages[s].branch[2].pmf.chan(jn),
                  sizeof(double) * grid);
      sp.coords[jn] = marginal_coords(set);
    }
  }
  return out;
}

std::vector<StagePrediction> Model::predict(const Tensor& image) const {
  Trace t;
  forward(image, t);
  return predictions(t);
}

void Model::backward(const Tensor& image, const Trace& t,
                     const std::vector<std::array<Tensor, 3>>& d_pmf,
                     double* dg) const {
  if (d_pmf.size() != stages_.size())
    throw ShapeError("Model::backward: one heatmap gradient set per stage");
  const double* p = store_.data();
  const int hm = cfg_.heatmap_size, j = cfg_.n_joints;
  const size_t grid = static_cast<size_t>(hm) * hm;

  // Gradients w.r.t. each stage's input features.
  std::vector<Tensor> d_input(stages_.size());
  for (size_t s = 0; s < stages_.size(); ++s)
    d_input[s].resize(cfg_.width, hm, hm);

  for (size_t si = stages_.size(); si-- > 0;) {
    std::array<Tensor, 3> d_hm;
    for (int b = 0; b < 3; ++b) d_hm[b] = d_pmf[si][b];
    if (si + 1 < stages_.size()) {
      // the next stage's input consumed this stage's pmfs via the adapter
      // and this stage's input via the skip connection
      Tensor d_cat(3 * j, hm, hm);
      adapters_[si].backward(p, t.concat_pmf[si], d_input[si + 1], &d_cat, dg);
      for (int b = 0; b < 3; ++b)
        kernels::active().axpy(1.0, d_cat.chan(b * j), d_hm[b].data(),
                               grid * static_cast<size_t>(j));
      kernels::active().axpy(1.0, d_input[si + 1].data(), d_input[si].data(),
                             d_input[si].size());
    }
    stages_[si].backward(p, t.stage_input[si], t.stages[si], d_hm,
                         &d_input[si], dg);
  }

  // feature extractor
  Tensor d_cur = d_input[0];
  for (size_t i = feat_convs_.size(); i-- > 0;) {
    Tensor d_pre;
    relu_backward(t.feat_pre[i], d_cur, d_pre);
    const Tensor& x = i == 0 ? image : t.feat[i - 1];
    if (i == 0) {
      feat_convs_[i].backward(p, x, d_pre, nullptr, dg);
    } else {
      Tensor d_next(x.c, x.h, x.w);
      feat_convs_[i].backward(p, x, d_pre, &d_next, dg);
      d_cur = std::move(d_next);
    }
  }
}

void Model::quantize_params() {
  double* p = store_.data();
  for (size_t i = 0; i < store_.size(); ++i)
    p[i] = static_cast<double>(static_cast<float>(p[i]));
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[5] = {'M', 'H', 'P', 'M', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kFlagVelocity = 1u;

void put_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32s(std::ofstream& f, const std::vector<float>& v) {
  for (float x : v) {
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    put_u32(f, bits);
  }
}

std::vector<float> get_f32s(std::ifstream& f, size_t n) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = get_u32(f);
    std::memcpy(&v[i], &bits, 4);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, uint32_t iteration,
                     std::vector<double>* velocity) {
  // Round the live state to f32 first so that what the file holds and what
  // training continues from are the same numbers.
  model.quantize_params();
  std::vector<float> pf(model.param_count());
  for (size_t i = 0; i < pf.size(); ++i)
    pf[i] = static_cast<float>(model.params()[i]);

  std::vector<float> vf;
  if (velocity) {
    if (velocity->size() != model.param_count())
      throw ShapeError("save_checkpoint: velocity size mismatch");
    vf.resize(velocity->size());
    for (size_t i = 0; i < vf.size(); ++i) {
      (*velocity)[i] = static_cast<double>(static_cast<float>((*velocity)[i]));
      vf[i] = static_cast<float>((*velocity)[i]);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(kMagic, 5);
  const auto& cfg = model.config();
  put_u32(f, kVersion);
  put_u32(f, static_cast<uint32_t>(cfg.n_stages));
  put_u32(f, static_cast<uint32_t>(cfg.n_joints));
  put_u32(f, static_cast<uint32_t>(cfg.input_size));
  put_u32(f, static_cast<uint32_t>(cfg.heatmap_size));
  put_u32(f, static_cast<uint32_t>(cfg.width));
  put_u32(f, velocity ? kFlagVelocity : 0u);
  put_u32(f, iteration);
  put_u32(f, static_cast<uint32_t>(pf.size()));
  put_f32s(f, pf);
  if (velocity) put_f32s(f, vf);
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
  f.close();

  std::ofstream j(path + ".json", std::ios::trunc);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"format\":\"MHPM1\",\"version\":%u,\"n_stages\":%d,"
                "\"n_joints\":%d,\"input_size\":%d,\"heatmap_size\":%d,"
                "\"width\":%d,\"iteration\":%u,\"param_count\":%zu,"
                "\"has_velocity\":%s}\n",
                kVersion, cfg.n_stages, cfg.n_joints, cfg.input_size,
                cfg.heatmap_size, cfg.width, iteration, pf.size(),
                velocity ? "true" : "false");
  j << buf;
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_checkpoint: cannot open " + path);
  char magic[5];
  f.read(magic, 5);
  if (!f || std::memcmp(magic, kMagic, 5) != 0)
    throw IoError("read_checkpoint: bad magic in " + path);
  const uint32_t version = get_u32(f);
  if (version != kVersion)
    throw IoError("read_checkpoint: unsupported version");
  Checkpoint ck;
  ck.config.n_stages = static_cast<int>(get_u32(f));
  ck.config.n_joints = static_cast<int>(get_u32(f));
  ck.config.input_size = static_cast<int>(get_u32(f));
  ck.config.heatmap_size = static_cast<int>(get_u32(f));
  ck.config.width = static_cast<int>(get_u32(f));
  const uint32_t flags = get_u32(f);
  ck.iteration = get_u32(f);
  const uint32_t count = get_u32(f);
  if (!f) throw IoError("read_checkpoint: truncated header");
  ck.params = get_f32s(f, count);
  if (flags & kFlagVelocity) ck.velocity = get_f32s(f, count);
  if (!f) throw IoError("read_checkpoint: truncated payload");
  return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
  Model m(ck.config, 0);
  if (ck.params.size() != m.param_count())
    throw IoError("model_from_checkpoint: parameter count mismatch");
  for (size_t i = 0; i < ck.params.size(); ++i)
    m.params()[i] = static_cast<double>(ck.params[i]);
  return m;
}

}  // namespace margiheat
