#pragma once

// Differentiable building blocks: 2D convolution, ReLU, and residual blocks
// with projection shortcuts. Parameters live in one flat buffer owned by the
// model (see ParamStore); layers hold offsets into it so the optimizer,
// checkpoints and gradient checks all see a single contiguous vector.
//
// Layers are stateless with respect to activations: forward writes into
// caller-owned tensors and backward consumes them, so one parameter set can
// serve any number of concurrent examples.

#include <cstdint>
#include <string>
#include <vector>

#include "margiheat/kernels.hpp"
#include "margiheat/rng.hpp"
#include "margiheat/tensor.hpp"

namespace margiheat {

// Flat parameter storage plus the layout metadata needed for checkpoints.
class ParamStore {
public:
  struct Entry {
    std::string name;
    size_t offset;
    size_t count;
  };

  // Reserves `count` doubles under `name`, returning the offset.
  size_t reserve(const std::string& name, size_t count) {
    const size_t off = total_;
    entries_.push_back({name, off, count});
    total_ += count;
    return off;
  }

  // Allocates the backing buffer once all layers have reserved their slots.
  void finalize() { data_.assign(total_, 0.0); }

  size_t size() const { return total_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<Entry>& entries() const { return entries_; }

private:
  std::vector<Entry> entries_;
  size_t total_ = 0;
  std::vector<double> data_;
};

// Gradient buffer matching a ParamStore's layout.
struct GradStore {
  std::vector<double> g;
  explicit GradStore(size_t n) : g(n, 0.0) {}
  void zero() { std::fill(g.begin(), g.end(), 0.0); }
  double* data() { return g.data(); }
};

class Conv2d {
public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int cin, int cout, int k,
         int stride, int pad);

  void init(double* params, Rng& rng) const;  // Kaiming fan-in, zero bias

  void forward(const double* params, const Tensor& x, Tensor& y) const;
  // Accumulates into dx (if non-null) and into the weight/bias slots of dg.
  void backward(const double* params, const Tensor& x, const Tensor& dy,
                Tensor* dx, double* dg) const;

  int cin() const { return cin_; }
  int cout() const { return cout_; }
  size_t param_count() const { return wcount_ + cout_; }

private:
  kernels::ConvShape shape_for(const Tensor& x) const;

  int cin_ = 0, cout_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  size_t woff_ = 0, boff_ = 0, wcount_ = 0;
};

// y = relu(conv2(relu(conv1(x))) + proj(x)); all-projection shortcuts.
class ResidualBlock {
public:
  struct Trace {
    Tensor h1_pre, h1, h2, s, y_pre, y;
  };

  ResidualBlock() = default;
  ResidualBlock(ParamStore& store, const std::string& name, int cin, int cout);

  void init(double* params, Rng& rng) const;
  void forward(const double* params, const Tensor& x, Trace& t) const;
  void backward(const double* params, const Tensor& x, const Trace& t,
                const Tensor& dy, Tensor* dx, double* dg) const;

  size_t param_count() const {
    return conv1_.param_count() + conv2_.param_count() + proj_.param_count();
  }

private:
  Conv2d conv1_, conv2_, proj_;
};

void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& x_pre, const Tensor& dy, Tensor& dx);

}  // namespace margiheat
