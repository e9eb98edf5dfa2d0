#pragma once

#include <cstddef>
#include <vector>

#include "margiheat/errors.hpp"

namespace margiheat {

// Dense C x H x W array of doubles, row-major within a channel.
// Rank-2 data uses c == 1. Deliberately minimal: the heavy lifting lives in
// the kernel layer, this is just owned storage plus indexing.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_) {
    v.assign(static_cast<size_t>(c_) * h_ * w_, 0.0);
  }

  size_t size() const { return v.size(); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  double& at(int ci, int y, int x) {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }
  double at(int ci, int y, int x) const {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }

  // channel base pointer
  double* chan(int ci) { return v.data() + static_cast<size_t>(ci) * h * w; }
  const double* chan(int ci) const {
    return v.data() + static_cast<size_t>(ci) * h * w;
  }

  bool same_shape(const Tensor& o) const {
    return c == o.c && h == o.h && w == o.w;
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  void resize(int c_, int h_, int w_) {
    c = c_;
    h = h_;
    w = w_;
    v.assign(static_cast<size_t>(c_) * h_ * w_, 0.0);
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* where) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(where) + ": shape mismatch");
}

}  // namespace margiheat
