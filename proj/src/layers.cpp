#include "margiheat/layers.hpp"

#include <cmath>

#include "margiheat/errors.hpp"

namespace margiheat {

Conv2d::Conv2d(ParamStore& store, const std::string& name, int cin, int cout,
               int k, int stride, int pad)
    : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
  wcount_ = static_cast<size_t>(cout) * cin * k * k;
  woff_ = store.reserve(name + ".weight", wcount_);
  boff_ = store.reserve(name + ".bias", cout);
}

void Conv2d::init(double* params, Rng& rng) const {
  const double fan_in = static_cast<double>(cin_) * k_ * k_;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (size_t i = 0; i < wcount_; ++i) params[woff_ + i] = rng.normal(0.0, stddev);
  for (int i = 0; i < cout_; ++i) params[boff_ + i] = 0.0;
}

kernels::ConvShape Conv2d::shape_for(const Tensor& x) const {
  if (x.c != cin_) throw ShapeError("Conv2d: channel count mismatch");
  return kernels::ConvShape{cin_, x.h, x.w, cout_, k_, stride_, pad_};
}

void Conv2d::forward(const double* params, const Tensor& x, Tensor& y) const {
  const auto s = shape_for(x);
  y.resize(cout_, s.hout(), s.wout());
  kernels::active().conv2d_forward(s, x.data(), params + woff_, params + boff_,
                                   y.data());
}

void Conv2d::backward(const double* params, const Tensor& x, const Tensor& dy,
                      Tensor* dx, double* dg) const {
  const auto s = shape_for(x);
  if (dy.c != cout_ || dy.h != s.hout() || dy.w != s.wout())
    throw ShapeError("Conv2d: upstream gradient shape mismatch");
  const auto& ops = kernels::active();
  if (dx) {
    if (!dx->same_shape(x)) dx->resize(x.c, x.h, x.w);
    ops.conv2d_backward_data(s, dy.data(), params + woff_, dx->data());
  }
  ops.conv2d_backward_weights(s, x.data(), dy.data(), dg + woff_, dg + boff_);
}

ResidualBlock::ResidualBlock(ParamStore& store, const std::string& name,
                             int cin, int cout)
    : conv1_(store, name + ".conv1", cin, cout, 3, 1, 1),
      conv2_(store, name + ".conv2", cout, cout, 3, 1, 1),
      proj_(store, name + ".proj", cin, cout, 1, 1, 0) {}

void ResidualBlock::init(double* params, Rng& rng) const {
  conv1_.init(params, rng);
  conv2_.init(params, rng);
  proj_.init(params, rng);
}

void ResidualBlock::forward(const double* params, const Tensor& x,
                            Trace& t) const {
  conv1_.forward(params, x, t.h1_pre);
  relu_forward(t.h1_pre, t.h1);
  conv2_.forward(params, t.h1, t.h2);
  proj_.forward(params, x, t.s);
  t.y_pre.resize(t.h2.c, t.h2.h, t.h2.w);
  kernels::active().add(t.h2.data(), t.s.data(), t.y_pre.data(), t.y_pre.size());
  relu_forward(t.y_pre, t.y);
}

void ResidualBlock::backward(const double* params, const Tensor& x,
                             const Trace& t, const Tensor& dy, Tensor* dx,
                             double* dg) const {
  Tensor d_pre;
  relu_backward(t.y_pre, dy, d_pre);
  // d_pre feeds both the conv path and the shortcut
  Tensor dh1(t.h1.c, t.h1.h, t.h1.w);
  conv2_.backward(params, t.h1, d_pre, &dh1, dg);
  Tensor dh1_pre;
  relu_backward(t.h1_pre, dh1, dh1_pre);
  if (dx && !dx->same_shape(x)) dx->resize(x.c, x.h, x.w);
  conv1_.backward(params, x, dh1_pre, dx, dg);
  proj_.backward(params, x, d_pre, dx, dg);
}

void relu_forward(const Tensor& x, Tensor& y) {
  y.resize(x.c, x.h, x.w);
  kernels::active().relu_forward(x.data(), y.data(), x.size());
}

void relu_backward(const Tensor& x_pre, const Tensor& dy, Tensor& dx) {
  require_same_shape(x_pre, dy, "relu_backward");
  dx.resize(x_pre.c, x_pre.h, x_pre.w);
  kernels::active().relu_backward(x_pre.data(), dy.data(), dx.data(), dx.size());
}

}  // namespace margiheat
