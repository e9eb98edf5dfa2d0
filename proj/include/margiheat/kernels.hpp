#pragma once

#include <cstddef>
#include <string>

namespace margiheat::kernels {

// Shape descriptor for a 2D convolution, square kernel, symmetric zero
// padding. Weight layout is [cout][cin][k][k], activations are [c][h][w].
struct ConvShape {
  int cin = 0, hin = 0, win = 0;
  int cout = 0, k = 1, stride = 1, pad = 0;

  int hout() const { return (hin + 2 * pad - k) / stride + 1; }
  int wout() const { return (win + 2 * pad - k) / stride + 1; }
};

// One table of kernel entry points. Two implementations exist: a scalar
// reference (the semantic contract) and an AVX2+FMA variant. Both produce
// the same values up to floating-point reassociation; the equivalence test
// suite pins them together on random inputs.
//
// Accumulation conventions:
//   conv2d_forward            writes y
//   conv2d_backward_data      accumulates into dx
//   conv2d_backward_weights   accumulates into dw / db
//   everything else           writes its output
struct Ops {
  const char* name;

  void (*conv2d_forward)(const ConvShape& s, const double* x, const double* w,
                         const double* bias, double* y);
  void (*conv2d_backward_data)(const ConvShape& s, const double* dy,
                               const double* w, double* dx);
  void (*conv2d_backward_weights)(const ConvShape& s, const double* x,
                                  const double* dy, double* dw, double* db);

  void (*relu_forward)(const double* x, double* y, size_t n);
  // dx = dy where x_pre > 0, else 0
  void (*relu_backward)(const double* x_pre, const double* dy, double* dx,
                        size_t n);

  void (*add)(const double* a, const double* b, double* y, size_t n);
  void (*axpy)(double alpha, const double* x, double* y, size_t n);  // y += a*x
  void (*scale)(double alpha, double* x, size_t n);                  // x *= a

  double (*dot)(const double* a, const double* b, size_t n);
  double (*sum)(const double* x, size_t n);
  double (*sumsq)(const double* x, size_t n);
  double (*max)(const double* x, size_t n);  // n >= 1
};

const Ops& scalar_ops();

// AVX2+FMA table, or nullptr when the CPU lacks support.
const Ops* avx2_ops();

// The table selected at first use: AVX2 when available, else scalar.
// MARGIHEAT_KERNELS=scalar|avx2 forces a choice (throws if unavailable).
const Ops& active();

// Name of the table `active()` resolved to ("scalar" / "avx2").
std::string active_name();

}  // namespace margiheat::kernels
