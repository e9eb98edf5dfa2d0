// Scalar reference kernels. These define the semantics; the SIMD variants
// must match them within floating-point reassociation tolerance.

#include <algorithm>
#include <cstddef>

#include "margiheat/kernels.hpp"

namespace margiheat::kernels {
namespace {

void conv2d_forward_ref(const ConvShape& s, const double* x, const double* w,
                        const double* bias, double* y) {
  const int ho = s.hout(), wo = s.wout();
  for (int co = 0; co < s.cout; ++co) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias ? bias[co] : 0.0;
        for (int ci = 0; ci < s.cin; ++ci) {
          const double* xc = x + (static_cast<size_t>(ci) * s.hin) * s.win;
          const double* wc =
              w + ((static_cast<size_t>(co) * s.cin + ci) * s.k) * s.k;
          for (int ky = 0; ky < s.k; ++ky) {
            const int iy = oy * s.stride + ky - s.pad;
            if (iy < 0 || iy >= s.hin) continue;
            for (int kx = 0; kx < s.k; ++kx) {
              const int ix = ox * s.stride + kx - s.pad;
              if (ix < 0 || ix >= s.win) continue;
              acc += wc[ky * s.k + kx] * xc[iy * s.win + ix];
            }
          }
        }
        y[(static_cast<size_t>(co) * ho + oy) * wo + ox] = acc;
      }
    }
  }
}

void conv2d_backward_data_ref(const ConvShape& s, const double* dy,
                              const double* w, double* dx) {
  const int ho = s.hout(), wo = s.wout();
  for (int co = 0; co < s.cout; ++co) {
    const double* dyc = dy + (static_cast<size_t>(co) * ho) * wo;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const double g = dyc[oy * wo + ox];
        for (int ci = 0; ci < s.cin; ++ci) {
          double* dxc = dx + (static_cast<size_t>(ci) * s.hin) * s.win;
          const double* wc =
              w + ((static_cast<size_t>(co) * s.cin + ci) * s.k) * s.k;
          for (int ky = 0; ky < s.k; ++ky) {
            const int iy = oy * s.stride + ky - s.pad;
            if (iy < 0 || iy >= s.hin) continue;
            for (int kx = 0; kx < s.k; ++kx) {
              const int ix = ox * s.stride + kx - s.pad;
              if (ix < 0 || ix >= s.win) continue;
              dxc[iy * s.win + ix] += g * wc[ky * s.k + kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weights_ref(const ConvShape& s, const double* x,
                                 const double* dy, double* dw, double* db) {
  const int ho = s.hout(), wo = s.wout();
  for (int co = 0; co < s.cout; ++co) {
    const double* dyc = dy + (static_cast<size_t>(co) * ho) * wo;
    double accb = 0.0;
    for (int i = 0; i < ho * wo; ++i) accb += dyc[i];
    if (db) db[co] += accb;
    for (int ci = 0; ci < s.cin; ++ci) {
      const double* xc = x + (static_cast<size_t>(ci) * s.hin) * s.win;
      double* dwc = dw + ((static_cast<size_t>(co) * s.cin + ci) * s.k) * s.k;
      for (int ky = 0; ky < s.k; ++ky) {
        for (int kx = 0; kx < s.k; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s.stride + ky - s.pad;
            if (iy < 0 || iy >= s.hin) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * s.stride + kx - s.pad;
              if (ix < 0 || ix >= s.win) continue;
              acc += dyc[oy * wo + ox] * xc[iy * s.win + ix];
            }
          }
          dwc[ky * s.k + kx] += acc;
        }
      }
    }
  }
}

void relu_forward_ref(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_ref(const double* x_pre, const double* dy, double* dx,
                       size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] = x_pre[i] > 0.0 ? dy[i] : 0.0;
}

void add_ref(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void axpy_ref(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_ref(double alpha, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double dot_ref(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_ref(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_ref(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_ref(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      conv2d_forward_ref,
      conv2d_backward_data_ref,
      conv2d_backward_weights_ref,
      relu_forward_ref,
      relu_backward_ref,
      add_ref,
      axpy_ref,
      scale_ref,
      dot_ref,
      sum_ref,
      sumsq_ref,
      max_ref,
  };
  return ops;
}

}  // namespace margiheat::kernels
