// AVX2+FMA kernel variants. Hot shapes (3x3 stride-1 pad-1 and 1x1 stride-1)
// get hand-vectorized paths; everything else delegates to the scalar
// reference. Convolutions use a zero-padded copy of the input so the inner
// loops carry no boundary branches.

#include "margiheat/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cstring>
#include <vector>

namespace margiheat::kernels {
namespace {

// Per-thread scratch for padded activations. Forward/backward of one layer
// never nest, so a single buffer per thread suffices.
thread_local std::vector<double> tl_pad;

// Copies src (c x h x w) into dst (c x (h+2) x (w+2)) with a zero border of
// width 1. Only the border is cleared; the interior is overwritten.
void pad_copy(const double* src, int c, int h, int w, double* dst) {
  const int hp = h + 2, wp = w + 2;
  for (int ci = 0; ci < c; ++ci) {
    const double* s = src + static_cast<size_t>(ci) * h * w;
    double* d = dst + static_cast<size_t>(ci) * hp * wp;
    std::memset(d, 0, sizeof(double) * wp);
    std::memset(d + static_cast<size_t>(hp - 1) * wp, 0, sizeof(double) * wp);
    for (int y = 0; y < h; ++y) {
      double* row = d + static_cast<size_t>(y + 1) * wp;
      row[0] = 0.0;
      std::memcpy(row + 1, s + static_cast<size_t>(y) * w, sizeof(double) * w);
      row[w + 1] = 0.0;
    }
  }
}

// ---- 3x3, stride 1, pad 1 ----

void conv3x3_forward(const ConvShape& s, const double* x, const double* w,
                     const double* bias, double* y) {
  const int h = s.hin, wd = s.win, wp = wd + 2;
  tl_pad.resize(static_cast<size_t>(s.cin) * (h + 2) * wp);
  pad_copy(x, s.cin, h, wd, tl_pad.data());
  const double* xp = tl_pad.data();

  for (int co = 0; co < s.cout; ++co) {
    const double* wbase = w + static_cast<size_t>(co) * s.cin * 9;
    const __m256d bv = _mm256_set1_pd(bias ? bias[co] : 0.0);
    double* yc = y + static_cast<size_t>(co) * h * wd;
    for (int oy = 0; oy < h; ++oy) {
      double* yrow = yc + static_cast<size_t>(oy) * wd;
      // chunks of up to 16 columns; each weight broadcast feeds 4 FMAs
      int x0 = 0;
      for (; x0 + 16 <= wd; x0 += 16) {
        __m256d a0 = bv, a1 = bv, a2 = bv, a3 = bv;
        for (int ci = 0; ci < s.cin; ++ci) {
          const double* xc =
              xp + static_cast<size_t>(ci) * (h + 2) * wp + x0;
          const double* wc = wbase + static_cast<size_t>(ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const double* xrow = xc + static_cast<size_t>(oy + ky) * wp;
            for (int kx = 0; kx < 3; ++kx) {
              const __m256d wv = _mm256_set1_pd(wc[ky * 3 + kx]);
              a0 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xrow + kx + 0), a0);
              a1 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xrow + kx + 4), a1);
              a2 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xrow + kx + 8), a2);
              a3 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(xrow + kx + 12), a3);
            }
          }
        }
        _mm256_storeu_pd(yrow + x0 + 0, a0);
        _mm256_storeu_pd(yrow + x0 + 4, a1);
        _mm256_storeu_pd(yrow + x0 + 8, a2);
        _mm256_storeu_pd(yrow + x0 + 12, a3);
      }
      for (; x0 + 4 <= wd; x0 += 4) {
        __m256d acc = bv;
        for (int ci = 0; ci < s.cin; ++ci) {
          const double* xc = xp + static_cast<size_t>(ci) * (h + 2) * wp + x0;
          const double* wc = wbase + static_cast<size_t>(ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const double* xrow = xc + static_cast<size_t>(oy + ky) * wp;
            for (int kx = 0; kx < 3; ++kx)
              acc = _mm256_fmadd_pd(_mm256_set1_pd(wc[ky * 3 + kx]),
                                    _mm256_loadu_pd(xrow + kx), acc);
          }
        }
        _mm256_storeu_pd(yrow + x0, acc);
      }
      for (; x0 < wd; ++x0) {
        double acc = bias ? bias[co] : 0.0;
        for (int ci = 0; ci < s.cin; ++ci) {
          const double* xc = xp + static_cast<size_t>(ci) * (h + 2) * wp;
          const double* wc = wbase + static_cast<size_t>(ci) * 9;
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
              acc += wc[ky * 3 + kx] * xc[(oy + ky) * wp + x0 + kx];
        }
        yrow[x0] = acc;
      }
    }
  }
}

void conv3x3_backward_data(const ConvShape& s, const double* dy,
                           const double* w, double* dx) {
  // dx[ci][iy][ix] += sum_{co,fy,fx} w[co][ci][2-fy][2-fx] * dyp[co][iy+fy][ix+fx]
  const int h = s.hin, wd = s.win, wp = wd + 2;
  tl_pad.resize(static_cast<size_t>(s.cout) * (h + 2) * wp);
  pad_copy(dy, s.cout, h, wd, tl_pad.data());
  const double* dyp = tl_pad.data();

  for (int ci = 0; ci < s.cin; ++ci) {
    double* dxc = dx + static_cast<size_t>(ci) * h * wd;
    for (int iy = 0; iy < h; ++iy) {
      double* dxrow = dxc + static_cast<size_t>(iy) * wd;
      int x0 = 0;
      for (; x0 + 16 <= wd; x0 += 16) {
        __m256d a0 = _mm256_loadu_pd(dxrow + x0 + 0);
        __m256d a1 = _mm256_loadu_pd(dxrow + x0 + 4);
        __m256d a2 = _mm256_loadu_pd(dxrow + x0 + 8);
        __m256d a3 = _mm256_loadu_pd(dxrow + x0 + 12);
        for (int co = 0; co < s.cout; ++co) {
          const double* dc =
              dyp + static_cast<size_t>(co) * (h + 2) * wp + x0;
          const double* wc = w + (static_cast<size_t>(co) * s.cin + ci) * 9;
          for (int fy = 0; fy < 3; ++fy) {
            const double* drow = dc + static_cast<size_t>(iy + fy) * wp;
            for (int fx = 0; fx < 3; ++fx) {
              const __m256d wv = _mm256_set1_pd(wc[(2 - fy) * 3 + (2 - fx)]);
              a0 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(drow + fx + 0), a0);
              a1 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(drow + fx + 4), a1);
              a2 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(drow + fx + 8), a2);
              a3 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(drow + fx + 12), a3);
            }
          }
        }
        _mm256_storeu_pd(dxrow + x0 + 0, a0);
        _mm256_storeu_pd(dxrow + x0 + 4, a1);
        _mm256_storeu_pd(dxrow + x0 + 8, a2);
        _mm256_storeu_pd(dxrow + x0 + 12, a3);
      }
      for (; x0 + 4 <= wd; x0 += 4) {
        __m256d acc = _mm256_loadu_pd(dxrow + x0);
        for (int co = 0; co < s.cout; ++co) {
          const double* dc = dyp + static_cast<size_t>(co) * (h + 2) * wp + x0;
          const double* wc = w + (static_cast<size_t>(co) * s.cin + ci) * 9;
          for (int fy = 0; fy < 3; ++fy) {
            const double* drow = dc + static_cast<size_t>(iy + fy) * wp;
            for (int fx = 0; fx < 3; ++fx)
              acc = _mm256_fmadd_pd(_mm256_set1_pd(wc[(2 - fy) * 3 + (2 - fx)]),
                                    _mm256_loadu_pd(drow + fx), acc);
          }
        }
        _mm256_storeu_pd(dxrow + x0, acc);
      }
      for (; x0 < wd; ++x0) {
        double acc = dxrow[x0];
        for (int co = 0; co < s.cout; ++co) {
          const double* dc = dyp + static_cast<size_t>(co) * (h + 2) * wp;
          const double* wc = w + (static_cast<size_t>(co) * s.cin + ci) * 9;
          for (int fy = 0; fy < 3; ++fy)
            for (int fx = 0; fx < 3; ++fx)
              acc += wc[(2 - fy) * 3 + (2 - fx)] * dc[(iy + fy) * wp + x0 + fx];
        }
        dxrow[x0] = acc;
      }
    }
  }
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void conv3x3_backward_weights(const ConvShape& s, const double* x,
                              const double* dy, double* dw, double* db) {
  const int h = s.hin, wd = s.win, wp = wd + 2;
  tl_pad.resize(static_cast<size_t>(s.cin) * (h + 2) * wp);
  pad_copy(x, s.cin, h, wd, tl_pad.data());
  const double* xp = tl_pad.data();

  const int nv = wd / 4, tail = wd % 4;
  for (int co = 0; co < s.cout; ++co) {
    const double* dyc = dy + static_cast<size_t>(co) * h * wd;
    if (db) {
      __m256d a = _mm256_setzero_pd();
      double at = 0.0;
      const size_t n = static_cast<size_t>(h) * wd;
      size_t i = 0;
      for (; i + 4 <= n; i += 4) a = _mm256_add_pd(a, _mm256_loadu_pd(dyc + i));
      for (; i < n; ++i) at += dyc[i];
      db[co] += hsum(a) + at;
    }
    for (int ci = 0; ci < s.cin; ++ci) {
      const double* xc = xp + static_cast<size_t>(ci) * (h + 2) * wp;
      __m256d acc[9];
      for (auto& a : acc) a = _mm256_setzero_pd();
      double acct[9] = {0};
      for (int oy = 0; oy < h; ++oy) {
        const double* drow = dyc + static_cast<size_t>(oy) * wd;
        const double* x0 = xc + static_cast<size_t>(oy + 0) * wp;
        const double* x1 = xc + static_cast<size_t>(oy + 1) * wp;
        const double* x2 = xc + static_cast<size_t>(oy + 2) * wp;
        for (int b = 0; b < nv; ++b) {
          const int ox = b * 4;
          const __m256d dv = _mm256_loadu_pd(drow + ox);
          acc[0] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x0 + ox + 0), acc[0]);
          acc[1] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x0 + ox + 1), acc[1]);
          acc[2] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x0 + ox + 2), acc[2]);
          acc[3] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x1 + ox + 0), acc[3]);
          acc[4] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x1 + ox + 1), acc[4]);
          acc[5] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x1 + ox + 2), acc[5]);
          acc[6] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x2 + ox + 0), acc[6]);
          acc[7] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x2 + ox + 1), acc[7]);
          acc[8] = _mm256_fmadd_pd(dv, _mm256_loadu_pd(x2 + ox + 2), acc[8]);
        }
        for (int t = 0; t < tail; ++t) {
          const int ox = nv * 4 + t;
          const double d = drow[ox];
          acct[0] += d * x0[ox + 0];
          acct[1] += d * x0[ox + 1];
          acct[2] += d * x0[ox + 2];
          acct[3] += d * x1[ox + 0];
          acct[4] += d * x1[ox + 1];
          acct[5] += d * x1[ox + 2];
          acct[6] += d * x2[ox + 0];
          acct[7] += d * x2[ox + 1];
          acct[8] += d * x2[ox + 2];
        }
      }
      double* dwc = dw + (static_cast<size_t>(co) * s.cin + ci) * 9;
      for (int i = 0; i < 9; ++i) dwc[i] += hsum(acc[i]) + acct[i];
    }
  }
}

// ---- 1x1, stride 1 ----

void conv1x1_forward(const ConvShape& s, const double* x, const double* w,
                     const double* bias, double* y) {
  const size_t n = static_cast<size_t>(s.hin) * s.win;
  const size_t nv = n / 4, tail = n % 4;
  for (int co = 0; co < s.cout; ++co) {
    const double* wrow = w + static_cast<size_t>(co) * s.cin;
    double* yc = y + static_cast<size_t>(co) * n;
    const double b = bias ? bias[co] : 0.0;
    const __m256d bv = _mm256_set1_pd(b);
    for (size_t i = 0; i < nv; ++i) {
      __m256d acc = bv;
      for (int ci = 0; ci < s.cin; ++ci)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(wrow[ci]),
                              _mm256_loadu_pd(x + static_cast<size_t>(ci) * n + i * 4),
                              acc);
      _mm256_storeu_pd(yc + i * 4, acc);
    }
    for (size_t t = n - tail; t < n; ++t) {
      double acc = b;
      for (int ci = 0; ci < s.cin; ++ci) acc += wrow[ci] * x[ci * n + t];
      yc[t] = acc;
    }
  }
}

void conv1x1_backward_data(const ConvShape& s, const double* dy,
                           const double* w, double* dx) {
  const size_t n = static_cast<size_t>(s.hin) * s.win;
  const size_t nv = n / 4, tail = n % 4;
  for (int ci = 0; ci < s.cin; ++ci) {
    double* dxc = dx + static_cast<size_t>(ci) * n;
    for (size_t i = 0; i < nv; ++i) {
      __m256d acc = _mm256_loadu_pd(dxc + i * 4);
      for (int co = 0; co < s.cout; ++co)
        acc = _mm256_fmadd_pd(
            _mm256_set1_pd(w[static_cast<size_t>(co) * s.cin + ci]),
            _mm256_loadu_pd(dy + static_cast<size_t>(co) * n + i * 4), acc);
      _mm256_storeu_pd(dxc + i * 4, acc);
    }
    for (size_t t = n - tail; t < n; ++t) {
      double acc = dxc[t];
      for (int co = 0; co < s.cout; ++co)
        acc += w[static_cast<size_t>(co) * s.cin + ci] * dy[co * n + t];
      dxc[t] = acc;
    }
  }
}

double dot_avx2(const double* a, const double* b, size_t n);
double sum_avx2(const double* x, size_t n);

void conv1x1_backward_weights(const ConvShape& s, const double* x,
                              const double* dy, double* dw, double* db) {
  const size_t n = static_cast<size_t>(s.hin) * s.win;
  for (int co = 0; co < s.cout; ++co) {
    const double* dyc = dy + static_cast<size_t>(co) * n;
    if (db) db[co] += sum_avx2(dyc, n);
    double* dwrow = dw + static_cast<size_t>(co) * s.cin;
    for (int ci = 0; ci < s.cin; ++ci)
      dwrow[ci] += dot_avx2(dyc, x + static_cast<size_t>(ci) * n, n);
  }
}

// ---- dispatching conv wrappers ----

bool hot_3x3(const ConvShape& s) {
  return s.k == 3 && s.stride == 1 && s.pad == 1;
}
bool hot_1x1(const ConvShape& s) {
  return s.k == 1 && s.stride == 1 && s.pad == 0;
}

void conv2d_forward_avx2(const ConvShape& s, const double* x, const double* w,
                         const double* bias, double* y) {
  if (hot_3x3(s))
    conv3x3_forward(s, x, w, bias, y);
  else if (hot_1x1(s))
    conv1x1_forward(s, x, w, bias, y);
  else
    scalar_ops().conv2d_forward(s, x, w, bias, y);
}

void conv2d_backward_data_avx2(const ConvShape& s, const double* dy,
                               const double* w, double* dx) {
  if (hot_3x3(s))
    conv3x3_backward_data(s, dy, w, dx);
  else if (hot_1x1(s))
    conv1x1_backward_data(s, dy, w, dx);
  else
    scalar_ops().conv2d_backward_data(s, dy, w, dx);
}

void conv2d_backward_weights_avx2(const ConvShape& s, const double* x,
                                  const double* dy, double* dw, double* db) {
  if (hot_3x3(s))
    conv3x3_backward_weights(s, x, dy, dw, db);
  else if (hot_1x1(s))
    conv1x1_backward_weights(s, x, dy, dw, db);
  else
    scalar_ops().conv2d_backward_weights(s, x, dy, dw, db);
}

// ---- elementwise ----

void relu_forward_avx2(const double* x, double* y, size_t n) {
  const __m256d z = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* x_pre, const double* dy, double* dx,
                        size_t n) {
  const __m256d z = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x_pre + i), z, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x_pre[i] > 0.0 ? dy[i] : 0.0;
}

void add_avx2(const double* a, const double* b, double* y, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* x, size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

// ---- reductions (fixed lane order, deterministic per variant) ----

double dot_avx2(const double* a, const double* b, size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                         a1);
  }
  for (; i + 4 <= n; i += 4)
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_avx2(const double* x, size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_avx2(const double* x, size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    a0 = _mm256_fmadd_pd(v0, v0, a0);
    a1 = _mm256_fmadd_pd(v1, v1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    a0 = _mm256_fmadd_pd(v, v, a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_avx2(const double* x, size_t n) {
  size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d mv = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4)
      mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(mv);
    __m128d hi = _mm256_extractf128_pd(mv, 1);
    lo = _mm_max_pd(lo, hi);
    m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace

const Ops* avx2_ops() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma"))
    return nullptr;
  static const Ops ops = {
      "avx2",
      conv2d_forward_avx2,
      conv2d_backward_data_avx2,
      conv2d_backward_weights_avx2,
      relu_forward_avx2,
      relu_backward_avx2,
      add_avx2,
      axpy_avx2,
      scale_avx2,
      dot_avx2,
      sum_avx2,
      sumsq_avx2,
      max_avx2,
  };
  return &ops;
}

}  // namespace margiheat::kernels

#else  // !(__AVX2__ && __FMA__)

namespace margiheat::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace margiheat::kernels

#endif
