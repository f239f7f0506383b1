#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include "aptc/neuro/kernels.hpp"

namespace aptc::neuro::kernels::parallel {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColTile = 16;
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

// Eight doubles; lowers to one AVX-512 register or a pair of AVX2 registers.
typedef double v8 __attribute__((vector_size(64)));

v8 load8(const double* p) {
  v8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

void store8(double* p, v8 v) { std::memcpy(p, &v, sizeof v); }

std::ptrdiff_t blocks(std::size_t n) { return static_cast<std::ptrdiff_t>((n + kRowBlock - 1) / kRowBlock); }

double hsum(v8 v) {
  double s = 0.0;
  for (int l = 0; l < 8; ++l) s += v[l];
  return s;
}

// sum_k a[k] b[k] with sixteen lane-wise partial sums, a fixed order for a given n.
double dot(const double* a, const double* b, std::size_t n) {
  v8 s0{}, s1{};
  std::size_t k = 0;
  for (; k + 16 <= n; k += 16) {
    s0 += load8(a + k) * load8(b + k);
    s1 += load8(a + k + 8) * load8(b + k + 8);
  }
  double s = hsum(s0 + s1);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

// Narrow-output product as dot products: c[r][j] = init[j] + a[r] . bt[j],
// with bt [cols x inner] the transposed right operand.
void gemm_dot(std::size_t rows, std::size_t inner, std::size_t cols, const double* a, const double* bt,
              const double* init, double* c) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * inner * cols > kParallelWork)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const double* ar = a + static_cast<std::size_t>(r) * inner;
    double* cr = c + static_cast<std::size_t>(r) * cols;
    for (std::size_t j = 0; j < cols; ++j) cr[j] = (init ? init[j] : 0.0) + dot(ar, bt + j * inner, inner);
  }
}

std::vector<double> transpose(const double* m, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = m[i * cols + j];
  }
  return t;
}

// c[r][j] = init[j] + sum_k a[r][k] b[k][j], accumulating over k in order.
// a [rows x inner], b [inner x cols], c [rows x cols]; init may be null (zero).
void gemm_rows(std::size_t rows, std::size_t inner, std::size_t cols, const double* a, const double* b,
               const double* init, double* c) {
  if (cols < kColTile) {
    const std::vector<double> bt = transpose(b, inner, cols);
    gemm_dot(rows, inner, cols, a, bt.data(), init, c);
    return;
  }
  const std::size_t tiled = cols - cols % kColTile;
  const std::ptrdiff_t nblk = blocks(rows);
#pragma omp parallel for schedule(static) if (rows * inner * cols > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < nblk; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * kRowBlock;
    const std::size_t nr = std::min(kRowBlock, rows - r0);
    std::size_t j_done = 0;
    if (nr == kRowBlock) {
      for (std::size_t j0 = 0; j0 < tiled; j0 += kColTile) {
        const v8 i0 = init ? load8(init + j0) : v8{};
        const v8 i1 = init ? load8(init + j0 + 8) : v8{};
        v8 acc[kRowBlock][2];
        for (std::size_t r = 0; r < kRowBlock; ++r) {
          acc[r][0] = i0;
          acc[r][1] = i1;
        }
        for (std::size_t k = 0; k < inner; ++k) {
          const v8 b0 = load8(b + k * cols + j0), b1 = load8(b + k * cols + j0 + 8);
          for (std::size_t r = 0; r < kRowBlock; ++r) {
            const double av = a[(r0 + r) * inner + k];
            acc[r][0] += av * b0;
            acc[r][1] += av * b1;
          }
        }
        for (std::size_t r = 0; r < kRowBlock; ++r) {
          store8(c + (r0 + r) * cols + j0, acc[r][0]);
          store8(c + (r0 + r) * cols + j0 + 8, acc[r][1]);
        }
      }
      j_done = tiled;
    }
    for (std::size_t r = r0; r < r0 + nr; ++r) {
      double* cr = c + r * cols;
      const double* ar = a + r * inner;
      for (std::size_t j = j_done; j < cols; ++j) cr[j] = init ? init[j] : 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        const double* bk = b + k * cols;
        const double av = ar[k];
        for (std::size_t j = j_done; j < cols; ++j) cr[j] += av * bk[j];
      }
    }
  }
}

}  // namespace

void dense_forward(DenseShape s, std::span<const double> x, std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
  gemm_rows(s.batch, s.in, s.out, x.data(), w.data(), b.data(), y.data());
}

void dense_backward_input(DenseShape s, std::span<const double> dy, std::span<const double> w, std::span<double> dx) {
  if (s.in < kColTile) {
    // w rows are already the columns of w^T.
    gemm_dot(s.batch, s.out, s.in, dy.data(), w.data(), nullptr, dx.data());
    return;
  }
  // w^T [out x in], so dx = dy w^T becomes a row-major product.
  std::vector<double> wt(s.in * s.out);
  for (std::size_t i = 0; i < s.in; ++i) {
    for (std::size_t o = 0; o < s.out; ++o) wt[o * s.in + i] = w[i * s.out + o];
  }
  gemm_rows(s.batch, s.out, s.in, dy.data(), wt.data(), nullptr, dx.data());
}

void dense_backward_params(DenseShape s, std::span<const double> x, std::span<const double> dy, std::span<double> dw,
                           std::span<double> db) {
  const std::size_t in = s.in;
  const std::size_t out = s.out;
  const std::size_t batch = s.batch;
  const std::size_t tiled_out = out - out % kColTile;
  const double* xp = x.data();
  const double* dyp = dy.data();
  double* dwp = dw.data();
  if (out < kColTile) {
    // Vectorize along the inputs instead: sixteen inputs by four outputs per tile.
    const std::size_t tiled_in = in - in % kColTile;
    const auto nchunk = static_cast<std::ptrdiff_t>(tiled_in / kColTile);
#pragma omp parallel for schedule(static) if (batch * in * out > kParallelWork)
    for (std::ptrdiff_t chunk = 0; chunk < nchunk; ++chunk) {
      const std::size_t i0 = static_cast<std::size_t>(chunk) * kColTile;
      for (std::size_t o0 = 0; o0 < out; o0 += kRowBlock) {
        const std::size_t no = std::min(kRowBlock, out - o0);
        v8 acc[kRowBlock][2] = {};
        for (std::size_t r = 0; r < batch; ++r) {
          const v8 x0 = load8(xp + r * in + i0), x1 = load8(xp + r * in + i0 + 8);
          for (std::size_t q = 0; q < no; ++q) {
            const double g = dyp[r * out + o0 + q];
            acc[q][0] += g * x0;
            acc[q][1] += g * x1;
          }
        }
        for (std::size_t q = 0; q < no; ++q) {
          for (std::size_t l = 0; l < 8; ++l) {
            dwp[(i0 + l) * out + o0 + q] = acc[q][0][l];
            dwp[(i0 + 8 + l) * out + o0 + q] = acc[q][1][l];
          }
        }
      }
    }
    for (std::size_t i = tiled_in; i < in; ++i) {
      for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (std::size_t r = 0; r < batch; ++r) acc += xp[r * in + i] * dyp[r * out + o];
        dwp[i * out + o] = acc;
      }
    }
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t r = 0; r < batch; ++r) acc += dyp[r * out + o];
      db[o] = acc;
    }
    return;
  }
  const std::ptrdiff_t nblk = blocks(in);
#pragma omp parallel for schedule(static) if (batch * in * out > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < nblk; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
    const std::size_t ni = std::min(kRowBlock, in - i0);
    std::size_t o_done = 0;
    if (ni == kRowBlock) {
      for (std::size_t o0 = 0; o0 < tiled_out; o0 += kColTile) {
        v8 acc[kRowBlock][2] = {};
        for (std::size_t r = 0; r < batch; ++r) {
          const v8 g0 = load8(dyp + r * out + o0), g1 = load8(dyp + r * out + o0 + 8);
          const double* xr = xp + r * in + i0;
          for (std::size_t k = 0; k < kRowBlock; ++k) {
            acc[k][0] += xr[k] * g0;
            acc[k][1] += xr[k] * g1;
          }
        }
        for (std::size_t k = 0; k < kRowBlock; ++k) {
          store8(dwp + (i0 + k) * out + o0, acc[k][0]);
          store8(dwp + (i0 + k) * out + o0 + 8, acc[k][1]);
        }
      }
      o_done = tiled_out;
    }
    for (std::size_t i = i0; i < i0 + ni; ++i) {
      double* wrow = dwp + i * out;
      for (std::size_t o = o_done; o < out; ++o) wrow[o] = 0.0;
      for (std::size_t r = 0; r < batch; ++r) {
        const double* gr = dyp + r * out;
        const double a = xp[r * in + i];
        for (std::size_t o = o_done; o < out; ++o) wrow[o] += a * gr[o];
      }
    }
  }
  double* dbp = db.data();
  std::fill(dbp, dbp + out, 0.0);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* gr = dyp + r * out;
#pragma omp simd
    for (std::size_t o = 0; o < out; ++o) dbp[o] += gr[o];
  }
}

void relu_forward(std::span<double> values) {
  double* p = values.data();
  const auto n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for simd schedule(static) if (values.size() > kParallelWork)
  for (std::ptrdiff_t k = 0; k < n; ++k) p[k] = p[k] > 0.0 ? p[k] : 0.0;
}

void relu_backward(std::span<const double> activation, std::span<double> grad) {
  const double* a = activation.data();
  double* g = grad.data();
  const auto n = static_cast<std::ptrdiff_t>(grad.size());
#pragma omp parallel for simd schedule(static) if (grad.size() > kParallelWork)
  for (std::ptrdiff_t k = 0; k < n; ++k) g[k] = a[k] > 0.0 ? g[k] : 0.0;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
  double* p = params.data();
  const double* g = grads.data();
  double* mp = m.data();
  double* vp = v.data();
  const auto n = static_cast<std::ptrdiff_t>(params.size());
#pragma omp parallel for simd schedule(static) if (params.size() > kParallelWork)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    mp[k] = c.beta1 * mp[k] + (1.0 - c.beta1) * g[k];
    vp[k] = c.beta2 * vp[k] + (1.0 - c.beta2) * g[k] * g[k];
    const double m_hat = mp[k] / c.bias_correction1;
    const double v_hat = vp[k] / c.bias_correction2;
    p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

void polyak_mix(std::span<double> target, std::span<const double> online, double tau) {
  double* t = target.data();
  const double* o = online.data();
  const auto n = static_cast<std::ptrdiff_t>(target.size());
#pragma omp parallel for simd schedule(static) if (target.size() > kParallelWork)
  for (std::ptrdiff_t k = 0; k < n; ++k) t[k] = (1.0 - tau) * t[k] + tau * o[k];
}

}  // namespace aptc::neuro::kernels::parallel
