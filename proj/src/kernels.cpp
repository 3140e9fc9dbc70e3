#include "rmat/kernels.hpp"

#include <algorithm>
#include <mutex>
#include <cstring>
#include <vector>

#ifdef RMAT_HAVE_OPENMP
#include <omp.h>
#endif
#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace rmat::kernels {

namespace {

// Operands rearranged so A is (m, k) and B is (k, n), both row-major.
struct Packed {
  std::vector<double> a, b;
  const double* pa = nullptr;
  const double* pb = nullptr;
  std::size_t stride_a = 0, stride_b = 0;
};

void transpose_into(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

Packed pack(const Gemm& g) {
  Packed p;
  const std::size_t na = g.stride_a ? g.batch : 1, nb = g.stride_b ? g.batch : 1;
  if (g.trans_a) {
    p.a.resize(na * g.m * g.k);
    for (std::size_t bi = 0; bi < na; ++bi) transpose_into(g.a + bi * g.stride_a, g.k, g.m, p.a.data() + bi * g.m * g.k);
    p.pa = p.a.data();
    p.stride_a = g.stride_a ? g.m * g.k : 0;
  } else {
    p.pa = g.a;
    p.stride_a = g.stride_a;
  }
  if (g.trans_b) {
    p.b.resize(nb * g.k * g.n);
    for (std::size_t bi = 0; bi < nb; ++bi) transpose_into(g.b + bi * g.stride_b, g.n, g.k, p.b.data() + bi * g.k * g.n);
    p.pb = p.b.data();
    p.stride_b = g.stride_b ? g.k * g.n : 0;
  } else {
    p.pb = g.b;
    p.stride_b = g.stride_b;
  }
  return p;
}

constexpr std::size_t kTileM = 4, kTileN = 8;
typedef double v4 __attribute__((vector_size(32)));

// Rows [i0, i0 + kTileM) of C[bi]. Each element is reduced over k in
// ascending order, starting from 0 or from its previous value.
__attribute__((target_clones("avx2", "default")))
void gemm_tile_row(const Gemm& g, const Packed& p, std::size_t bi, std::size_t i0) {
  const double* __restrict a = p.pa + bi * p.stride_a;
  const double* __restrict b = p.pb + bi * p.stride_b;
  double* __restrict c = g.c + bi * g.stride_c;
  const std::size_t n = g.n, k = g.k;
  const std::size_t rows = std::min(kTileM, g.m - i0);
  std::size_t j0 = 0;
  if (rows == kTileM) {
    for (; j0 + kTileN <= n; j0 += kTileN) {
      v4 acc[kTileM][2];
      for (std::size_t r = 0; r < kTileM; ++r)
        for (std::size_t q = 0; q < 2; ++q) {
          if (g.accumulate) {
            std::memcpy(&acc[r][q], c + (i0 + r) * n + j0 + 4 * q, sizeof(v4));
          } else {
            acc[r][q] = v4{0.0, 0.0, 0.0, 0.0};
          }
        }
      for (std::size_t kk = 0; kk < k; ++kk) {
        v4 b0, b1;
        std::memcpy(&b0, b + kk * n + j0, sizeof(v4));
        std::memcpy(&b1, b + kk * n + j0 + 4, sizeof(v4));
        for (std::size_t r = 0; r < kTileM; ++r) {
          const double ar = a[(i0 + r) * k + kk];
          acc[r][0] += ar * b0;
          acc[r][1] += ar * b1;
        }
      }
      for (std::size_t r = 0; r < kTileM; ++r)
        for (std::size_t q = 0; q < 2; ++q) std::memcpy(c + (i0 + r) * n + j0 + 4 * q, &acc[r][q], sizeof(v4));
    }
  }
  // Remainder columns (and short row blocks) one row at a time.
  for (std::size_t r = 0; r < rows; ++r) {
    double* crow = c + (i0 + r) * n;
    const double* arow = a + (i0 + r) * k;
    if (!g.accumulate) std::fill(crow + j0, crow + n, 0.0);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double ar = arow[kk];
      const double* brow = b + kk * n;
      for (std::size_t j = j0; j < n; ++j) crow[j] += ar * brow[j];
    }
  }
}

int g_thread_limit = 0;

}  // namespace

namespace serial {
void gemm(const Gemm& g) {
  const Packed p = pack(g);
  for (std::size_t bi = 0; bi < g.batch; ++bi)
    for (std::size_t i = 0; i < g.m; i += kTileM) gemm_tile_row(g, p, bi, i);
}
}  // namespace serial

namespace parallel {
void gemm(const Gemm& g) {
  const Packed p = pack(g);
  const std::size_t blocks = (g.m + kTileM - 1) / kTileM;
  const long tasks = static_cast<long>(g.batch * blocks);
#pragma omp parallel for schedule(static)
  for (long t = 0; t < tasks; ++t) {
    const std::size_t bi = static_cast<std::size_t>(t) / blocks, ib = static_cast<std::size_t>(t) % blocks;
    gemm_tile_row(g, p, bi, ib * kTileM);
  }
}
}  // namespace parallel

void gemm(const Gemm& g) {
  if (g.batch == 0 || g.m == 0 || g.n == 0) return;
  constexpr std::size_t kParallelWork = 1 << 16;
  const std::size_t work = g.batch * g.m * g.n * std::max<std::size_t>(g.k, 1);
#ifdef RMAT_HAVE_OPENMP
  if (work >= kParallelWork && g.batch * g.m > kTileM && !omp_in_parallel() && omp_get_max_threads() > 1) {
    parallel::gemm(g);
    return;
  }
#else
  (void)work;
  (void)kParallelWork;
#endif
  serial::gemm(g);
}

double sorted_sum(double* v, std::size_t n) {
  if (n <= 32) {
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = i; j > 0 && v[j] < v[j - 1]; --j) std::swap(v[j], v[j - 1]);
  } else {
    std::sort(v, v + n);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s;
}

void retain_heap() {
  static std::once_flag once;
  std::call_once(once, [] {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
#endif
  });
}

void set_thread_limit(int threads) {
  g_thread_limit = std::max(0, threads);
#ifdef RMAT_HAVE_OPENMP
  if (g_thread_limit > 0) omp_set_num_threads(g_thread_limit);
#endif
}

int thread_limit() { return g_thread_limit; }

bool openmp_enabled() {
#ifdef RMAT_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace rmat::kernels
