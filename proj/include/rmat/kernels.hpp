#pragma once

#include <cstddef>

namespace rmat::kernels {

// Batched dense product C[b] (+)= op(A[b]) * op(B[b]), row-major.
// op(A) is m x k, op(B) is k x n. A stride of 0 shares that operand across
// the batch; C must not be shared (stride_c >= m * n when batch > 1).
struct Gemm {
  std::size_t batch = 1, m = 0, n = 0, k = 0;
  const double* a = nullptr;
  std::size_t stride_a = 0;
  bool trans_a = false;
  const double* b = nullptr;
  std::size_t stride_b = 0;
  bool trans_b = false;
  double* c = nullptr;
  std::size_t stride_c = 0;
  bool accumulate = false;
};

// Every output element is reduced over k in ascending order by exactly one
// thread, so the serial and parallel variants agree bit for bit.
namespace serial {
void gemm(const Gemm& g);
}
namespace parallel {
void gemm(const Gemm& g);
}

// Picks the parallel variant above a work threshold.
void gemm(const Gemm& g);

// Sorts v ascending and sums it in that order, so the result depends only
// on the multiset of values, not on their order.
double sorted_sum(double* v, std::size_t n);

// Keeps freed tensor buffers in the process heap instead of returning them
// to the OS after every step (glibc only; a no-op elsewhere). Idempotent.
void retain_heap();

// Caps OpenMP worker threads (RMAT_THREADS); 0 leaves the runtime default.
void set_thread_limit(int threads);
int thread_limit();
bool openmp_enabled();

}  // namespace rmat::kernels
