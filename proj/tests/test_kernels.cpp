#include <cstring>
#include <vector>

#include "doctest.h"
#include "rmat/kernels.hpp"
#include "rmat/rng.hpp"

using namespace rmat;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

// Textbook triple loop with the same ascending-k reduction.
void naive(const kernels::Gemm& g) {
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* a = g.a + b * g.stride_a;
    const double* bb = g.b + b * g.stride_b;
    double* c = g.c + b * g.stride_c;
    for (std::size_t i = 0; i < g.m; ++i)
      for (std::size_t j = 0; j < g.n; ++j) {
        double s = g.accumulate ? c[i * g.n + j] : 0.0;
        for (std::size_t p = 0; p < g.k; ++p) {
          const double av = g.trans_a ? a[p * g.m + i] : a[i * g.k + p];
          const double bv = g.trans_b ? bb[j * g.k + p] : bb[p * g.n + j];
          s += av * bv;
        }
        c[i * g.n + j] = s;
      }
  }
}

bool same_bits(const std::vector<double>& x, const std::vector<double>& y) {
  return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("gemm matches the naive loop in every layout") {
    Rng rng(1);
    for (int trial = 0; trial < 80; ++trial) {
      kernels::Gemm g;
      g.batch = 1 + rng.below(3);
      g.m = 1 + rng.below(13);
      g.n = 1 + rng.below(19);
      g.k = 1 + rng.below(11);
      g.trans_a = rng.below(2);
      g.trans_b = rng.below(2);
      g.accumulate = rng.below(2);
      const bool share_b = rng.below(3) == 0;
      const auto a = random_values(rng, g.batch * g.m * g.k);
      const auto b = random_values(rng, g.batch * g.k * g.n);
      const auto c0 = random_values(rng, g.batch * g.m * g.n);
      g.a = a.data();
      g.stride_a = g.m * g.k;
      g.b = b.data();
      g.stride_b = share_b ? 0 : g.k * g.n;
      g.stride_c = g.m * g.n;

      auto ref = c0, ser = c0, par = c0;
      g.c = ref.data();
      naive(g);
      g.c = ser.data();
      kernels::serial::gemm(g);
      g.c = par.data();
      kernels::parallel::gemm(g);
      CHECK(same_bits(ref, ser));
      CHECK(same_bits(ser, par));
    }
  }

  TEST_CASE("large products agree between serial and parallel") {
    Rng rng(2);
    kernels::Gemm g;
    g.batch = 4;
    g.m = 67;
    g.n = 45;
    g.k = 33;
    const auto a = random_values(rng, g.batch * g.m * g.k);
    const auto b = random_values(rng, g.k * g.n);
    g.a = a.data();
    g.stride_a = g.m * g.k;
    g.b = b.data();
    g.stride_c = g.m * g.n;
    std::vector<double> ser(g.batch * g.m * g.n), par(ser.size());
    g.c = ser.data();
    kernels::serial::gemm(g);
    g.c = par.data();
    kernels::parallel::gemm(g);
    CHECK(same_bits(ser, par));
  }

  TEST_CASE("empty inner dimension clears or keeps C") {
    kernels::Gemm g;
    g.m = 2;
    g.n = 2;
    g.k = 0;
    std::vector<double> c{1, 2, 3, 4}, dummy(1);
    g.a = dummy.data();
    g.b = dummy.data();
    g.c = c.data();
    g.accumulate = true;
    kernels::gemm(g);
    CHECK(c == std::vector<double>{1, 2, 3, 4});
    g.accumulate = false;
    kernels::gemm(g);
    CHECK(c == std::vector<double>(4, 0.0));
  }

  TEST_CASE("thread limit round trips") {
    const int before = kernels::thread_limit();
    kernels::set_thread_limit(1);
    CHECK(kernels::thread_limit() == 1);
    kernels::set_thread_limit(before);
    kernels::retain_heap();
    kernels::retain_heap();
  }
}
