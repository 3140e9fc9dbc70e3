#include <benchmark/benchmark.h>

#include <vector>

#include "rmat/featurize.hpp"
#include "rmat/kernels.hpp"
#include "rmat/molio.hpp"
#include "rmat/rng.hpp"

namespace {

using rmat::kernels::Gemm;

struct GemmData {
  std::vector<double> a, b, c;
  Gemm g;

  GemmData(std::size_t batch, std::size_t n) : a(batch * n * n), b(batch * n * n), c(batch * n * n) {
    rmat::Rng rng(1);
    for (double& v : a) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    g = {batch, n, n, n, a.data(), n * n, false, b.data(), n * n, false, c.data(), n * n, false};
  }
};

void BM_gemm_serial(benchmark::State& st) {
  GemmData d(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    rmat::kernels::serial::gemm(d.g);
    benchmark::DoNotOptimize(d.c.data());
  }
}

void BM_gemm_parallel(benchmark::State& st) {
  GemmData d(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    rmat::kernels::parallel::gemm(d.g);
    benchmark::DoNotOptimize(d.c.data());
  }
}

std::vector<rmat::molio::Molecule> corpus(std::size_t n) {
  const char* smiles[] = {"CCO", "c1ccccc1O", "CC(=O)Nc1ccc(O)cc1", "C1CCCCC1N", "OC(=O)CCl", "CC#N"};
  std::vector<rmat::molio::Molecule> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rmat::molio::parse_smiles(smiles[i % 6]));
  return out;
}

void BM_featurize_serial(benchmark::State& st) {
  const auto mols = corpus(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(rmat::featurize::serial::featurize_all(mols, {}));
}

void BM_featurize_parallel(benchmark::State& st) {
  const auto mols = corpus(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(rmat::featurize::parallel::featurize_all(mols, {}));
}

}  // namespace

BENCHMARK(BM_gemm_serial)->Args({1, 128})->Args({16, 64})->Args({64, 32});
BENCHMARK(BM_gemm_parallel)->Args({1, 128})->Args({16, 64})->Args({64, 32});
BENCHMARK(BM_featurize_serial)->Arg(64)->Arg(512);
BENCHMARK(BM_featurize_parallel)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
