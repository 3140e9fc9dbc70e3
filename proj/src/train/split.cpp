#include <cmath>
#include <numeric>

#include "rmat/error.hpp"
#include "rmat/train.hpp"

namespace rmat::train {

Split random_split(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios)
    if (r < 0) throw std::invalid_argument("random_split: negative ratio");
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("random_split: ratios must sum to 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x5eed));
  rng.shuffle(idx);
  const auto n_valid = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n) + 1e-9));
  if (n_valid + n_test >= n || n_valid == 0 || n_test == 0)
    throw DataError("random_split: " + std::to_string(n) + " items leave an empty split");
  Split s;
  s.train.assign(idx.begin(), idx.end() - static_cast<long>(n_valid + n_test));
  s.valid.assign(idx.end() - static_cast<long>(n_valid + n_test), idx.end() - static_cast<long>(n_test));
  s.test.assign(idx.end() - static_cast<long>(n_test), idx.end());
  return s;
}

}  // namespace rmat::train
