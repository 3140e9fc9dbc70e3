#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmat/molio.hpp"
#include "rmat/rng.hpp"

namespace rmat::testing {

// Random acyclic C/N/O skeleton written as SMILES, optionally hung off a
// benzene ring. Valences are respected so every string parses.
inline std::string random_smiles(Rng& rng, std::size_t min_heavy, std::size_t max_heavy) {
  const std::size_t n = min_heavy + rng.below(max_heavy - min_heavy + 1);
  std::vector<char> elem(n, 'C');
  std::vector<int> cap(n, 4), order(n, 1);
  std::vector<std::vector<std::size_t>> kids(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double u = rng.uniform();
    elem[i] = u < 0.6 ? 'C' : u < 0.8 ? 'N' : 'O';
    cap[i] = elem[i] == 'C' ? 4 : elem[i] == 'N' ? 3 : 2;
    std::vector<std::size_t> open;
    for (std::size_t j = 0; j < i; ++j)
      if (cap[j] > 1) open.push_back(j);
    if (open.empty()) {
      elem.resize(i);
      break;
    }
    const std::size_t p = open[rng.below(open.size())];
    kids[p].push_back(i);
    // an occasional double bond to a fresh O leaf
    if (elem[i] == 'O' && elem[p] == 'C' && cap[p] >= 3 && rng.uniform() < 0.3) order[i] = 2;
    cap[p] -= order[i];
    cap[i] -= order[i];
  }
  const std::size_t m = elem.size();
  std::string out;
  auto emit = [&](auto&& self, std::size_t a) -> void {
    if (order[a] == 2) out += '=';
    out += elem[a];
    for (std::size_t k = 0; k < kids[a].size(); ++k) {
      if (kids[a][k] >= m) continue;
      const bool last = k + 1 == kids[a].size();
      if (!last) out += '(';
      self(self, kids[a][k]);
      if (!last) out += ')';
    }
  };
  emit(emit, 0);
  if (rng.uniform() < 0.25) out = "c1ccc(cc1)" + out;
  return out;
}

inline std::vector<molio::Molecule> synthetic_corpus(std::size_t count, std::uint64_t seed, std::size_t min_heavy = 3,
                                                     std::size_t max_heavy = 9) {
  Rng rng(seed);
  std::vector<molio::Molecule> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(molio::parse_smiles(random_smiles(rng, min_heavy, max_heavy)));
  return out;
}

}  // namespace rmat::testing
