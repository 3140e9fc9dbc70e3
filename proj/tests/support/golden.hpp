#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rmat/featurize.hpp"

namespace rmat::testing {

// Golden files from tests/oracles/make_golden.py: "atoms n 36", n rows,
// "relation n 45", then "i j v..." for every pair. Values compare with ==.
inline bool matches_golden(const featurize::FeaturizedMolecule& fm, const std::string& name, std::string* why) {
  std::ifstream in(std::string(RMAT_TEST_DATA) + "/golden/" + name + ".txt");
  auto fail = [&](const std::string& msg) {
    if (why) *why = name + ": " + msg;
    return false;
  };
  if (!in) return fail("missing golden file");
  std::string tag;
  std::size_t n = 0, width = 0;
  in >> tag >> n >> width;
  if (tag != "atoms" || n != fm.n || width != featurize::kAtomFeatureDim) return fail("atom header");
  for (std::size_t i = 0; i < n * width; ++i) {
    double v;
    if (!(in >> v)) return fail("truncated atom block");
    if (v != fm.atoms.data[i]) return fail("atom value " + std::to_string(i));
  }
  in >> tag >> n >> width;
  if (tag != "relation" || n != fm.n || width != fm.relation.dim) return fail("relation header");
  for (std::size_t p = 0; p < n * n; ++p) {
    std::size_t i = 0, j = 0;
    in >> i >> j;
    if (i * n + j != p) return fail("pair order");
    const auto got = fm.relation.pair(i, j);
    for (std::size_t k = 0; k < width; ++k) {
      double v;
      if (!(in >> v)) return fail("truncated relation block");
      if (v != got[k]) {
        std::ostringstream os;
        os.precision(17);
        os << "pair (" << i << "," << j << ") slot " << k << ": golden " << v << " got " << got[k];
        return fail(os.str());
      }
    }
  }
  return true;
}

}  // namespace rmat::testing
