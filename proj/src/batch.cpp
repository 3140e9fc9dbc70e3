#include <algorithm>
#include <limits>
#include <stdexcept>

#include "rmat/error.hpp"
#include "rmat/model.hpp"

namespace rmat::model {

Batch collate(const std::vector<const featurize::FeaturizedMolecule*>& mols, std::size_t pad_to,
              const std::vector<const std::vector<double>*>& extras) {
  if (mols.empty()) throw std::invalid_argument("collate: empty batch");
  Batch b;
  b.size = mols.size();
  const std::size_t rdim = mols.front()->relation.dim;
  for (const auto* m : mols) {
    if (m->n == 0) throw DataError("collate: empty molecule");
    if (m->relation.dim != rdim) throw std::invalid_argument("collate: mixed relation widths");
    b.max_n = std::max(b.max_n, m->n);
    b.lengths.push_back(m->n);
  }
  if (pad_to) {
    if (pad_to < b.max_n) throw std::invalid_argument("collate: pad_to smaller than the largest molecule");
    b.max_n = pad_to;
  }
  const std::size_t n = b.max_n, fd = featurize::kAtomFeatureDim;
  std::vector<double> atoms(b.size * n * fd, 0.0), rel(b.size * n * n * rdim, 0.0);
  std::vector<double> smask(b.size * n, 0.0);
  b.adjacency.assign(b.size * n * n, 0.0);
  b.distances.assign(b.size * n * n, 0.0);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < b.size; ++k) {
    const auto& m = *mols[k];
    std::copy(m.atoms.data.begin(), m.atoms.data.end(), atoms.begin() + static_cast<long>(k * n * fd));
    for (std::size_t i = 0; i < m.n; ++i) {
      std::copy_n(m.relation.data.data() + i * m.n * rdim, m.n * rdim, rel.data() + ((k * n + i) * n) * rdim);
      std::copy_n(m.adjacency.data() + i * m.n, m.n, b.adjacency.data() + (k * n + i) * n);
      std::copy_n(m.distances.data() + i * m.n, m.n, b.distances.data() + (k * n + i) * n);
    }
    for (std::size_t j = m.n; j < n; ++j) smask[k * n + j] = ninf;
  }
  b.atoms = ad::Tensor::from({b.size, n, fd}, std::move(atoms));
  b.relation = ad::Tensor::from({b.size, n, n, rdim}, std::move(rel));
  b.relation_unique = rmsa::unique_relation_rows(b.relation);
  b.score_mask = ad::Tensor::from({b.size, 1, 1, n}, smask);
  b.pool_mask = ad::Tensor::from({b.size, 1, n}, std::move(smask));
  if (!extras.empty()) {
    if (extras.size() != b.size) throw std::invalid_argument("collate: extra feature count mismatch");
    const std::size_t e = extras.front()->size();
    std::vector<double> ex;
    ex.reserve(b.size * e);
    for (const auto* x : extras) {
      if (x->size() != e) throw DataError("collate: ragged extra features");
      ex.insert(ex.end(), x->begin(), x->end());
    }
    b.extra = ad::Tensor::from({b.size, e}, std::move(ex));
  }
  return b;
}

}  // namespace rmat::model
