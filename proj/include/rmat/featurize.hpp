#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmat/molio.hpp"

namespace rmat::featurize {

inline constexpr std::size_t kAtomFeatureDim = 36;
inline constexpr std::size_t kOrderDim = 6;
inline constexpr std::size_t kBondDim = 7;
inline constexpr std::size_t kDescriptorCount = 12;

enum class DistanceEncoding { radial_envelope, radial_plain, gaussian_schnet };

std::string_view to_string(DistanceEncoding e);
DistanceEncoding distance_encoding_from_string(std::string_view s);

struct DistanceConfig {
  double cutoff = 20.0;  // Angstrom
  int n_emb = 32;
  int envelope_p = 6;
  DistanceEncoding encoding = DistanceEncoding::radial_envelope;

  void check() const;
  // neighborhood one-hot + bond features + distance embedding (45 by default)
  std::size_t relation_dim() const { return kOrderDim + kBondDim + static_cast<std::size_t>(n_emb); }
};

struct AtomFeatureMatrix {
  std::size_t n = 0;
  std::vector<double> data;  // n x 36, row-major

  double operator()(std::size_t i, std::size_t c) const { return data[i * kAtomFeatureDim + c]; }
};

struct RelationTensor {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // n x n x dim, row-major

  std::span<const double> pair(std::size_t i, std::size_t j) const {
    return {data.data() + (i * n + j) * dim, dim};
  }
};

AtomFeatureMatrix atom_features(const molio::Molecule& mol);

std::array<double, kBondDim> bond_features(const molio::Molecule& mol, std::size_t i, std::size_t j);

// Polynomial envelope on the normalized distance t = d / c; zero for t >= 1.
double envelope(double t, int p);

std::vector<double> distance_embedding(double d, const DistanceConfig& cfg);
void distance_embedding_into(double d, const DistanceConfig& cfg, std::span<double> out);

// n x n distances. Pairs involving the dummy node, and every off-diagonal
// pair of a coordinate-free molecule, sit at the cutoff.
std::vector<double> pair_distances(const molio::Molecule& mol, double cutoff);

RelationTensor relation_tensor(const molio::Molecule& mol, const DistanceConfig& cfg);

const std::array<std::string_view, kDescriptorCount>& descriptor_names();
std::vector<double> descriptor_vector(const molio::Molecule& mol);
double atomic_mass(std::string_view symbol);

// Everything the model consumes for one molecule (dummy node included).
struct FeaturizedMolecule {
  std::size_t n = 0;
  AtomFeatureMatrix atoms;
  RelationTensor relation;
  std::vector<double> adjacency;  // n x n, 1 for bonded pairs
  std::vector<double> distances;  // n x n
};

// Adds the dummy node when missing, then featurizes.
FeaturizedMolecule featurize(const molio::Molecule& mol, const DistanceConfig& cfg);

// Batch featurization. The serial version is the reference; the parallel one
// distributes molecules over OpenMP threads and produces identical output.
namespace serial {
std::vector<FeaturizedMolecule> featurize_all(std::span<const molio::Molecule> mols,
                                              const DistanceConfig& cfg);
}
namespace parallel {
std::vector<FeaturizedMolecule> featurize_all(std::span<const molio::Molecule> mols,
                                              const DistanceConfig& cfg);
}
std::vector<FeaturizedMolecule> featurize_all(std::span<const molio::Molecule> mols,
                                              const DistanceConfig& cfg);

// CSV dump: header "atoms=<n>,atom_dim=36,relation_dim=<D>", then n atom rows,
// then n*n relation rows (i-major). Values use shortest round-trip formatting.
std::string dump_csv(const FeaturizedMolecule& fm);

}  // namespace rmat::featurize
