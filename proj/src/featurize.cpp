#include "rmat/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rmat/error.hpp"

namespace rmat::featurize {

using molio::Element;
using molio::Molecule;

std::string_view to_string(DistanceEncoding e) {
  switch (e) {
    case DistanceEncoding::radial_envelope: return "radial_envelope";
    case DistanceEncoding::radial_plain: return "radial_plain";
    case DistanceEncoding::gaussian_schnet: return "gaussian_schnet";
  }
  return "?";
}

DistanceEncoding distance_encoding_from_string(std::string_view s) {
  if (s == "radial_envelope") return DistanceEncoding::radial_envelope;
  if (s == "radial_plain") return DistanceEncoding::radial_plain;
  if (s == "gaussian_schnet") return DistanceEncoding::gaussian_schnet;
  throw DataError("unknown distance encoding '" + std::string(s) + "'");
}

void DistanceConfig::check() const {
  if (!(cutoff > 0)) throw DataError("cutoff must be > 0");
  if (n_emb < 1) throw DataError("n_emb must be >= 1");
  if (envelope_p < 1) throw DataError("envelope_p must be >= 1");
}

AtomFeatureMatrix atom_features(const Molecule& mol) {
  const std::size_t n = mol.size();
  AtomFeatureMatrix m{n, std::vector<double>(n * kAtomFeatureDim, 0.0)};
  std::vector<std::size_t> degree(n, 0);
  for (const auto& b : mol.bonds) ++degree[b.a], ++degree[b.b];
  for (std::size_t i = 0; i < n; ++i) {
    const molio::Atom& a = mol.atoms[i];
    double* row = m.data.data() + i * kAtomFeatureDim;
    row[static_cast<std::size_t>(a.element)] = 1;
    row[12 + std::min<std::size_t>(degree[i], 5)] = 1;
    row[18 + std::clamp(a.h_count, 0, 4)] = 1;
    row[23 + (std::clamp(a.formal_charge, -5, 5) + 5)] = 1;
    row[34] = a.in_ring ? 1 : 0;
    row[35] = a.is_aromatic ? 1 : 0;
  }
  return m;
}

std::array<double, kBondDim> bond_features(const Molecule& mol, std::size_t i, std::size_t j) {
  std::array<double, kBondDim> f{};
  if (i == j) return f;
  const auto k = mol.bond_between(i, j);
  if (!k) return f;
  const molio::Bond& b = mol.bonds[*k];
  const int slot = b.order == 1.0 ? 0 : b.order == 1.5 ? 1 : b.order == 2.0 ? 2 : 3;
  f[slot] = 1;
  f[4] = b.is_aromatic ? 1 : 0;
  f[5] = b.is_conjugated ? 1 : 0;
  f[6] = b.in_ring ? 1 : 0;
  return f;
}

double envelope(double t, int p) {
  if (t >= 1.0) return 0.0;
  const double pp = p;
  const double a = (pp + 1) * (pp + 2) / 2;
  const double b = pp * (pp + 2);
  const double c = pp * (pp + 1) / 2;
  return 1 - a * std::pow(t, pp) + b * std::pow(t, pp + 1) - c * std::pow(t, pp + 2);
}

namespace {

// sin(pi * y), exactly zero at integers.
double sin_pi(double y) {
  if (y == std::floor(y)) return 0.0;
  return std::sin(std::numbers::pi * y);
}

}  // namespace

void distance_embedding_into(double d, const DistanceConfig& cfg, std::span<double> out) {
  if (d < 0) throw DataError("negative distance");
  if (out.size() != static_cast<std::size_t>(cfg.n_emb)) throw DataError("distance buffer size mismatch");
  const double c = cfg.cutoff;
  if (cfg.encoding == DistanceEncoding::gaussian_schnet) {
    constexpr double gamma = 10.0;
    constexpr double mu_max = 30.0;
    for (int k = 0; k < cfg.n_emb; ++k) {
      const double mu = cfg.n_emb > 1 ? mu_max * k / (cfg.n_emb - 1) : 0.0;
      const double diff = d - mu;
      out[k] = std::exp(-gamma * diff * diff);
    }
    return;
  }
  const double pref = std::sqrt(2.0 / c);
  const double t = d / c;
  const double u = cfg.encoding == DistanceEncoding::radial_envelope ? envelope(t, cfg.envelope_p) : 1.0;
  for (int k = 0; k < cfg.n_emb; ++k) {
    const double n = k + 1;
    double e;
    if (d < 1e-9) {
      e = pref * (n * std::numbers::pi / c);
    } else {
      e = pref * sin_pi(n * t) / d;
    }
    out[k] = e * u;
  }
}

std::vector<double> distance_embedding(double d, const DistanceConfig& cfg) {
  std::vector<double> out(cfg.n_emb);
  distance_embedding_into(d, cfg, out);
  return out;
}

std::vector<double> pair_distances(const Molecule& mol, double cutoff) {
  const std::size_t n = mol.size();
  std::vector<double> dist(n * n, 0.0);
  const std::size_t real = mol.coords ? mol.coords->size() : 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = cutoff;
      if (i < real && j < real) {
        const molio::Vec3& p = (*mol.coords)[i];
        const molio::Vec3& q = (*mol.coords)[j];
        const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
        d = std::sqrt(dx * dx + dy * dy + dz * dz);
      }
      dist[i * n + j] = dist[j * n + i] = d;
    }
  }
  return dist;
}

RelationTensor relation_tensor(const Molecule& mol, const DistanceConfig& cfg) {
  cfg.check();
  const std::size_t n = mol.size();
  std::size_t real = 0;
  for (const auto& a : mol.atoms) real += a.element != Element::Dummy;
  if (mol.coords && mol.coords->size() != real)
    throw DataError("coordinate list has " + std::to_string(mol.coords->size()) + " entries for " +
                    std::to_string(real) + " atoms");
  const std::size_t dim = cfg.relation_dim();
  RelationTensor r{n, dim, std::vector<double>(n * n * dim, 0.0)};
  const molio::OrderMatrix orders = molio::neighborhood_orders(mol);
  const std::vector<double> dist = pair_distances(mol, cfg.cutoff);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double* v = r.data.data() + (i * n + j) * dim;
      v[orders(i, j)] = 1;
      const auto bf = bond_features(mol, i, j);
      std::copy(bf.begin(), bf.end(), v + kOrderDim);
      distance_embedding_into(dist[i * n + j], cfg, {v + kOrderDim + kBondDim, static_cast<std::size_t>(cfg.n_emb)});
      if (j != i) std::copy(v, v + dim, r.data.data() + (j * n + i) * dim);
    }
  }
  return r;
}

const std::array<std::string_view, kDescriptorCount>& descriptor_names() {
  static const std::array<std::string_view, kDescriptorCount> names = {
      "mol_weight",  "heavy_atoms", "ring_count",     "aromatic_atoms",  "n_count",         "o_count",
      "halogen_count", "hbd_proxy", "hba_proxy",      "rotatable_proxy", "bond_order_sum",  "net_charge"};
  return names;
}

double atomic_mass(std::string_view s) {
  struct Entry {
    std::string_view symbol;
    double mass;
  };
  static constexpr Entry table[] = {
      {"H", 1.008},    {"B", 10.81},    {"C", 12.011},  {"N", 14.007},  {"O", 15.999},
      {"F", 18.998},   {"Na", 22.990},  {"Mg", 24.305}, {"Al", 26.982}, {"Si", 28.085},
      {"P", 30.974},   {"S", 32.06},    {"Cl", 35.45},  {"K", 39.098},  {"Ca", 40.078},
      {"Fe", 55.845},  {"Cu", 63.546},  {"Zn", 65.38},  {"As", 74.922}, {"Se", 78.971},
      {"Br", 79.904},  {"Sn", 118.71},  {"I", 126.904}, {"Pt", 195.08}, {"Hg", 200.59}};
  for (const auto& e : table)
    if (e.symbol == s) return e.mass;
  return 0.0;
}

std::vector<double> descriptor_vector(const Molecule& mol) {
  std::vector<double> d(kDescriptorCount, 0.0);
  std::vector<std::size_t> real;
  for (std::size_t i = 0; i < mol.size(); ++i)
    if (mol.atoms[i].element != Element::Dummy) real.push_back(i);
  const std::size_t n = real.size();
  std::vector<std::size_t> degree(mol.size(), 0);
  for (const auto& b : mol.bonds) ++degree[b.a], ++degree[b.b];

  // components via union-find over real atoms
  std::vector<std::size_t> parent(mol.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& b : mol.bonds) parent[find(b.a)] = find(b.b);
  std::size_t components = 0;
  for (std::size_t i : real) components += find(i) == i;

  // sorted so the weight does not depend on atom order
  std::vector<double> masses;
  for (std::size_t i : real) masses.push_back(atomic_mass(mol.atoms[i].symbol) + mol.atoms[i].h_count * atomic_mass("H"));
  std::sort(masses.begin(), masses.end());
  for (double m : masses) d[0] += m;
  for (std::size_t i : real) {
    const molio::Atom& a = mol.atoms[i];
    d[3] += a.is_aromatic;
    const bool is_n = a.element == Element::N, is_o = a.element == Element::O;
    d[4] += is_n;
    d[5] += is_o;
    d[6] += a.element == Element::F || a.element == Element::Cl || a.element == Element::Br ||
            a.element == Element::I;
    d[7] += (is_n || is_o) && a.h_count > 0;
    d[8] += is_n || is_o;
    d[11] += a.formal_charge;
  }
  d[1] = static_cast<double>(n);
  d[2] = static_cast<double>(mol.bonds.size()) - static_cast<double>(n) + static_cast<double>(components);
  for (const auto& b : mol.bonds) {
    d[9] += b.order == 1.0 && !b.in_ring && degree[b.a] > 1 && degree[b.b] > 1;
    d[10] += b.order;
  }
  return d;
}

FeaturizedMolecule featurize(const Molecule& input, const DistanceConfig& cfg) {
  const Molecule mol = input.has_dummy() ? input : molio::add_dummy_node(input, cfg.cutoff);
  FeaturizedMolecule fm;
  fm.n = mol.size();
  fm.atoms = atom_features(mol);
  fm.relation = relation_tensor(mol, cfg);
  fm.distances = pair_distances(mol, cfg.cutoff);
  fm.adjacency.assign(fm.n * fm.n, 0.0);
  for (const auto& b : mol.bonds) fm.adjacency[b.a * fm.n + b.b] = fm.adjacency[b.b * fm.n + b.a] = 1.0;
  return fm;
}

namespace serial {
std::vector<FeaturizedMolecule> featurize_all(std::span<const Molecule> mols, const DistanceConfig& cfg) {
  std::vector<FeaturizedMolecule> out(mols.size());
  for (std::size_t i = 0; i < mols.size(); ++i) out[i] = featurize(mols[i], cfg);
  return out;
}
}  // namespace serial

namespace parallel {
std::vector<FeaturizedMolecule> featurize_all(std::span<const Molecule> mols, const DistanceConfig& cfg) {
  std::vector<FeaturizedMolecule> out(mols.size());
  const long count = static_cast<long>(mols.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < count; ++i) {
    try {
      out[i] = featurize(mols[i], cfg);
    } catch (...) {
#pragma omp critical(rmat_featurize_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}
}  // namespace parallel

std::vector<FeaturizedMolecule> featurize_all(std::span<const Molecule> mols, const DistanceConfig& cfg) {
  if (mols.size() < 8) return serial::featurize_all(mols, cfg);
  return parallel::featurize_all(mols, cfg);
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string dump_csv(const FeaturizedMolecule& fm) {
  std::string out = "atoms=" + std::to_string(fm.n) + ",atom_dim=" + std::to_string(kAtomFeatureDim) +
                    ",relation_dim=" + std::to_string(fm.relation.dim) + "\n";
  auto rows = [&](const std::vector<double>& data, std::size_t width) {
    for (std::size_t r = 0; r * width < data.size(); ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        if (c) out += ',';
        append_number(out, data[r * width + c]);
      }
      out += '\n';
    }
  };
  rows(fm.atoms.data, kAtomFeatureDim);
  rows(fm.relation.data, fm.relation.dim);
  return out;
}

}  // namespace rmat::featurize
