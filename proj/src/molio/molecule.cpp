#include <algorithm>
#include <array>
#include <deque>
#include <functional>
#include <set>
#include <string>
#include <utility>

#include "rmat/error.hpp"
#include "rmat/molio.hpp"

namespace rmat::molio {

namespace {

constexpr std::array<std::string_view, kElementCount> kSymbols = {
    "B", "N", "C", "O", "F", "P", "S", "Cl", "Br", "I", "*", "?"};

}  // namespace

Element element_from_symbol(std::string_view symbol) {
  for (std::size_t i = 0; i < 10; ++i)
    if (kSymbols[i] == symbol) return static_cast<Element>(i);
  if (symbol == "*") return Element::Dummy;
  return Element::Other;
}

std::string_view element_symbol(Element e) { return kSymbols[static_cast<std::size_t>(e)]; }

bool Molecule::has_dummy() const {
  return std::any_of(atoms.begin(), atoms.end(),
                     [](const Atom& a) { return a.element == Element::Dummy; });
}

std::optional<std::size_t> Molecule::bond_between(std::size_t i, std::size_t j) const {
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    const Bond& b = bonds[k];
    if ((b.a == i && b.b == j) || (b.a == j && b.b == i)) return k;
  }
  return std::nullopt;
}

std::vector<std::vector<std::size_t>> Molecule::adjacency_lists() const {
  std::vector<std::vector<std::size_t>> adj(atoms.size());
  for (const Bond& b : bonds) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
  }
  return adj;
}

void validate(const Molecule& mol) {
  const std::size_t n = mol.atoms.size();
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Bond& b : mol.bonds) {
    if (b.a >= n || b.b >= n)
      throw DataError("bond endpoint out of range: " + std::to_string(b.a) + "-" +
                      std::to_string(b.b) + " with " + std::to_string(n) + " atoms");
    if (b.a == b.b) throw DataError("self-bond on atom " + std::to_string(b.a));
    if (b.order != 1.0 && b.order != 1.5 && b.order != 2.0 && b.order != 3.0)
      throw DataError("unsupported bond order " + std::to_string(b.order));
    if (b.order == 1.5 && !b.is_aromatic) throw DataError("order-1.5 bond not flagged aromatic");
    auto key = std::minmax(b.a, b.b);
    if (!seen.insert({key.first, key.second}).second)
      throw DataError("duplicate bond " + std::to_string(b.a) + "-" + std::to_string(b.b));
  }
  std::size_t real = 0;
  bool dummy_seen = false;
  for (const Atom& a : mol.atoms) {
    if (a.element == Element::Dummy) {
      dummy_seen = true;
    } else {
      if (dummy_seen) throw DataError("dummy atom must be last");
      ++real;
    }
  }
  if (mol.coords) {
    const auto& c = *mol.coords;
    if (c.size() != real)
      throw DataError("coordinate count " + std::to_string(c.size()) + " does not match " +
                      std::to_string(real) + " atoms");
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j)
        if (c[i] == c[j])
          throw DataError("atoms " + std::to_string(i) + " and " + std::to_string(j) +
                          " share coordinates");
  }
}

void perceive_rings_and_conjugation(Molecule& mol) {
  const std::size_t n = mol.atoms.size();
  const std::size_t m = mol.bonds.size();
  // incident (neighbor, bond index)
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> inc(n);
  for (std::size_t k = 0; k < m; ++k) {
    inc[mol.bonds[k].a].emplace_back(mol.bonds[k].b, k);
    inc[mol.bonds[k].b].emplace_back(mol.bonds[k].a, k);
  }

  // Tarjan bridge search; every non-bridge bond lies on a cycle.
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> bridge(m, false);
  int timer = 0;
  std::function<void(std::size_t, std::size_t)> dfs = [&](std::size_t v, std::size_t parent_bond) {
    disc[v] = low[v] = timer++;
    for (auto [w, k] : inc[v]) {
      if (k == parent_bond) continue;
      if (disc[w] < 0) {
        dfs(w, k);
        low[v] = std::min(low[v], low[w]);
        if (low[w] > disc[v]) bridge[k] = true;
      } else {
        low[v] = std::min(low[v], disc[w]);
      }
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (disc[v] < 0) dfs(v, m);

  for (Atom& a : mol.atoms) a.in_ring = false;
  std::vector<bool> has_multiple(n, false);
  for (std::size_t k = 0; k < m; ++k) {
    Bond& b = mol.bonds[k];
    b.in_ring = !bridge[k];
    if (b.in_ring) mol.atoms[b.a].in_ring = mol.atoms[b.b].in_ring = true;
    if (b.order > 1.0) has_multiple[b.a] = has_multiple[b.b] = true;
  }
  for (Bond& b : mol.bonds) b.is_conjugated = has_multiple[b.a] && has_multiple[b.b];
}

bool clamp_charge(Atom& atom) {
  const int clamped = std::clamp(atom.formal_charge, -5, 5);
  const bool changed = clamped != atom.formal_charge;
  atom.formal_charge = clamped;
  return changed;
}

std::vector<int> hop_counts(const Molecule& mol) {
  const std::size_t n = mol.atoms.size();
  const auto adj = mol.adjacency_lists();
  std::vector<int> hops(n * n, -1);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    int* row = &hops[s * n];
    row[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      for (std::size_t w : adj[v]) {
        if (row[w] < 0) {
          row[w] = row[v] + 1;
          queue.push_back(w);
        }
      }
    }
  }
  return hops;
}

OrderMatrix neighborhood_orders(const Molecule& mol) {
  const std::size_t n = mol.atoms.size();
  const std::vector<int> hops = hop_counts(mol);
  OrderMatrix out{n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::uint8_t code;
      if (i == j) {
        code = 0;
      } else if (mol.atoms[i].element == Element::Dummy || mol.atoms[j].element == Element::Dummy) {
        code = 5;
      } else {
        const int h = hops[i * n + j];
        code = (h < 0 || h >= 4) ? 4 : static_cast<std::uint8_t>(h);
      }
      out.entries[i * n + j] = code;
    }
  }
  return out;
}

Molecule add_dummy_node(const Molecule& mol, double cutoff) {
  if (mol.has_dummy()) throw DataError("molecule already has a dummy node");
  if (!(cutoff > 0)) throw DataError("cutoff must be positive");
  Molecule out = mol;
  Atom dummy;
  dummy.element = Element::Dummy;
  dummy.symbol = "*";
  out.atoms.push_back(dummy);
  return out;
}

Molecule permute_atoms(const Molecule& mol, const std::vector<std::size_t>& perm) {
  const std::size_t n = mol.atoms.size();
  if (perm.size() != n) throw DataError("permutation size mismatch");
  Molecule out;
  out.name = mol.name;
  out.atoms.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.atoms.at(perm[i]) = mol.atoms[i];
  out.bonds = mol.bonds;
  for (Bond& b : out.bonds) {
    b.a = perm[b.a];
    b.b = perm[b.b];
  }
  if (mol.coords) {
    const std::size_t real = mol.coords->size();
    std::vector<Vec3> c(real);
    for (std::size_t i = 0; i < real; ++i) {
      if (perm[i] >= real) throw DataError("permutation moves a real atom onto the dummy slot");
      c[perm[i]] = (*mol.coords)[i];
    }
    out.coords = std::move(c);
  }
  return out;
}

}  // namespace rmat::molio
