#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "rmat/molio.hpp"

namespace rmat::molio::detail {

inline std::vector<int> default_valences(Element e) {
  switch (e) {
    case Element::B: return {3};
    case Element::C: return {4};
    case Element::N: return {3, 5};
    case Element::O: return {2};
    case Element::P: return {3, 5};
    case Element::S: return {2, 4, 6};
    case Element::F:
    case Element::Cl:
    case Element::Br:
    case Element::I: return {1};
    default: return {};
  }
}

// Valences shifted for a formal charge (isoelectronic rule of thumb).
inline std::vector<int> charged_valences(Element e, int charge) {
  std::vector<int> v = default_valences(e);
  for (int& x : v) {
    switch (e) {
      case Element::C: x -= std::abs(charge); break;
      case Element::B: x -= charge; break;
      default: x += charge; break;
    }
  }
  std::erase_if(v, [](int x) { return x < 0; });
  return v;
}

// Implicit hydrogen count from the incident heavy-atom bond orders.
// Aromatic atoms count each aromatic bond as 1 plus one extra for the
// shared pi bond and only consider their lowest valence.
inline int implicit_hydrogens(Element e, int charge, bool aromatic,
                              std::span<const double> bond_orders, int explicit_h) {
  const std::vector<int> valences = charged_valences(e, charge);
  if (valences.empty()) return 0;
  int aromatic_bonds = 0;
  double other = 0;
  for (double o : bond_orders) {
    if (o == 1.5) ++aromatic_bonds;
    else other += o;
  }
  if (aromatic && aromatic_bonds > 0) {
    const int used = static_cast<int>(std::ceil(other)) + aromatic_bonds + 1 + explicit_h;
    return std::max(0, valences.front() - used);
  }
  const int used =
      static_cast<int>(std::ceil(other + 1.5 * aromatic_bonds)) + explicit_h;
  for (int v : valences)
    if (v >= used) return v - used;
  return 0;
}

}  // namespace rmat::molio::detail
