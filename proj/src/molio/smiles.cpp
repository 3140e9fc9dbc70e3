#include <array>
#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "rmat/error.hpp"
#include "rmat/log.hpp"
#include "rmat/molio.hpp"
#include "valence.hpp"

namespace rmat::molio {

namespace {

constexpr std::array<std::string_view, 118> kPeriodicTable = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

bool known_element(std::string_view s) {
  for (auto e : kPeriodicTable)
    if (e == s) return true;
  return false;
}

struct PendingRing {
  std::size_t atom;
  char bond;
  std::size_t offset;
};

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : s_(text) {}

  Molecule parse() {
    if (s_.empty()) throw ParseError("empty SMILES", 0);
    while (pos_ < s_.size()) step();
    if (pending_bond_) throw ParseError("bond symbol without a following atom", bond_offset_);
    if (!branches_.empty()) throw ParseError("unmatched '('", branch_offsets_.back());
    if (!rings_.empty()) throw ParseError("dangling ring closure", rings_.begin()->second.offset);
    if (mol_.atoms.empty()) throw ParseError("no atoms", 0);
    finish();
    return std::move(mol_);
  }

 private:
  void step() {
    const char c = s_[pos_];
    switch (c) {
      case '(':
        if (!prev_) throw ParseError("branch before any atom", pos_);
        branches_.push_back(*prev_);
        branch_offsets_.push_back(pos_);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) throw ParseError("unmatched ')'", pos_);
        if (pending_bond_) throw ParseError("bond symbol before ')'", pos_);
        prev_ = branches_.back();
        branches_.pop_back();
        branch_offsets_.pop_back();
        ++pos_;
        return;
      case '-': case '=': case '#': case ':': case '/': case '\\':
        if (pending_bond_) throw ParseError("two consecutive bond symbols", pos_);
        pending_bond_ = c;
        bond_offset_ = pos_;
        ++pos_;
        return;
      case '.':
        if (pending_bond_) throw ParseError("bond symbol before '.'", pos_);
        prev_.reset();
        ++pos_;
        return;
      case '%': {
        if (pos_ + 2 >= s_.size())
          throw ParseError("truncated %nn ring label", pos_);
        if (!std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2])))
          throw ParseError("malformed %nn ring label", pos_);
        ring_closure((s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0'), pos_);
        pos_ += 3;
        return;
      }
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure(c - '0', pos_);
      ++pos_;
      return;
    }
    if (c == '[') {
      bracket_atom();
      return;
    }
    organic_atom();
  }

  void ring_closure(int label, std::size_t offset) {
    if (!prev_) throw ParseError("ring closure before any atom", offset);
    auto it = rings_.find(label);
    if (it == rings_.end()) {
      rings_[label] = {*prev_, pending_bond_, offset};
      pending_bond_ = 0;
      return;
    }
    const PendingRing open = it->second;
    rings_.erase(it);
    char bond = pending_bond_;
    if (open.bond && bond && open.bond != bond)
      throw ParseError("conflicting ring-closure bond symbols", offset);
    if (!bond) bond = open.bond;
    if (open.atom == *prev_) throw ParseError("ring closure onto the same atom", offset);
    add_bond(open.atom, *prev_, bond, offset);
    pending_bond_ = 0;
  }

  void organic_atom() {
    const std::size_t start = pos_;
    std::string sym;
    bool aromatic = false;
    const char c = s_[pos_];
    if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
      sym = "Cl";
    } else if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
      sym = "Br";
    } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
      sym = std::string(1, c);
    } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
      sym = std::string(1, static_cast<char>(std::toupper(c)));
      aromatic = true;
    } else {
      throw ParseError(std::string("unknown symbol '") + c + "'", pos_);
    }
    pos_ += sym.size();
    Atom a;
    a.symbol = sym;
    a.element = element_from_symbol(sym);
    a.is_aromatic = aromatic;
    place_atom(std::move(a), /*implicit_h=*/true, start);
  }

  void bracket_atom() {
    const std::size_t start = pos_;
    const std::size_t close = s_.find(']', pos_);
    if (close == std::string_view::npos) throw ParseError("unterminated bracket atom", pos_);
    std::size_t p = pos_ + 1;
    while (p < close && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;  // isotope
    if (p >= close) throw ParseError("bracket atom without symbol", start);
    Atom a;
    const char c = s_[p];
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (p + 1 < close && std::islower(static_cast<unsigned char>(s_[p + 1])) &&
          known_element(sym + s_[p + 1])) {
        sym += s_[p + 1];
      }
      if (!known_element(sym)) throw ParseError("unknown element '" + sym + "'", p);
      a.symbol = sym;
      p += sym.size();
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym;
      if (p + 1 < close && (s_.substr(p, 2) == "se" || s_.substr(p, 2) == "as")) {
        sym = std::string(s_.substr(p, 2));
      } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
        sym = std::string(1, c);
      } else {
        throw ParseError(std::string("unknown aromatic symbol '") + c + "'", p);
      }
      p += sym.size();
      sym[0] = static_cast<char>(std::toupper(sym[0]));
      a.symbol = sym;
      a.is_aromatic = true;
    } else {
      throw ParseError("unknown symbol in bracket atom", p);
    }
    a.element = element_from_symbol(a.symbol);
    while (p < close && s_[p] == '@') ++p;  // chirality is ignored
    if (p < close && s_[p] == 'H') {
      ++p;
      int h = 1;
      if (p < close && std::isdigit(static_cast<unsigned char>(s_[p]))) h = s_[p++] - '0';
      a.h_count = h;
    }
    if (p < close && (s_[p] == '+' || s_[p] == '-')) {
      const char sign = s_[p++];
      int mag = 1;
      if (p < close && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        mag = 0;
        while (p < close && std::isdigit(static_cast<unsigned char>(s_[p]))) mag = mag * 10 + (s_[p++] - '0');
      } else {
        while (p < close && s_[p] == sign) {
          ++mag;
          ++p;
        }
      }
      a.formal_charge = sign == '+' ? mag : -mag;
    }
    if (p < close && s_[p] == ':') {  // atom class
      ++p;
      while (p < close && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;
    }
    if (p != close) throw ParseError("unexpected character in bracket atom", p);
    pos_ = close + 1;
    if (clamp_charge(a)) warn("formal charge clamped to [-5,5] at offset " + std::to_string(start));
    place_atom(std::move(a), /*implicit_h=*/false, start);
  }

  void place_atom(Atom a, bool implicit_h, std::size_t offset) {
    const std::size_t idx = mol_.atoms.size();
    mol_.atoms.push_back(std::move(a));
    implicit_.push_back(implicit_h);
    if (prev_) add_bond(*prev_, idx, pending_bond_, offset);
    pending_bond_ = 0;
    prev_ = idx;
  }

  void add_bond(std::size_t i, std::size_t j, char symbol, std::size_t offset) {
    if (mol_.bond_between(i, j)) throw ParseError("duplicate bond", offset);
    Bond b;
    b.a = i;
    b.b = j;
    switch (symbol) {
      case '=': b.order = 2; break;
      case '#': b.order = 3; break;
      case ':': b.order = 1.5; b.is_aromatic = true; break;
      case 0:
        if (mol_.atoms[i].is_aromatic && mol_.atoms[j].is_aromatic) {
          b.order = 1.5;
          b.is_aromatic = true;
        }
        break;
      default: b.order = 1; break;
    }
    mol_.bonds.push_back(b);
  }

  void finish() {
    std::vector<std::vector<double>> orders(mol_.atoms.size());
    for (const Bond& b : mol_.bonds) {
      orders[b.a].push_back(b.order);
      orders[b.b].push_back(b.order);
    }
    for (std::size_t i = 0; i < mol_.atoms.size(); ++i) {
      Atom& a = mol_.atoms[i];
      if (implicit_[i])
        a.h_count = detail::implicit_hydrogens(a.element, a.formal_charge, a.is_aromatic, orders[i], 0);
    }
    perceive_rings_and_conjugation(mol_);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  Molecule mol_;
  std::vector<bool> implicit_;
  std::optional<std::size_t> prev_;
  char pending_bond_ = 0;
  std::size_t bond_offset_ = 0;
  std::vector<std::size_t> branches_;
  std::vector<std::size_t> branch_offsets_;
  std::map<int, PendingRing> rings_;
};

}  // namespace

Molecule parse_smiles(std::string_view text) {
  Molecule mol = SmilesParser(text).parse();
  mol.name = std::string(text);
  return mol;
}

}  // namespace rmat::molio
