#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "rmat/error.hpp"
#include "rmat/log.hpp"
#include "rmat/molio.hpp"
#include "valence.hpp"

namespace rmat::molio {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

int fixed_int(const std::string& line, std::size_t col, std::size_t width, std::size_t lineno,
              const char* what) {
  if (line.size() < col + 1) throw ParseError(std::string("missing ") + what, lineno);
  const std::string field = trim(std::string_view(line).substr(col, width));
  try {
    std::size_t used = 0;
    const int v = std::stoi(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("malformed ") + what + " '" + field + "'", lineno);
  }
}

double parse_double(const std::string& tok, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("malformed coordinate '" + tok + "'", lineno);
  }
}

struct RawAtom {
  std::string symbol;
  Vec3 pos;
  int charge = 0;
};

// lines are the record's lines; first_line is the 1-based stream line of lines[0].
Molecule parse_record(const std::vector<std::string>& lines, std::size_t first_line,
                      std::vector<std::string>& warnings) {
  if (lines.size() < 4) throw ParseError("truncated header block", first_line + lines.size());
  const std::size_t counts_line = first_line + 3;
  const std::string& counts = lines[3];
  if (counts.find("V3000") != std::string::npos)
    throw ParseError("V3000 records are not supported", counts_line);
  const int natoms = fixed_int(counts, 0, 3, counts_line, "atom count");
  const int nbonds = fixed_int(counts, 3, 3, counts_line, "bond count");
  if (natoms < 0 || nbonds < 0) throw ParseError("negative counts", counts_line);
  if (lines.size() < 4 + static_cast<std::size_t>(natoms) + static_cast<std::size_t>(nbonds))
    throw ParseError("truncated atom/bond block", first_line + lines.size());

  std::vector<RawAtom> raw(natoms);
  for (int i = 0; i < natoms; ++i) {
    const std::size_t lineno = counts_line + 1 + i;
    const auto tok = split_ws(lines[4 + i]);
    if (tok.size() < 4) throw ParseError("truncated atom line", lineno);
    raw[i].pos = {parse_double(tok[0], lineno), parse_double(tok[1], lineno),
                  parse_double(tok[2], lineno)};
    raw[i].symbol = tok[3];
  }

  struct RawBond {
    std::size_t a, b;
    int type;
  };
  std::vector<RawBond> rbonds;
  for (int k = 0; k < nbonds; ++k) {
    const std::size_t lineno = counts_line + 1 + natoms + k;
    const std::string& line = lines[4 + natoms + k];
    const int a = fixed_int(line, 0, 3, lineno, "bond atom");
    const int b = fixed_int(line, 3, 3, lineno, "bond atom");
    const int type = fixed_int(line, 6, 3, lineno, "bond type");
    if (a < 1 || b < 1 || a > natoms || b > natoms)
      throw ParseError("bond index out of range", lineno);
    if (type < 1 || type > 4) throw ParseError("unsupported bond type " + std::to_string(type), lineno);
    rbonds.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1), type});
  }

  for (std::size_t li = 4 + natoms + nbonds; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.rfind("M  END", 0) == 0) break;
    if (line.rfind("M  CHG", 0) == 0) {
      const auto tok = split_ws(line.substr(6));
      if (tok.empty()) throw ParseError("malformed CHG line", first_line + li);
      const int count = std::stoi(tok[0]);
      if (static_cast<int>(tok.size()) < 1 + 2 * count)
        throw ParseError("truncated CHG line", first_line + li);
      for (int c = 0; c < count; ++c) {
        const int idx = std::stoi(tok[1 + 2 * c]);
        if (idx < 1 || idx > natoms) throw ParseError("CHG atom index out of range", first_line + li);
        raw[idx - 1].charge = std::stoi(tok[2 + 2 * c]);
      }
    }
  }

  // Fold hydrogens that hang off exactly one heavy atom.
  std::vector<int> degree(natoms, 0);
  for (const RawBond& b : rbonds) ++degree[b.a], ++degree[b.b];
  std::vector<bool> folded(natoms, false);
  std::vector<int> folded_h(natoms, 0);
  for (const RawBond& b : rbonds) {
    for (auto [h, heavy] : {std::pair{b.a, b.b}, std::pair{b.b, b.a}}) {
      if (raw[h].symbol == "H" && raw[heavy].symbol != "H" && degree[h] == 1 && b.type == 1) {
        folded[h] = true;
        ++folded_h[heavy];
      }
    }
  }
  std::vector<std::size_t> new_index(natoms, 0);
  Molecule mol;
  mol.name = trim(lines[0]);
  std::vector<Vec3> coords;
  for (int i = 0; i < natoms; ++i) {
    if (folded[i]) continue;
    new_index[i] = mol.atoms.size();
    Atom a;
    a.symbol = raw[i].symbol;
    a.element = element_from_symbol(raw[i].symbol);
    a.formal_charge = raw[i].charge;
    if (clamp_charge(a))
      warnings.push_back("record '" + mol.name + "': formal charge clamped on atom " +
                         std::to_string(i + 1));
    mol.atoms.push_back(a);
    coords.push_back(raw[i].pos);
  }
  for (const RawBond& rb : rbonds) {
    if (folded[rb.a] || folded[rb.b]) continue;
    Bond b;
    b.a = new_index[rb.a];
    b.b = new_index[rb.b];
    b.order = rb.type == 4 ? 1.5 : rb.type;
    b.is_aromatic = rb.type == 4;
    if (mol.bond_between(b.a, b.b)) throw ParseError("duplicate bond", counts_line);
    if (b.is_aromatic) mol.atoms[b.a].is_aromatic = mol.atoms[b.b].is_aromatic = true;
    mol.bonds.push_back(b);
  }

  std::vector<std::vector<double>> orders(mol.atoms.size());
  for (const Bond& b : mol.bonds) {
    orders[b.a].push_back(b.order);
    orders[b.b].push_back(b.order);
  }
  std::size_t heavy = 0;
  for (int i = 0; i < natoms; ++i) {
    if (folded[i]) continue;
    Atom& a = mol.atoms[heavy];
    a.h_count = folded_h[i] + detail::implicit_hydrogens(a.element, a.formal_charge, a.is_aromatic,
                                                         orders[heavy], folded_h[i]);
    ++heavy;
  }

  // An all-zero coordinate block means "no geometry" (e.g. written from SMILES).
  const bool all_zero = std::all_of(coords.begin(), coords.end(),
                                    [](const Vec3& v) { return v == Vec3{}; });
  if (!(all_zero && coords.size() > 1)) mol.coords = std::move(coords);
  perceive_rings_and_conjugation(mol);
  try {
    validate(mol);
  } catch (const DataError& e) {
    throw ParseError(e.what(), first_line);
  }
  return mol;
}

}  // namespace

SdfReadResult parse_sdf(std::istream& in) {
  SdfReadResult result;
  std::vector<std::string> block;
  std::size_t lineno = 0;
  std::size_t block_start = 1;
  std::size_t record = 0;

  auto flush = [&] {
    const bool blank = std::all_of(block.begin(), block.end(),
                                   [](const std::string& l) { return trim(l).empty(); });
    if (!blank) {
      try {
        result.molecules.push_back(parse_record(block, block_start, result.warnings));
      } catch (const ParseError& e) {
        result.errors.push_back({record, e.position(), e.what()});
      } catch (const std::exception& e) {
        result.errors.push_back({record, block_start, e.what()});
      }
      ++record;
    }
    block.clear();
    block_start = lineno + 1;
  };

  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line) == "$$$$") {
      flush();
      continue;
    }
    block.push_back(line);
  }
  flush();
  for (const auto& w : result.warnings) warn(w);
  return result;
}

SdfReadResult parse_sdf(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_sdf(in);
}

std::string write_sdf(const std::vector<Molecule>& mols) {
  std::string out;
  char buf[128];
  for (const Molecule& mol : mols) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < mol.atoms.size(); ++i)
      if (mol.atoms[i].element != Element::Dummy) keep.push_back(i);
    std::size_t nb = 0;
    for (const Bond& b : mol.bonds)
      if (b.a < keep.size() && b.b < keep.size()) ++nb;
    out += mol.name + "\n  rmat\n\n";
    std::snprintf(buf, sizeof buf, "%3zu%3zu  0  0  0  0  0  0  0  0999 V2000\n", keep.size(), nb);
    out += buf;
    for (std::size_t i : keep) {
      const Vec3 p = mol.coords ? (*mol.coords)[i] : Vec3{};
      std::snprintf(buf, sizeof buf, "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                    p.x, p.y, p.z, mol.atoms[i].symbol.c_str());
      out += buf;
    }
    for (const Bond& b : mol.bonds) {
      if (b.a >= keep.size() || b.b >= keep.size()) continue;
      const int type = b.order == 1.5 ? 4 : static_cast<int>(b.order);
      std::snprintf(buf, sizeof buf, "%3zu%3zu%3d  0  0  0  0\n", b.a + 1, b.b + 1, type);
      out += buf;
    }
    std::vector<std::pair<std::size_t, int>> charged;
    for (std::size_t i : keep)
      if (mol.atoms[i].formal_charge != 0) charged.emplace_back(i + 1, mol.atoms[i].formal_charge);
    for (std::size_t s = 0; s < charged.size(); s += 8) {
      const std::size_t e = std::min(charged.size(), s + 8);
      std::snprintf(buf, sizeof buf, "M  CHG%3zu", e - s);
      out += buf;
      for (std::size_t k = s; k < e; ++k) {
        std::snprintf(buf, sizeof buf, " %3zu %3d", charged[k].first, charged[k].second);
        out += buf;
      }
      out += '\n';
    }
    out += "M  END\n$$$$\n";
  }
  return out;
}

}  // namespace rmat::molio
