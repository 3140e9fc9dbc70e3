#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rmat::molio {

// Atomic identity slots of the atom featurization, in column order.
enum class Element : std::uint8_t { B, N, C, O, F, P, S, Cl, Br, I, Dummy, Other };

inline constexpr std::size_t kElementCount = 12;

Element element_from_symbol(std::string_view symbol);
std::string_view element_symbol(Element e);

struct Atom {
  Element element = Element::C;
  std::string symbol = "C";  // original symbol, kept for Other elements
  int formal_charge = 0;
  int h_count = 0;  // attached hydrogens, implicit and folded explicit
  bool is_aromatic = false;
  bool in_ring = false;
};

struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  double order = 1.0;  // one of 1, 1.5, 2, 3
  bool is_aromatic = false;
  bool is_conjugated = false;
  bool in_ring = false;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::optional<std::vector<Vec3>> coords;
  std::string name;

  std::size_t size() const { return atoms.size(); }
  bool has_dummy() const;
  // Index of the bond joining i and j, if any.
  std::optional<std::size_t> bond_between(std::size_t i, std::size_t j) const;
  std::vector<std::vector<std::size_t>> adjacency_lists() const;
};

// Neighborhood-order codes, row-major n x n.
struct OrderMatrix {
  std::size_t n = 0;
  std::vector<std::uint8_t> entries;

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
};

// Structural checks (indices, duplicate bonds, aromatic flags, coordinates).
// Throws DataError on the first violation.
void validate(const Molecule& mol);

// Recomputes ring membership (bridge-free bonds) and the conjugation flag
// of every bond, plus atom in_ring.
void perceive_rings_and_conjugation(Molecule& mol);

// Clamps formal charge to [-5, 5]. Returns true when clamping happened.
bool clamp_charge(Atom& atom);

// All-pairs BFS hop counts; unreachable pairs get -1.
std::vector<int> hop_counts(const Molecule& mol);

OrderMatrix neighborhood_orders(const Molecule& mol);

// Appends the dummy node. Its distance to every atom is the cutoff, applied
// during featurization; no coordinate is stored for it.
Molecule add_dummy_node(const Molecule& mol, double cutoff);

Molecule permute_atoms(const Molecule& mol, const std::vector<std::size_t>& perm);

Molecule parse_smiles(std::string_view text);

struct RecordError {
  std::size_t record = 0;  // 0-based record index
  std::size_t line = 0;    // 1-based line in the stream
  std::string message;
};

struct SdfReadResult {
  std::vector<Molecule> molecules;
  std::vector<RecordError> errors;
  std::vector<std::string> warnings;
};

SdfReadResult parse_sdf(std::istream& in);
SdfReadResult parse_sdf(std::string_view text);
std::string write_sdf(const std::vector<Molecule>& mols);

// Dataset CSV: `smiles` or `sdf_path` column, `extra_*` feature columns,
// every other column is a label. Empty label cells are missing labels.
struct DatasetRow {
  Molecule molecule;
  std::vector<std::optional<double>> labels;
  std::vector<double> extra;
};

struct Dataset {
  std::vector<std::string> label_names;
  std::vector<std::string> extra_names;
  std::vector<DatasetRow> rows;
  std::vector<RecordError> errors;
};

Dataset read_dataset_csv(const std::string& path);
Dataset parse_dataset_csv(std::string_view text, const std::string& base_dir = ".");

}  // namespace rmat::molio
