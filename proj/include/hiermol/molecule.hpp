#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace hiermol {

// Organic elements plus hydrogen, followed by the bracket-only counter-ion
// metals that cleaning has to be able to read before it strips them.
enum class Element : std::uint8_t { B, C, N, O, P, S, F, Cl, Br, I, H, Li, Na, K, Mg, Ca };

inline constexpr int kNumElements = 16;

int atomic_number(Element e);
std::string_view element_symbol(Element e);
std::optional<Element> element_from_symbol(std::string_view symbol);
/// Elements that may appear without brackets in SMILES.
bool is_organic_subset(Element e);
/// Elements that may be written in lowercase (aromatic) form.
bool can_be_aromatic(Element e);

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

inline constexpr int kNumBondOrders = 4;

/// Integer code used in hashing and canonical refinement: 1, 2, 3, 4 (aromatic).
inline int bond_code(BondOrder o) { return static_cast<int>(o) + 1; }

/// Bond order as a valence contribution with aromatic counted as one.
inline int bond_valence(BondOrder o) { return o == BondOrder::Aromatic ? 1 : static_cast<int>(o) + 1; }

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  bool aromatic = false;
  /// Resolved hydrogen count: the bracket value, or the implicit count from
  /// the default valence table for organic-subset atoms.
  int hydrogens = 0;

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == begin ? end : begin; }
};

struct Neighbor {
  int atom;
  int bond;
};

/// Thrown when a graph edit would break a Molecule invariant.
class MoleculeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Undirected labelled graph of atoms and bonds. Adjacency is maintained
/// incrementally and is always symmetric; neighbor lists are in bond
/// insertion order.
class Molecule {
 public:
  int add_atom(const Atom& atom);
  /// Adds a bond; throws MoleculeError on self-loops, out-of-range endpoints,
  /// duplicate atom pairs, or an aromatic bond touching a non-aromatic atom.
  int add_bond(int a, int b, BondOrder order);
  void set_bond_order(int bond, BondOrder order);

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  bool empty() const { return atoms_.empty(); }

  const Atom& atom(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }
  Atom& atom(int i) { return atoms_.at(static_cast<std::size_t>(i)); }
  const Bond& bond(int i) const { return bonds_.at(static_cast<std::size_t>(i)); }
  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }
  std::span<const Neighbor> neighbors(int atom) const { return adjacency_.at(static_cast<std::size_t>(atom)); }

  /// Bond index joining a and b, or -1.
  int bond_between(int a, int b) const;

  int degree(int atom) const { return static_cast<int>(neighbors(atom).size()); }
  /// Number of non-hydrogen neighbors.
  int heavy_degree(int atom) const;
  /// Hydrogen count plus explicit hydrogen-atom neighbors.
  int total_hydrogens(int atom) const;
  int heavy_atom_count() const;

  /// Connected-component id per atom, numbered in order of first atom.
  std::vector<int> fragment_ids() const;
  int num_fragments() const;

  /// True for bonds that lie on a cycle (i.e. are not bridges).
  std::vector<bool> ring_bonds() const;
  std::vector<bool> ring_atoms() const;

  /// Copy with atom i moved to position new_index[i]. Bond list order follows
  /// the original bond order.
  Molecule permuted(std::span<const int> new_index) const;
  /// Induced subgraph on the given atoms (kept in ascending original order).
  Molecule subgraph(std::span<const int> atoms) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

}  // namespace hiermol
