#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hiermol/molecule.hpp"

namespace hiermol {

/// Normalization rule-set version embedded in docs/canonical_smiles.md.
/// Bump whenever canonical strings could change.
inline constexpr int kCanonicalVersion = 1;

/// Marks 5- and 6-membered rings of C/N/O/S whose pi-electron count is six
/// as aromatic (atoms and ring bonds). Ring atoms contribute one electron per
/// in-ring double or existing aromatic bond and two for a lone-pair donor
/// (N with three connections, O, S); any exocyclic non-aromatic double bond
/// disqualifies the ring. Repeats until no ring changes, so fused kekulé
/// systems converge regardless of which ring is seen first.
Molecule normalize_aromaticity(Molecule mol);

/// Assigns alternating single/double bonds to aromatic bonds and clears the
/// aromatic flags. Returns nullopt when no Kekulé structure exists.
std::optional<Molecule> kekulize(const Molecule& mol);

/// Canonical atom ranking: iterative neighborhood refinement over
/// (atomic number, heavy degree, charge, total H, aromatic) with bond orders,
/// then tie breaking that promotes the lowest-index atom of the smallest
/// ambiguous class. Returns a permutation of 0..n-1.
std::vector<int> canonical_ranks(const Molecule& mol);

struct CanonicalForm {
  std::string text;

  friend bool operator==(const CanonicalForm&, const CanonicalForm&) = default;
};

/// Aromaticity normalization followed by rank-ordered SMILES emission.
CanonicalForm canonicalize(const Molecule& mol);

/// Label-preserving (element, charge, aromatic) and bond-order-preserving
/// graph isomorphism by backtracking. Throws std::length_error when either
/// molecule has more than max_atoms atoms.
bool is_isomorphic(const Molecule& a, const Molecule& b, int max_atoms = 16);

}  // namespace hiermol
