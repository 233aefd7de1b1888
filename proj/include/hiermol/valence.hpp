#pragma once

#include <span>
#include <string>
#include <vector>

#include "hiermol/molecule.hpp"

namespace hiermol {

/// Allowed total valences for an element in a given charge state. Empty when
/// the charge state is not in the table. See docs/valence.md.
std::span<const int> allowed_valences(Element e, int formal_charge);

/// Hydrogen count implied by the SMILES organic-subset rules for an atom
/// written without brackets. Aromatic atoms use their lowest valence and
/// reserve one unit for the ring pi system.
int default_implicit_hydrogens(const Molecule& mol, int atom);

struct ValenceViolation {
  int atom;
  int valence;  ///< computed total (bonds + hydrogens)
  std::string message;
};

/// Per-atom valence check against the table. Aromatic bonds contribute one
/// each; an aromatic atom passes if either its total or its total plus one
/// pi unit is allowed.
std::vector<ValenceViolation> validate_valence(const Molecule& mol);

}  // namespace hiermol
