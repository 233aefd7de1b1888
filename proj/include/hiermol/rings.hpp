#pragma once

#include <vector>

#include "hiermol/molecule.hpp"

namespace hiermol {

/// Every simple cycle with at most max_size atoms, each listed once as an
/// atom sequence starting at its smallest atom index.
std::vector<std::vector<int>> simple_cycles(const Molecule& mol, int max_size);

/// Size of the smallest cycle through each bond; 0 for acyclic bonds.
std::vector<int> smallest_ring_through_bond(const Molecule& mol);

/// Cyclomatic number: bonds - atoms + fragments.
int ring_count(const Molecule& mol);

}  // namespace hiermol
