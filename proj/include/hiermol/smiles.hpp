#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hiermol/molecule.hpp"

namespace hiermol {

/// SMILES syntax or semantic error. offset() is the byte position in the
/// input where the problem was detected.
class SmilesError : public std::invalid_argument {
 public:
  SmilesError(const std::string& message, std::size_t offset)
      : std::invalid_argument(message + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Parses the supported SMILES subset: organic and bracket atoms (element,
/// H count, charge), branches, ring closures (digits and %nn), bond symbols
/// - = # :, lowercase aromatic atoms and dot-separated fragments. Stereo
/// markers (/ \ @) are skipped. Isotopes and atom classes are rejected.
///
/// An unspecified bond between two aromatic atoms is aromatic; aromatic bonds
/// that end up outside any ring are demoted to single.
Molecule parse_smiles(std::string_view text);

/// Writes SMILES by depth-first traversal. Every fragment starts at its
/// lowest-ranked atom and neighbors are visited in ascending rank; ring
/// closure digits are allocated smallest-free-first. rank must be a
/// permutation of 0..n-1.
std::string write_smiles(const Molecule& mol, std::span<const int> rank);

/// write_smiles with the identity ranking (input atom order).
std::string write_smiles(const Molecule& mol);

}  // namespace hiermol
