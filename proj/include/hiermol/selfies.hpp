#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hiermol/molecule.hpp"

namespace hiermol {

/// Raised for strings that cannot be tokenized into the supported alphabet
/// and for molecules that cannot be expressed in it.
class SelfiesError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The supported alphabet: [X], [=X], [#X] for X in {B,C,N,O,P,S,F,Cl,Br,I},
/// plus [Branch1] and [Ring1]. Index values are read through a fixed
/// 16-symbol table (docs/selfies_subset.md); any other symbol reads as 0.
std::span<const std::string> selfies_alphabet();

std::vector<std::string> tokenize_selfies(std::string_view text);

/// Total over the alphabet: every token string decodes to a molecule whose
/// atoms stay within their lowest standard valence. Bond orders are capped
/// by the remaining valence of both endpoints, a branch is skipped unless
/// the current atom can keep a bond for the main chain, ring bonds are
/// skipped when either end is saturated, and a chain stops once its current
/// atom has no valence left.
Molecule decode_selfies(std::string_view text);

/// Encodes a single-fragment molecule (aromatic input is kekulized first).
/// Throws SelfiesError for charges, bracket hydrogens that differ from the
/// lowest valence, multi-fragment input, or branches/ring spans longer than
/// one index symbol can express.
std::string encode_selfies(const Molecule& mol);

}  // namespace hiermol
