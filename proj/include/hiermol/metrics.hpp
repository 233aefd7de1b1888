#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hiermol/molecule.hpp"

namespace hiermol {

// ------------------------------------------------------------ fingerprints --

enum class FingerprintKind : std::uint8_t { Morgan, Path, StructuralKeys };

class Fingerprint {
 public:
  /// parameter is the Morgan radius, the maximum path length in bonds, or 0
  /// for structural keys.
  Fingerprint(FingerprintKind kind, int parameter, int nbits);

  FingerprintKind kind() const { return kind_; }
  int parameter() const { return parameter_; }
  int size() const { return nbits_; }

  void set(std::uint64_t bit) { words_[(bit % nbits_) / 64] |= 1ULL << ((bit % nbits_) % 64); }
  bool test(int bit) const { return (words_[bit / 64] >> (bit % 64)) & 1ULL; }
  int count() const;
  std::vector<int> on_bits() const;

  friend int intersection_count(const Fingerprint& a, const Fingerprint& b);
  friend int union_count(const Fingerprint& a, const Fingerprint& b);
  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  FingerprintKind kind_;
  int parameter_;
  int nbits_;
  std::vector<std::uint64_t> words_;
};

/// Circular environment fingerprint. Every atom starts from a hash of
/// (atomic number, heavy degree, formal charge, total H, aromatic); each
/// round rehashes the atom's id followed by its neighbors' (bond code, id)
/// pairs in ascending order. Ids from every round 0..radius set a bit.
/// Aromaticity is normalized first so Kekulé and aromatic inputs agree.
/// Duplicate environments are not removed.
Fingerprint morgan_fp(const Molecule& mol, int radius = 2, int nbits = 2048);

/// Canonical linear patterns: single atoms and every simple path of 1..max_len
/// bonds, written as alternating atom symbols (lowercase when aromatic) and
/// bond symbols (- = # :), in whichever direction sorts first.
std::set<std::string> path_patterns(const Molecule& mol, int max_len = 7);
Fingerprint path_fp(const Molecule& mol, int max_len = 7, int nbits = 2048);

inline constexpr int kNumStructuralKeys = 32;
/// Short names of the structural keys in bit order; see docs/structural_keys.md.
const std::vector<std::string_view>& structural_key_names();
Fingerprint structural_keys_fp(const Molecule& mol);

/// |A & B| / |A | B|, 1.0 when both are empty. Throws std::invalid_argument
/// when kind, parameter or width differ.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// ---------------------------------------------------- string-level metrics --

/// Unit-cost edit distance over bytes.
int levenshtein(std::string_view a, std::string_view b);

enum class MoleculeFormat : std::uint8_t { Smiles, Selfies };

/// Parses SMILES or decodes SELFIES; throws on syntax errors.
Molecule read_molecule(std::string_view text, MoleculeFormat format);

/// 1 iff the text parses and passes the valence check.
int validity(std::string_view text, MoleculeFormat format = MoleculeFormat::Smiles);

/// 1 iff both texts parse and have the same canonical SMILES.
int exact_match(std::string_view pred, std::string_view truth, MoleculeFormat format = MoleculeFormat::Smiles);

std::vector<std::string> whitespace_tokens(std::string_view text);
std::vector<std::string> character_tokens(std::string_view text);

/// Sentence BLEU: brevity penalty times the geometric mean of clipped n-gram
/// precisions for orders 1..n. Orders longer than the candidate are left out
/// of the mean. Throws std::invalid_argument on an empty reference.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int n);

/// F1 of clipped n-gram overlap. 1.0 when neither side has an n-gram.
double rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int n);

/// F1 from the longest common subsequence.
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

// ------------------------------------------------------- corpus evaluation --

struct MoleculeRecord {
  double bleu = 0;
  int exact = 0;
  int levenshtein = 0;
  int validity = 0;
  double maccs = 0;
  double rdk = 0;
  double morgan = 0;
};

struct TextRecord {
  double bleu2 = 0;
  double bleu4 = 0;
  double rouge1 = 0;
  double rouge2 = 0;
  double rouge_l = 0;
};

/// Column names of the summary tables, in order.
const std::vector<std::string>& molecule_columns();
const std::vector<std::string>& text_columns();

struct MoleculeReport {
  std::vector<MoleculeRecord> records;
  /// Means over all records, in molecule_columns() order. Similarities of
  /// unparseable predictions count as zero.
  std::vector<double> summary;
};

struct TextReport {
  std::vector<TextRecord> records;
  std::vector<double> summary;
};

/// Per-line molecule metrics. BLEU is per-character BLEU-4. Throws
/// std::invalid_argument when the line counts differ or the input is empty.
MoleculeRecord evaluate_molecule(std::string_view pred, std::string_view truth, MoleculeFormat format);
MoleculeReport evaluate_molecules(const std::vector<std::string>& pred, const std::vector<std::string>& truth,
                                  MoleculeFormat format = MoleculeFormat::Smiles, int workers = 1);

/// Per-line caption metrics over whitespace tokens.
TextRecord evaluate_text(std::string_view pred, std::string_view truth);
TextReport evaluate_texts(const std::vector<std::string>& pred, const std::vector<std::string>& truth, int workers = 1);

/// Header line plus one row of means, six decimals.
void write_summary_csv(std::ostream& out, const std::vector<std::string>& columns, const std::vector<double>& values);
/// One JSON object per line, keyed by column name.
void write_records_jsonl(std::ostream& out, const MoleculeReport& report);
void write_records_jsonl(std::ostream& out, const TextReport& report);

}  // namespace hiermol
