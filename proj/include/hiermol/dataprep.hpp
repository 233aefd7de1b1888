#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hiermol {

// --------------------------------------------------------------- cleaning --

struct CleanConfig {
  int min_heavy_atoms = 5;
  bool keep_largest_fragment = true;

  void validate() const;
};

enum class RejectReason : std::uint8_t { Parse, Valence, Size };

std::string_view reject_reason_name(RejectReason r);

struct CleanResult {
  std::optional<std::string> smiles;  ///< canonical SMILES when accepted
  RejectReason reason = RejectReason::Parse;
  std::string detail;

  bool accepted() const { return smiles.has_value(); }
};

/// Parses, keeps the fragment with the most heavy atoms (ties go to the
/// first fragment in input order), then rejects on valence errors or fewer
/// than min_heavy_atoms heavy atoms. Charges are left as written.
CleanResult clean(std::string_view smiles, const CleanConfig& config = {});

struct CleanReport {
  int accepted = 0;
  std::map<RejectReason, int> rejected;

  void add(const CleanResult& r);
  int total() const;
};

// ---------------------------------------------------------------- loaders --

enum class ErrorPolicy : std::uint8_t { Skip, Abort };

/// A malformed input line under the abort policy.
class DataError : public std::invalid_argument {
 public:
  DataError(const std::string& message, int line) : std::invalid_argument(message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct LineIssue {
  int line;  ///< 1-based
  std::string message;
};

struct SmilesRecord {
  int line;
  std::string smiles;  ///< as written
};

struct PairRecord {
  int line;
  std::string smiles;  ///< canonical
  std::string text;
};

template <typename Record>
struct LoadResult {
  std::vector<Record> records;
  std::vector<LineIssue> skipped;
};

/// Calls f(line_number, line) for every line with the trailing '\r' removed.
void for_each_line(std::istream& in, const std::function<void(int, std::string_view)>& f);

/// One SMILES per line; anything after the first whitespace is ignored.
/// Blank lines are neither records nor errors. Lines that do not parse are
/// skipped and reported, or abort with a DataError.
LoadResult<SmilesRecord> load_smiles(std::istream& in, ErrorPolicy policy = ErrorPolicy::Abort);
LoadResult<SmilesRecord> load_smiles_file(const std::string& path, ErrorPolicy policy = ErrorPolicy::Abort);

/// Tab-separated "smiles<TAB>text" lines. A line is malformed when it lacks
/// a tab, its SMILES does not parse or its text is blank.
LoadResult<PairRecord> load_pairs(std::istream& in, ErrorPolicy policy = ErrorPolicy::Abort);
LoadResult<PairRecord> load_pairs_file(const std::string& path, ErrorPolicy policy = ErrorPolicy::Abort);

/// Reads a whole text file as lines (no trailing '\r'), keeping blank lines.
std::vector<std::string> read_lines(const std::string& path);

// ------------------------------------------------------- text embeddings --

/// Hashed signed bag of words: lowercase whitespace tokens, each hashed
/// with FNV-1a (seeded) to one coordinate and a sign, summed and
/// L2-normalized. Text with no tokens, or whose tokens cancel, maps to the
/// first basis vector. Throws std::invalid_argument when d_text < 8.
Eigen::RowVectorXd text_embed_stub(std::string_view text, int d_text, std::uint64_t seed = 0);

/// Sidecar embedding file: u32 count, u32 d_text, then count*d_text
/// little-endian float32 values, one row per record in input order.
void write_sidecar(std::ostream& out, const Eigen::MatrixXf& rows);
/// Rows are renormalized to unit length; all-zero or non-finite rows throw.
Eigen::MatrixXd read_sidecar(std::istream& in);
void write_sidecar(const std::string& path, const Eigen::MatrixXf& rows);
Eigen::MatrixXd read_sidecar(const std::string& path);

}  // namespace hiermol
