#include "hiermol/dataprep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "hiermol/binary_io.hpp"
#include "hiermol/canon.hpp"
#include "hiermol/hash.hpp"
#include "hiermol/smiles.hpp"
#include "hiermol/valence.hpp"

namespace hiermol {

void CleanConfig::validate() const {
  if (min_heavy_atoms < 1) throw std::invalid_argument("min_heavy_atoms must be at least 1");
}

std::string_view reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::Parse: return "parse";
    case RejectReason::Valence: return "valence";
    case RejectReason::Size: return "size";
  }
  return "unknown";
}

CleanResult clean(std::string_view smiles, const CleanConfig& config) {
  config.validate();
  CleanResult out;
  Molecule mol;
  try {
    mol = parse_smiles(smiles);
  } catch (const std::invalid_argument& e) {
    out.reason = RejectReason::Parse;
    out.detail = e.what();
    return out;
  }
  if (mol.empty()) {
    out.reason = RejectReason::Parse;
    out.detail = "empty input";
    return out;
  }
  if (config.keep_largest_fragment && mol.num_fragments() > 1) {
    const auto ids = mol.fragment_ids();
    std::vector<int> heavy(static_cast<std::size_t>(mol.num_fragments()), 0);
    for (int v = 0; v < mol.num_atoms(); ++v)
      if (mol.atom(v).element != Element::H) ++heavy[ids[v]];
    const int keep = static_cast<int>(std::max_element(heavy.begin(), heavy.end()) - heavy.begin());
    std::vector<int> atoms;
    for (int v = 0; v < mol.num_atoms(); ++v)
      if (ids[v] == keep) atoms.push_back(v);
    mol = mol.subgraph(atoms);
  }
  if (auto violations = validate_valence(mol); !violations.empty()) {
    out.reason = RejectReason::Valence;
    out.detail = violations.front().message;
    return out;
  }
  if (const int heavy = mol.heavy_atom_count(); heavy < config.min_heavy_atoms) {
    out.reason = RejectReason::Size;
    out.detail = std::to_string(heavy) + " heavy atoms";
    return out;
  }
  out.smiles = canonicalize(mol).text;
  return out;
}

void CleanReport::add(const CleanResult& r) {
  if (r.accepted())
    ++accepted;
  else
    ++rejected[r.reason];
}

int CleanReport::total() const {
  int n = accepted;
  for (const auto& [reason, count] : rejected) n += count;
  return n;
}

// ---------------------------------------------------------------- loaders --

void for_each_line(std::istream& in, const std::function<void(int, std::string_view)>& f) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    f(number, line);
  }
  if (in.bad()) throw std::runtime_error("read error");
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename Record>
void report(LoadResult<Record>& result, ErrorPolicy policy, int line, const std::string& message) {
  if (policy == ErrorPolicy::Abort) throw DataError("line " + std::to_string(line) + ": " + message, line);
  result.skipped.push_back({line, message});
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace

LoadResult<SmilesRecord> load_smiles(std::istream& in, ErrorPolicy policy) {
  LoadResult<SmilesRecord> result;
  for_each_line(in, [&](int number, std::string_view line) {
    if (blank(line)) return;
    line = trim(line);
    const auto end = std::find_if(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    const std::string smiles(line.begin(), end);
    try {
      parse_smiles(smiles);
    } catch (const std::invalid_argument& e) {
      report(result, policy, number, e.what());
      return;
    }
    result.records.push_back({number, smiles});
  });
  return result;
}

LoadResult<SmilesRecord> load_smiles_file(const std::string& path, ErrorPolicy policy) {
  auto in = open_input(path);
  return load_smiles(in, policy);
}

LoadResult<PairRecord> load_pairs(std::istream& in, ErrorPolicy policy) {
  LoadResult<PairRecord> result;
  for_each_line(in, [&](int number, std::string_view line) {
    if (blank(line)) return;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      report(result, policy, number, "expected smiles<TAB>text");
      return;
    }
    const std::string_view text = trim(line.substr(tab + 1));
    if (text.empty()) {
      report(result, policy, number, "empty text");
      return;
    }
    std::string canonical;
    try {
      canonical = canonicalize(parse_smiles(trim(line.substr(0, tab)))).text;
    } catch (const std::invalid_argument& e) {
      report(result, policy, number, e.what());
      return;
    }
    result.records.push_back({number, std::move(canonical), std::string(text)});
  });
  return result;
}

LoadResult<PairRecord> load_pairs_file(const std::string& path, ErrorPolicy policy) {
  auto in = open_input(path);
  return load_pairs(in, policy);
}

std::vector<std::string> read_lines(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  for_each_line(in, [&](int, std::string_view line) { lines.emplace_back(line); });
  return lines;
}

// ------------------------------------------------------- text embeddings --

Eigen::RowVectorXd text_embed_stub(std::string_view text, int d_text, std::uint64_t seed) {
  if (d_text < 8) throw std::invalid_argument("d_text must be at least 8");
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(d_text);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = Fnv1a{}.u64(seed).text(token).value();
    v(static_cast<Eigen::Index>((h >> 1) % static_cast<std::uint64_t>(d_text))) += (h & 1) ? -1.0 : 1.0;
    token.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)))
      flush();
    else
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  flush();
  const double norm = v.norm();
  if (norm == 0) {
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

void write_sidecar(std::ostream& out, const Eigen::MatrixXf& rows) {
  binio::write_u32(out, static_cast<std::uint32_t>(rows.rows()));
  binio::write_u32(out, static_cast<std::uint32_t>(rows.cols()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r)
    for (Eigen::Index c = 0; c < rows.cols(); ++c) binio::write_f32(out, rows(r, c));
  if (!out) throw std::runtime_error("failed to write sidecar");
}

Eigen::MatrixXd read_sidecar(std::istream& in) {
  const auto count = binio::read_u32(in);
  const auto d = binio::read_u32(in);
  if (static_cast<std::uint64_t>(count) * d > (1ULL << 30)) throw std::runtime_error("corrupt sidecar: too large");
  Eigen::MatrixXd rows(count, d);
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < d; ++c) rows(r, c) = binio::read_f32(in);
    const double norm = rows.row(r).norm();
    if (!std::isfinite(norm) || norm == 0) throw std::runtime_error("sidecar row " + std::to_string(r) + " is zero or non-finite");
    rows.row(r) /= norm;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("corrupt sidecar: trailing bytes");
  return rows;
}

void write_sidecar(const std::string& path, const Eigen::MatrixXf& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_sidecar(out, rows);
}

Eigen::MatrixXd read_sidecar(const std::string& path) {
  auto in = open_input(path);
  return read_sidecar(in);
}

}  // namespace hiermol
