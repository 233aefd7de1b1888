#include "hiermol/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "hiermol/canon.hpp"
#include "hiermol/hash.hpp"
#include "hiermol/parallel.hpp"
#include "hiermol/rings.hpp"
#include "hiermol/selfies.hpp"
#include "hiermol/smiles.hpp"
#include "hiermol/valence.hpp"

namespace hiermol {

Fingerprint::Fingerprint(FingerprintKind kind, int parameter, int nbits)
    : kind_(kind), parameter_(parameter), nbits_(nbits) {
  if (nbits < 1) throw std::invalid_argument("fingerprint width must be positive");
  words_.assign(static_cast<std::size_t>((nbits + 63) / 64), 0);
}

int Fingerprint::count() const {
  int n = 0;
  for (auto w : words_) n += std::popcount(w);
  return n;
}

std::vector<int> Fingerprint::on_bits() const {
  std::vector<int> out;
  for (int i = 0; i < nbits_; ++i)
    if (test(i)) out.push_back(i);
  return out;
}

int intersection_count(const Fingerprint& a, const Fingerprint& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) n += std::popcount(a.words_[i] & b.words_[i]);
  return n;
}

int union_count(const Fingerprint& a, const Fingerprint& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) n += std::popcount(a.words_[i] | b.words_[i]);
  return n;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.kind() != b.kind() || a.parameter() != b.parameter() || a.size() != b.size())
    throw std::invalid_argument("tanimoto needs fingerprints of the same kind and width");
  const int u = union_count(a, b);
  return u == 0 ? 1.0 : static_cast<double>(intersection_count(a, b)) / u;
}

// ------------------------------------------------------------------ morgan --

Fingerprint morgan_fp(const Molecule& input, int radius, int nbits) {
  if (radius < 0) throw std::invalid_argument("radius must be non-negative");
  const Molecule mol = normalize_aromaticity(input);
  Fingerprint fp(FingerprintKind::Morgan, radius, nbits);
  const int n = mol.num_atoms();
  std::vector<std::uint64_t> ids(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const Atom& a = mol.atom(v);
    ids[v] = Fnv1a{}
                 .i32(atomic_number(a.element))
                 .i32(mol.heavy_degree(v))
                 .i32(a.formal_charge)
                 .i32(mol.total_hydrogens(v))
                 .i32(a.aromatic ? 1 : 0)
                 .value();
    fp.set(ids[v]);
  }
  std::vector<std::pair<int, std::uint64_t>> env;
  for (int round = 1; round <= radius; ++round) {
    std::vector<std::uint64_t> next(ids.size());
    for (int v = 0; v < n; ++v) {
      env.clear();
      for (const auto& nb : mol.neighbors(v)) env.emplace_back(bond_code(mol.bond(nb.bond).order), ids[nb.atom]);
      std::sort(env.begin(), env.end());
      Fnv1a h;
      h.u64(ids[v]);
      for (const auto& [code, id] : env) h.i32(code).u64(id);
      next[v] = h.value();
      fp.set(next[v]);
    }
    ids = std::move(next);
  }
  return fp;
}

// -------------------------------------------------------------------- path --

namespace {

std::string atom_symbol(const Atom& a) {
  std::string s(element_symbol(a.element));
  if (a.aromatic) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

char bond_symbol(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return '-';
    case BondOrder::Double: return '=';
    case BondOrder::Triple: return '#';
    case BondOrder::Aromatic: return ':';
  }
  return '?';
}

}  // namespace

std::set<std::string> path_patterns(const Molecule& input, int max_len) {
  if (max_len < 0) throw std::invalid_argument("max path length must be non-negative");
  const Molecule mol = normalize_aromaticity(input);
  const int n = mol.num_atoms();
  std::vector<std::string> symbols;
  for (int v = 0; v < n; ++v) symbols.push_back(atom_symbol(mol.atom(v)));

  std::set<std::string> out;
  std::vector<int> atoms;
  std::vector<char> bonds;
  std::vector<bool> on_path(static_cast<std::size_t>(n), false);
  auto emit = [&] {
    std::string fwd = symbols[atoms.front()], rev = symbols[atoms.back()];
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      fwd += bonds[i];
      fwd += symbols[atoms[i + 1]];
      rev += bonds[bonds.size() - 1 - i];
      rev += symbols[atoms[atoms.size() - 2 - i]];
    }
    out.insert(std::min(fwd, rev));
  };
  std::function<void(int)> extend = [&](int v) {
    emit();
    if (static_cast<int>(bonds.size()) == max_len) return;
    for (const auto& nb : mol.neighbors(v)) {
      if (on_path[nb.atom]) continue;
      on_path[nb.atom] = true;
      atoms.push_back(nb.atom);
      bonds.push_back(bond_symbol(mol.bond(nb.bond).order));
      extend(nb.atom);
      atoms.pop_back();
      bonds.pop_back();
      on_path[nb.atom] = false;
    }
  };
  for (int v = 0; v < n; ++v) {
    on_path[v] = true;
    atoms.assign(1, v);
    bonds.clear();
    extend(v);
    on_path[v] = false;
  }
  return out;
}

Fingerprint path_fp(const Molecule& mol, int max_len, int nbits) {
  Fingerprint fp(FingerprintKind::Path, max_len, nbits);
  for (const auto& p : path_patterns(mol, max_len)) fp.set(fnv1a(p));
  return fp;
}

// --------------------------------------------------------- structural keys --

namespace {

struct KeyContext {
  const Molecule& mol;
  std::vector<int> ring_size;  // per bond, 0 when acyclic
  std::vector<bool> ring_atom;
};

bool is_halogen(Element e) { return e == Element::F || e == Element::Cl || e == Element::Br || e == Element::I; }

bool any_atom(const KeyContext& k, const std::function<bool(int, const Atom&)>& pred) {
  for (int v = 0; v < k.mol.num_atoms(); ++v)
    if (pred(v, k.mol.atom(v))) return true;
  return false;
}

bool any_bond(const KeyContext& k, const std::function<bool(const Bond&, const Atom&, const Atom&)>& pred) {
  for (const auto& b : k.mol.bonds())
    if (pred(b, k.mol.atom(b.begin), k.mol.atom(b.end)) || pred(b, k.mol.atom(b.end), k.mol.atom(b.begin))) return true;
  return false;
}

bool has_ring_size(const KeyContext& k, int lo, int hi) {
  return std::any_of(k.ring_size.begin(), k.ring_size.end(), [&](int s) { return s >= lo && s <= hi; });
}

bool has_element(const KeyContext& k, Element e) {
  return any_atom(k, [&](int, const Atom& a) { return a.element == e; });
}

bool bond_between(const KeyContext& k, BondOrder order, Element x, Element y) {
  return any_bond(k, [&](const Bond& b, const Atom& p, const Atom& q) { return b.order == order && p.element == x && q.element == y; });
}

struct Key {
  std::string_view name;
  bool (*test)(const KeyContext&);
};

const Key kKeys[kNumStructuralKeys] = {
    {"aromatic_ring", [](const KeyContext& k) { return any_atom(k, [](int, const Atom& a) { return a.aromatic; }); }},
    {"ring_3", [](const KeyContext& k) { return has_ring_size(k, 3, 3); }},
    {"ring_4", [](const KeyContext& k) { return has_ring_size(k, 4, 4); }},
    {"ring_5", [](const KeyContext& k) { return has_ring_size(k, 5, 5); }},
    {"ring_6", [](const KeyContext& k) { return has_ring_size(k, 6, 6); }},
    {"ring_7_plus", [](const KeyContext& k) { return has_ring_size(k, 7, 1 << 30); }},
    {"two_or_more_rings", [](const KeyContext& k) { return ring_count(k.mol) >= 2; }},
    {"ring_chain_attachment",
     [](const KeyContext& k) {
       for (int i = 0; i < k.mol.num_bonds(); ++i) {
         const Bond& b = k.mol.bond(i);
         if (k.ring_size[i] == 0 && k.ring_atom[b.begin] != k.ring_atom[b.end]) return true;
       }
       return false;
     }},
    {"carbon", [](const KeyContext& k) { return has_element(k, Element::C); }},
    {"nitrogen", [](const KeyContext& k) { return has_element(k, Element::N); }},
    {"oxygen", [](const KeyContext& k) { return has_element(k, Element::O); }},
    {"sulfur", [](const KeyContext& k) { return has_element(k, Element::S); }},
    {"phosphorus", [](const KeyContext& k) { return has_element(k, Element::P); }},
    {"halogen", [](const KeyContext& k) { return any_atom(k, [](int, const Atom& a) { return is_halogen(a.element); }); }},
    {"fluorine", [](const KeyContext& k) { return has_element(k, Element::F); }},
    {"chlorine", [](const KeyContext& k) { return has_element(k, Element::Cl); }},
    {"bromine_or_iodine", [](const KeyContext& k) { return has_element(k, Element::Br) || has_element(k, Element::I); }},
    {"carbonyl", [](const KeyContext& k) { return bond_between(k, BondOrder::Double, Element::C, Element::O); }},
    {"hydroxyl", [](const KeyContext& k) {
       return any_atom(k, [&](int v, const Atom& a) { return a.element == Element::O && k.mol.total_hydrogens(v) > 0; });
     }},
    {"nh", [](const KeyContext& k) {
       return any_atom(k, [&](int v, const Atom& a) { return a.element == Element::N && k.mol.total_hydrogens(v) > 0; });
     }},
    {"carboxyl_or_ester",
     [](const KeyContext& k) {
       return any_atom(k, [&](int v, const Atom& a) {
         if (a.element != Element::C) return false;
         bool dbl = false, sgl = false;
         for (const auto& nb : k.mol.neighbors(v)) {
           if (k.mol.atom(nb.atom).element != Element::O) continue;
           const auto order = k.mol.bond(nb.bond).order;
           dbl |= order == BondOrder::Double;
           sgl |= order == BondOrder::Single;
         }
         return dbl && sgl;
       });
     }},
    {"c_double_c", [](const KeyContext& k) { return bond_between(k, BondOrder::Double, Element::C, Element::C); }},
    {"c_double_n", [](const KeyContext& k) { return bond_between(k, BondOrder::Double, Element::C, Element::N); }},
    {"nitrile", [](const KeyContext& k) { return bond_between(k, BondOrder::Triple, Element::C, Element::N); }},
    {"triple_bond", [](const KeyContext& k) {
       return any_bond(k, [](const Bond& b, const Atom&, const Atom&) { return b.order == BondOrder::Triple; });
     }},
    {"s_double_o", [](const KeyContext& k) { return bond_between(k, BondOrder::Double, Element::S, Element::O); }},
    {"aromatic_nitrogen",
     [](const KeyContext& k) { return any_atom(k, [](int, const Atom& a) { return a.aromatic && a.element == Element::N; }); }},
    {"aromatic_o_or_s", [](const KeyContext& k) {
       return any_atom(k, [](int, const Atom& a) { return a.aromatic && (a.element == Element::O || a.element == Element::S); });
     }},
    {"methyl", [](const KeyContext& k) {
       return any_atom(k, [&](int v, const Atom& a) { return a.element == Element::C && k.mol.heavy_degree(v) == 1 && k.mol.total_hydrogens(v) == 3; });
     }},
    {"charged_atom", [](const KeyContext& k) { return any_atom(k, [](int, const Atom& a) { return a.formal_charge != 0; }); }},
    {"heavy_atoms_ge_10", [](const KeyContext& k) { return k.mol.heavy_atom_count() >= 10; }},
    {"heavy_atoms_ge_20", [](const KeyContext& k) { return k.mol.heavy_atom_count() >= 20; }},
};

}  // namespace

const std::vector<std::string_view>& structural_key_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const auto& k : kKeys) v.push_back(k.name);
    return v;
  }();
  return names;
}

Fingerprint structural_keys_fp(const Molecule& input) {
  const Molecule mol = normalize_aromaticity(input);
  const KeyContext ctx{mol, smallest_ring_through_bond(mol), mol.ring_atoms()};
  Fingerprint fp(FingerprintKind::StructuralKeys, 0, kNumStructuralKeys);
  for (int i = 0; i < kNumStructuralKeys; ++i)
    if (kKeys[i].test(ctx)) fp.set(static_cast<std::uint64_t>(i));
  return fp;
}

// ---------------------------------------------------- string-level metrics --

int levenshtein(std::string_view a, std::string_view b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Molecule read_molecule(std::string_view text, MoleculeFormat format) {
  return format == MoleculeFormat::Smiles ? parse_smiles(text) : decode_selfies(text);
}

int validity(std::string_view text, MoleculeFormat format) {
  try {
    const Molecule mol = read_molecule(text, format);
    return !mol.empty() && validate_valence(mol).empty() ? 1 : 0;
  } catch (const std::invalid_argument&) {
    return 0;
  }
}

int exact_match(std::string_view pred, std::string_view truth, MoleculeFormat format) {
  try {
    return canonicalize(read_molecule(pred, format)) == canonicalize(read_molecule(truth, format)) ? 1 : 0;
  } catch (const std::invalid_argument&) {
    return 0;
  }
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> character_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (char c : text) out.emplace_back(1, c);
  return out;
}

namespace {

using Counts = std::map<std::vector<std::string>, int>;

Counts ngrams(const std::vector<std::string>& tokens, int n) {
  Counts out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++out[{tokens.begin() + i, tokens.begin() + i + n}];
  return out;
}

int clipped_overlap(const Counts& cand, const Counts& ref) {
  int hits = 0;
  for (const auto& [gram, c] : cand)
    if (auto it = ref.find(gram); it != ref.end()) hits += std::min(c, it->second);
  return hits;
}

int total(const Counts& c) {
  int n = 0;
  for (const auto& [gram, k] : c) n += k;
  return n;
}

double f1(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int n) {
  if (reference.empty()) throw std::invalid_argument("empty reference");
  if (n < 1) throw std::invalid_argument("BLEU order must be positive");
  if (candidate.empty()) return 0.0;
  const int orders = std::min<int>(n, static_cast<int>(candidate.size()));
  double log_sum = 0;
  for (int k = 1; k <= orders; ++k) {
    const Counts c = ngrams(candidate, k);
    const int hits = clipped_overlap(c, ngrams(reference, k));
    if (hits == 0) return 0.0;
    log_sum += std::log(static_cast<double>(hits) / total(c));
  }
  const double c = static_cast<double>(candidate.size()), r = static_cast<double>(reference.size());
  const double brevity = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum / orders);
}

double rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int n) {
  if (reference.empty()) throw std::invalid_argument("empty reference");
  if (n < 1) throw std::invalid_argument("ROUGE order must be positive");
  const Counts c = ngrams(candidate, n), r = ngrams(reference, n);
  if (c.empty() && r.empty()) return 1.0;
  if (c.empty() || r.empty()) return 0.0;
  const int hits = clipped_overlap(c, r);
  return f1(static_cast<double>(hits) / total(c), static_cast<double>(hits) / total(r));
}

double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  if (reference.empty()) throw std::invalid_argument("empty reference");
  if (candidate.empty()) return 0.0;
  std::vector<int> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
  for (const auto& token : candidate) {
    for (std::size_t j = 1; j <= reference.size(); ++j)
      cur[j] = token == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  const double lcs = prev.back();
  return f1(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

// ------------------------------------------------------- corpus evaluation --

const std::vector<std::string>& molecule_columns() {
  static const std::vector<std::string> c{"BLEU", "Exact", "Levenshtein", "Validity", "MACCS", "RDK", "Morgan"};
  return c;
}

const std::vector<std::string>& text_columns() {
  static const std::vector<std::string> c{"BLEU-2", "BLEU-4", "ROUGE-1", "ROUGE-2", "ROUGE-L"};
  return c;
}

namespace {

std::vector<double> values(const MoleculeRecord& r) {
  return {r.bleu, double(r.exact), double(r.levenshtein), double(r.validity), r.maccs, r.rdk, r.morgan};
}

std::vector<double> values(const TextRecord& r) { return {r.bleu2, r.bleu4, r.rouge1, r.rouge2, r.rouge_l}; }

void check_lines(std::size_t pred, std::size_t truth) {
  if (pred != truth)
    throw std::invalid_argument("line count mismatch: " + std::to_string(pred) + " predictions, " + std::to_string(truth) + " references");
  if (pred == 0) throw std::invalid_argument("nothing to evaluate");
}

template <typename Record>
std::vector<double> means(const std::vector<Record>& records) {
  std::vector<double> sum;
  for (const auto& r : records) {
    auto v = values(r);
    if (sum.empty()) sum.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
  }
  for (auto& s : sum) s /= static_cast<double>(records.size());
  return sum;
}

}  // namespace

MoleculeRecord evaluate_molecule(std::string_view pred, std::string_view truth, MoleculeFormat format) {
  MoleculeRecord r;
  r.bleu = bleu(character_tokens(pred), character_tokens(truth), 4);
  r.levenshtein = levenshtein(pred, truth);
  r.validity = validity(pred, format);
  const Molecule ref = read_molecule(truth, format);
  if (!r.validity) return r;
  const Molecule mol = read_molecule(pred, format);
  r.exact = canonicalize(mol) == canonicalize(ref) ? 1 : 0;
  r.maccs = tanimoto(structural_keys_fp(mol), structural_keys_fp(ref));
  r.rdk = tanimoto(path_fp(mol), path_fp(ref));
  r.morgan = tanimoto(morgan_fp(mol), morgan_fp(ref));
  return r;
}

MoleculeReport evaluate_molecules(const std::vector<std::string>& pred, const std::vector<std::string>& truth,
                                  MoleculeFormat format, int workers) {
  check_lines(pred.size(), truth.size());
  MoleculeReport report;
  report.records.resize(pred.size());
  const int n = static_cast<int>(pred.size());
  std::vector<std::string> errors(pred.size());
  parallel_for(n, workers, [&](int i) {
    try {
      report.records[i] = evaluate_molecule(pred[i], truth[i], format);
    } catch (const std::invalid_argument& e) {
      errors[i] = e.what();
    }
  });
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty()) throw std::invalid_argument("reference line " + std::to_string(i + 1) + ": " + errors[i]);
  report.summary = means(report.records);
  return report;
}

TextRecord evaluate_text(std::string_view pred, std::string_view truth) {
  const auto c = whitespace_tokens(pred), r = whitespace_tokens(truth);
  return {bleu(c, r, 2), bleu(c, r, 4), rouge_n(c, r, 1), rouge_n(c, r, 2), rouge_l(c, r)};
}

TextReport evaluate_texts(const std::vector<std::string>& pred, const std::vector<std::string>& truth, int workers) {
  check_lines(pred.size(), truth.size());
  TextReport report;
  report.records.resize(pred.size());
  const int n = static_cast<int>(pred.size());
  std::vector<std::string> errors(pred.size());
  parallel_for(n, workers, [&](int i) {
    try {
      report.records[i] = evaluate_text(pred[i], truth[i]);
    } catch (const std::invalid_argument& e) {
      errors[i] = e.what();
    }
  });
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty()) throw std::invalid_argument("reference line " + std::to_string(i + 1) + ": " + errors[i]);
  report.summary = means(report.records);
  return report;
}

void write_summary_csv(std::ostream& out, const std::vector<std::string>& columns, const std::vector<double>& values) {
  if (columns.size() != values.size()) throw std::invalid_argument("column count differs from value count");
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", values[i]);
    out << (i ? "," : "") << buf;
  }
  out << '\n';
}

namespace {

template <typename Report>
void write_jsonl(std::ostream& out, const Report& report, const std::vector<std::string>& columns) {
  for (std::size_t line = 0; line < report.records.size(); ++line) {
    nlohmann::ordered_json j;
    j["line"] = line + 1;
    const auto v = values(report.records[line]);
    for (std::size_t i = 0; i < columns.size(); ++i) j[columns[i]] = v[i];
    out << j.dump() << '\n';
  }
}

}  // namespace

void write_records_jsonl(std::ostream& out, const MoleculeReport& report) { write_jsonl(out, report, molecule_columns()); }
void write_records_jsonl(std::ostream& out, const TextReport& report) { write_jsonl(out, report, text_columns()); }

}  // namespace hiermol
