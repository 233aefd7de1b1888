#include "hiermol/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "hiermol/valence.hpp"

namespace hiermol {

namespace {

enum class BondSymbol { None, Single, Double, Triple, Aromatic };

struct PendingRing {
  int atom;
  BondSymbol symbol;
  std::size_t offset;
};

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  Molecule run() {
    if (text_.empty()) throw SmilesError("empty SMILES", 0);
    while (pos_ < text_.size()) step();
    if (!branches_.empty()) throw SmilesError("unmatched '('", branch_offsets_.back());
    if (!rings_.empty()) throw SmilesError("unmatched ring closure " + std::to_string(rings_.begin()->first), rings_.begin()->second.offset);
    if (pending_ != BondSymbol::None) throw SmilesError("bond symbol without a following atom", pending_offset_);
    if (mol_.empty()) throw SmilesError("no atoms", 0);
    finish();
    return std::move(mol_);
  }

 private:
  void step() {
    const std::size_t start = pos_;
    char c = text_[pos_];
    switch (c) {
      case '(':
        if (prev_ < 0) throw SmilesError("branch without a preceding atom", start);
        if (pending_ != BondSymbol::None) throw SmilesError("bond symbol before '('", start);
        branches_.push_back(prev_);
        branch_offsets_.push_back(start);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) throw SmilesError("unmatched ')'", start);
        if (pending_ != BondSymbol::None) throw SmilesError("bond symbol before ')'", start);
        prev_ = branches_.back();
        branches_.pop_back();
        branch_offsets_.pop_back();
        ++pos_;
        return;
      case '.':
        if (pending_ != BondSymbol::None) throw SmilesError("bond symbol before '.'", start);
        if (!branches_.empty()) throw SmilesError("'.' inside a branch", start);
        if (prev_ < 0) throw SmilesError("'.' without a preceding atom", start);
        prev_ = -1;
        ++pos_;
        return;
      case '-': set_bond(BondSymbol::Single, start); return;
      case '=': set_bond(BondSymbol::Double, start); return;
      case '#': set_bond(BondSymbol::Triple, start); return;
      case ':': set_bond(BondSymbol::Aromatic, start); return;
      case '/':
      case '\\':
        ++pos_;  // directional bonds carry stereo only
        return;
      case '%': {
        if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
          throw SmilesError("malformed %nn ring closure", start);
        int number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        pos_ += 3;
        ring_closure(number, start);
        return;
      }
      case '[': bracket_atom(); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ++pos_;
      ring_closure(c - '0', start);
      return;
    }
    organic_atom();
  }

  void set_bond(BondSymbol s, std::size_t at) {
    if (pending_ != BondSymbol::None) throw SmilesError("two consecutive bond symbols", at);
    if (prev_ < 0) throw SmilesError("bond symbol without a preceding atom", at);
    pending_ = s;
    pending_offset_ = at;
    ++pos_;
  }

  void ring_closure(int number, std::size_t at) {
    if (prev_ < 0) throw SmilesError("ring closure without a preceding atom", at);
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_[number] = {prev_, pending_, at};
    } else {
      PendingRing open = it->second;
      rings_.erase(it);
      BondSymbol s = pending_;
      if (open.symbol != BondSymbol::None) {
        if (s != BondSymbol::None && s != open.symbol) throw SmilesError("conflicting ring closure bond symbols", at);
        s = open.symbol;
      }
      if (open.atom == prev_) throw SmilesError("ring closure to the same atom", at);
      connect(open.atom, prev_, s, at);
    }
    pending_ = BondSymbol::None;
  }

  void organic_atom() {
    const std::size_t start = pos_;
    char c = text_[pos_];
    Atom atom;
    std::optional<Element> element;
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      element = Element::Cl;
      pos_ += 2;
    } else if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      element = Element::Br;
      pos_ += 2;
    } else if (std::islower(static_cast<unsigned char>(c))) {
      char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      element = element_from_symbol(std::string_view(&upper, 1));
      if (!element || !can_be_aromatic(*element)) throw SmilesError(std::string("unknown aromatic atom '") + c + "'", start);
      atom.aromatic = true;
      ++pos_;
    } else {
      element = element_from_symbol(std::string_view(&c, 1));
      if (!element || !is_organic_subset(*element)) {
        if (std::isalpha(static_cast<unsigned char>(c))) throw SmilesError(std::string("unknown element '") + c + "'", start);
        throw SmilesError(std::string("unexpected character '") + c + "'", start);
      }
      ++pos_;
    }
    atom.element = *element;
    add_atom(atom, /*bracket=*/false, start);
  }

  void bracket_atom() {
    const std::size_t start = pos_;
    ++pos_;  // '['
    auto peek = [&]() -> char { return pos_ < text_.size() ? text_[pos_] : '\0'; };
    if (std::isdigit(static_cast<unsigned char>(peek()))) throw SmilesError("isotopes are not supported", pos_);
    Atom atom;
    // Element symbol: try two letters first, then one.
    std::optional<Element> element;
    if (std::isupper(static_cast<unsigned char>(peek()))) {
      if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        element = element_from_symbol(text_.substr(pos_, 2));
        // Nothing lowercase may follow a bracket element symbol.
        if (!element) throw SmilesError("unknown element '" + std::string(text_.substr(pos_, 2)) + "'", pos_);
        pos_ += 2;
      }
      if (!element) {
        element = element_from_symbol(text_.substr(pos_, 1));
        if (!element) throw SmilesError("unknown element in bracket atom", pos_);
        ++pos_;
      }
    } else if (std::islower(static_cast<unsigned char>(peek()))) {
      char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(peek())));
      element = element_from_symbol(std::string_view(&upper, 1));
      if (!element || !can_be_aromatic(*element)) throw SmilesError("unknown aromatic element in bracket atom", pos_);
      atom.aromatic = true;
      ++pos_;
    } else {
      throw SmilesError("missing element in bracket atom", pos_);
    }
    atom.element = *element;
    // Chirality: @, @@ and @TH1-style suffixes are discarded.
    if (peek() == '@') {
      while (peek() == '@') ++pos_;
      while (std::isupper(static_cast<unsigned char>(peek())) && peek() != 'H') ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() == 'H') {
      ++pos_;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) h = h * 10 + (text_[pos_++] - '0');
      }
      atom.hydrogens = h;
    }
    if (peek() == '+' || peek() == '-') {
      char sign = peek();
      int magnitude = 0;
      while (peek() == sign) {
        ++magnitude;
        ++pos_;
      }
      if (magnitude == 1 && std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) magnitude = magnitude * 10 + (text_[pos_++] - '0');
      }
      if (magnitude > 4) throw SmilesError("formal charge out of range", start);
      atom.formal_charge = sign == '+' ? magnitude : -magnitude;
    }
    if (peek() == ':') throw SmilesError("atom classes are not supported", pos_);
    if (peek() != ']') throw SmilesError("unterminated bracket atom", start);
    ++pos_;
    add_atom(atom, /*bracket=*/true, start);
  }

  void add_atom(const Atom& atom, bool bracket, std::size_t at) {
    int index = mol_.add_atom(atom);
    bracket_.push_back(bracket);
    if (prev_ >= 0) connect(prev_, index, pending_, at);
    pending_ = BondSymbol::None;
    prev_ = index;
  }

  void connect(int a, int b, BondSymbol s, std::size_t at) {
    BondOrder order = BondOrder::Single;
    const bool both_aromatic = mol_.atom(a).aromatic && mol_.atom(b).aromatic;
    switch (s) {
      case BondSymbol::None: order = both_aromatic ? BondOrder::Aromatic : BondOrder::Single; break;
      case BondSymbol::Single: order = BondOrder::Single; break;
      case BondSymbol::Double: order = BondOrder::Double; break;
      case BondSymbol::Triple: order = BondOrder::Triple; break;
      case BondSymbol::Aromatic:
        if (!both_aromatic) throw SmilesError("aromatic bond between non-aromatic atoms", at);
        order = BondOrder::Aromatic;
        break;
    }
    if (mol_.bond_between(a, b) >= 0) throw SmilesError("duplicate bond", at);
    mol_.add_bond(a, b, order);
  }

  void finish() {
    auto ring = mol_.ring_bonds();
    for (int i = 0; i < mol_.num_bonds(); ++i)
      if (mol_.bond(i).order == BondOrder::Aromatic && !ring[i]) mol_.set_bond_order(i, BondOrder::Single);
    for (int i = 0; i < mol_.num_atoms(); ++i)
      if (!bracket_[i]) mol_.atom(i).hydrogens = default_implicit_hydrogens(mol_, i);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Molecule mol_;
  std::vector<bool> bracket_;
  int prev_ = -1;
  BondSymbol pending_ = BondSymbol::None;
  std::size_t pending_offset_ = 0;
  std::vector<int> branches_;
  std::vector<std::size_t> branch_offsets_;
  std::map<int, PendingRing> rings_;
};

// ---------------------------------------------------------------------------
// Writer

bool needs_brackets(const Molecule& mol, int i) {
  const Atom& a = mol.atom(i);
  if (!is_organic_subset(a.element) || a.formal_charge != 0) return true;
  return a.hydrogens != default_implicit_hydrogens(mol, i);
}

void append_atom(std::string& out, const Molecule& mol, int i) {
  const Atom& a = mol.atom(i);
  std::string symbol(element_symbol(a.element));
  if (a.aromatic) symbol[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(symbol[0])));
  if (!needs_brackets(mol, i)) {
    out += symbol;
    return;
  }
  out += '[';
  out += symbol;
  if (a.hydrogens > 0) {
    out += 'H';
    if (a.hydrogens > 1) out += std::to_string(a.hydrogens);
  }
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? '+' : '-';
    int m = std::abs(a.formal_charge);
    if (m > 1) out += std::to_string(m);
  }
  out += ']';
}

void append_bond(std::string& out, const Molecule& mol, int bond) {
  const Bond& b = mol.bond(bond);
  switch (b.order) {
    case BondOrder::Single:
      if (mol.atom(b.begin).aromatic && mol.atom(b.end).aromatic) out += '-';
      break;
    case BondOrder::Double: out += '='; break;
    case BondOrder::Triple: out += '#'; break;
    case BondOrder::Aromatic: break;
  }
}

void append_ring_number(std::string& out, int n) {
  if (n < 10) {
    out += static_cast<char>('0' + n);
  } else {
    out += '%';
    out += std::to_string(n);
  }
}

class SmilesWriter {
 public:
  SmilesWriter(const Molecule& mol, std::span<const int> rank) : mol_(mol), rank_(rank) {
    const int n = mol.num_atoms();
    if (static_cast<int>(rank.size()) != n) throw std::invalid_argument("rank size does not match atom count");
    std::vector<bool> seen(n, false);
    for (int r : rank) {
      if (r < 0 || r >= n || seen[r]) throw std::invalid_argument("rank is not a permutation");
      seen[r] = true;
    }
    sorted_neighbors_.resize(n);
    for (int v = 0; v < n; ++v) {
      auto nbs = mol.neighbors(v);
      sorted_neighbors_[v].assign(nbs.begin(), nbs.end());
      std::sort(sorted_neighbors_[v].begin(), sorted_neighbors_[v].end(),
                [&](const Neighbor& x, const Neighbor& y) { return rank_[x.atom] < rank_[y.atom]; });
    }
  }

  std::string run() {
    const int n = mol_.num_atoms();
    std::vector<int> by_rank(n);
    for (int i = 0; i < n; ++i) by_rank[rank_[i]] = i;
    visited_.assign(n, false);
    children_.assign(n, {});
    closures_.assign(n, {});
    closure_bond_.assign(mol_.num_bonds(), false);
    std::string out;
    for (int root : by_rank) {
      if (visited_[root]) continue;
      plan(root);
      if (!out.empty()) out += '.';
      emit(root, -1, out);
    }
    return out;
  }

 private:
  struct Closure {
    int bond;
    int partner;
  };

  // First pass: DFS tree and ring-closure bonds, in rank order.
  void plan(int root) {
    struct Frame {
      int atom;
      int parent_bond;
      std::size_t next;
    };
    std::vector<Frame> stack{{root, -1, 0}};
    std::vector<bool> on_stack(mol_.num_atoms(), false);
    visited_[root] = on_stack[root] = true;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& nbs = sorted_neighbors_[f.atom];
      if (f.next == nbs.size()) {
        on_stack[f.atom] = false;
        stack.pop_back();
        continue;
      }
      Neighbor nb = nbs[f.next++];
      if (nb.bond == f.parent_bond || closure_bond_[nb.bond]) continue;
      if (!visited_[nb.atom]) {
        visited_[nb.atom] = on_stack[nb.atom] = true;
        children_[f.atom].push_back(nb);
        stack.push_back({nb.atom, nb.bond, 0});
      } else if (on_stack[nb.atom]) {
        closure_bond_[nb.bond] = true;
        closures_[nb.atom].push_back({nb.bond, f.atom});  // opens at the ancestor
        closures_[f.atom].push_back({nb.bond, nb.atom});  // closes here
      }
    }
  }

  void emit(int v, int via_bond, std::string& out) {
    if (via_bond >= 0) append_bond(out, mol_, via_bond);
    append_atom(out, mol_, v);
    std::vector<int> to_free;
    for (const auto& c : closures_[v]) {
      auto it = digit_of_bond_.find(c.bond);
      if (it != digit_of_bond_.end()) {
        append_bond(out, mol_, c.bond);
        append_ring_number(out, it->second);
        to_free.push_back(it->second);
        digit_of_bond_.erase(it);
      } else {
        int d = 1;
        while (used_digits_.count(d)) ++d;
        used_digits_.insert(d);
        digit_of_bond_[c.bond] = d;
        append_ring_number(out, d);
      }
    }
    // Digits closed at this atom become reusable only after it is written.
    for (int d : to_free) used_digits_.erase(d);
    const auto& kids = children_[v];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last) out += '(';
      emit(kids[i].atom, kids[i].bond, out);
      if (!last) out += ')';
    }
  }

  const Molecule& mol_;
  std::span<const int> rank_;
  std::vector<std::vector<Neighbor>> sorted_neighbors_;
  std::vector<bool> visited_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<Closure>> closures_;
  std::vector<bool> closure_bond_;
  std::map<int, int> digit_of_bond_;
  std::set<int> used_digits_;
};

}  // namespace

Molecule parse_smiles(std::string_view text) { return SmilesParser(text).run(); }

std::string write_smiles(const Molecule& mol, std::span<const int> rank) { return SmilesWriter(mol, rank).run(); }

std::string write_smiles(const Molecule& mol) {
  std::vector<int> identity(static_cast<std::size_t>(mol.num_atoms()));
  std::iota(identity.begin(), identity.end(), 0);
  return write_smiles(mol, identity);
}

}  // namespace hiermol
