#include "hiermol/selfies.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <optional>

#include "hiermol/canon.hpp"
#include "hiermol/valence.hpp"

namespace hiermol {

namespace {

constexpr std::array<Element, 10> kSelfiesElements{Element::B, Element::C, Element::N, Element::O, Element::P,
                                                    Element::S, Element::F, Element::Cl, Element::Br, Element::I};

const std::array<std::string, 16> kIndexSymbols{"[C]",  "[Ring1]", "[Branch1]", "[O]", "[N]",  "[=N]", "[=C]", "[#C]",
                                                "[S]",  "[P]",     "[=O]",      "[F]", "[Cl]", "[Br]", "[I]",  "[B]"};

int lowest_valence(Element e) { return allowed_valences(e, 0).front(); }

enum class Kind { Atom, Branch, Ring };

struct Symbol {
  Kind kind = Kind::Atom;
  Element element = Element::C;
  int order = 1;
};

std::optional<Symbol> classify(std::string_view token) {
  if (token == "[Branch1]") return Symbol{Kind::Branch};
  if (token == "[Ring1]") return Symbol{Kind::Ring};
  std::string_view body = token.substr(1, token.size() - 2);
  int order = 1;
  if (!body.empty() && (body[0] == '=' || body[0] == '#')) {
    order = body[0] == '=' ? 2 : 3;
    body.remove_prefix(1);
  }
  auto e = element_from_symbol(body);
  if (!e || std::find(kSelfiesElements.begin(), kSelfiesElements.end(), *e) == kSelfiesElements.end()) return std::nullopt;
  return Symbol{Kind::Atom, *e, order};
}

int index_value(std::string_view token) {
  for (std::size_t i = 0; i < kIndexSymbols.size(); ++i)
    if (kIndexSymbols[i] == token) return static_cast<int>(i);
  return 0;
}

class Decoder {
 public:
  explicit Decoder(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (const auto& t : tokens_) {
      auto s = classify(t);
      if (!s) throw SelfiesError("token outside the supported alphabet: " + t);
      symbols_.push_back(*s);
    }
  }

  Molecule run() {
    derive(0, symbols_.size(), -1, false);
    for (int v = 0; v < mol_.num_atoms(); ++v) mol_.atom(v).hydrogens = default_implicit_hydrogens(mol_, v);
    return std::move(mol_);
  }

 private:
  int new_atom(Element e) {
    Atom a;
    a.element = e;
    int v = mol_.add_atom(a);
    remaining_.push_back(lowest_valence(e));
    return v;
  }

  void bond(int a, int b, int order) {
    mol_.add_bond(a, b, static_cast<BondOrder>(order - 1));
    remaining_[a] -= order;
    remaining_[b] -= order;
  }

  // Derives one chain from symbols [begin, end). A branch passes its parent
  // atom as prev with single_first set, capping the first bond at one.
  void derive(std::size_t begin, std::size_t end, int prev, bool single_first) {
    std::size_t i = begin;
    bool first_bond = true;
    while (i < end) {
      const Symbol& s = symbols_[i];
      if (s.kind == Kind::Atom) {
        ++i;
        if (prev < 0) {
          prev = new_atom(s.element);
          continue;
        }
        if (remaining_[prev] == 0) return;
        int order = std::min({s.order, remaining_[prev], lowest_valence(s.element)});
        if (single_first && first_bond) order = std::min(order, 1);
        first_bond = false;
        int v = new_atom(s.element);
        bond(prev, v, order);
        prev = v;
        if (remaining_[prev] == 0) return;
      } else if (s.kind == Kind::Branch) {
        ++i;
        if (prev < 0 || remaining_[prev] <= 1) continue;  // the index symbol is then read normally
        if (i >= end) return;
        std::size_t span = static_cast<std::size_t>(index_value(tokens_[i])) + 1;
        ++i;
        std::size_t branch_end = std::min(end, i + span);
        derive(i, branch_end, prev, true);
        i = branch_end;
        if (remaining_[prev] == 0) return;
      } else {
        ++i;
        if (prev < 0 || remaining_[prev] == 0) continue;
        if (i >= end) return;
        int lag = index_value(tokens_[i]) + 1;
        ++i;
        int target = std::max(0, prev - lag);
        if (target == prev || remaining_[target] == 0) continue;
        int existing = mol_.bond_between(prev, target);
        if (existing >= 0) {
          auto o = static_cast<int>(mol_.bond(existing).order) + 1;
          if (o < 3) {
            mol_.set_bond_order(existing, static_cast<BondOrder>(o));
            --remaining_[prev];
            --remaining_[target];
          }
        } else {
          bond(prev, target, 1);
        }
        if (remaining_[prev] == 0) return;
      }
    }
  }

  std::vector<std::string> tokens_;
  std::vector<Symbol> symbols_;
  Molecule mol_;
  std::vector<int> remaining_;
};

std::string atom_token(Element e, int order) {
  std::string t = "[";
  if (order == 2) t += '=';
  if (order == 3) t += '#';
  t += element_symbol(e);
  t += ']';
  return t;
}

int order_of(const Molecule& mol, int bond) { return static_cast<int>(mol.bond(bond).order) + 1; }

}  // namespace

std::span<const std::string> selfies_alphabet() {
  static const std::vector<std::string> alphabet = [] {
    std::vector<std::string> out;
    for (int order = 1; order <= 3; ++order)
      for (auto e : kSelfiesElements) out.push_back(atom_token(e, order));
    out.push_back("[Branch1]");
    out.push_back("[Ring1]");
    return out;
  }();
  return alphabet;
}

std::vector<std::string> tokenize_selfies(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '[') throw SelfiesError("expected '[' at offset " + std::to_string(i));
    auto close = text.find(']', i);
    if (close == std::string_view::npos) throw SelfiesError("unterminated token at offset " + std::to_string(i));
    tokens.emplace_back(text.substr(i, close - i + 1));
    i = close + 1;
  }
  return tokens;
}

Molecule decode_selfies(std::string_view text) { return Decoder(tokenize_selfies(text)).run(); }

std::string encode_selfies(const Molecule& input) {
  if (input.empty()) return "";
  if (input.num_fragments() != 1) throw SelfiesError("encode_selfies requires a single fragment");
  Molecule mol = input;
  if (std::any_of(mol.atoms().begin(), mol.atoms().end(), [](const Atom& a) { return a.aromatic; })) {
    auto k = kekulize(mol);
    if (!k) throw SelfiesError("aromatic system cannot be kekulized");
    mol = std::move(*k);
  }
  const int n = mol.num_atoms();
  for (int v = 0; v < n; ++v) {
    const Atom& a = mol.atom(v);
    if (std::find(kSelfiesElements.begin(), kSelfiesElements.end(), a.element) == kSelfiesElements.end())
      throw SelfiesError("element outside the supported alphabet: " + std::string(element_symbol(a.element)));
    if (a.formal_charge != 0) throw SelfiesError("charged atoms are outside the supported alphabet");
    int used = a.hydrogens;
    for (const auto& nb : mol.neighbors(v)) used += order_of(mol, nb.bond);
    if (used != lowest_valence(a.element)) throw SelfiesError("atom " + std::to_string(v) + " is not at its lowest valence");
  }

  // DFS tree preferring higher-order bonds as tree edges, so ring closures
  // are single wherever possible.
  std::vector<int> parent_bond(n, -1);
  std::vector<bool> visited(n, false), on_stack(n, false), closure(static_cast<std::size_t>(mol.num_bonds()), false);
  std::vector<std::vector<Neighbor>> children(n);
  std::vector<std::vector<int>> ring_targets(n);
  std::vector<int> subtree(n, 1);
  std::function<void(int)> dfs = [&](int v) {
    visited[v] = on_stack[v] = true;
    auto nbs = std::vector<Neighbor>(mol.neighbors(v).begin(), mol.neighbors(v).end());
    std::stable_sort(nbs.begin(), nbs.end(), [&](const Neighbor& x, const Neighbor& y) {
      return order_of(mol, x.bond) > order_of(mol, y.bond);
    });
    for (const auto& nb : nbs) {
      if (nb.bond == parent_bond[v] || closure[nb.bond]) continue;
      if (!visited[nb.atom]) {
        parent_bond[nb.atom] = nb.bond;
        children[v].push_back(nb);
        dfs(nb.atom);
        subtree[v] += subtree[nb.atom];
      } else if (on_stack[nb.atom]) {
        if (order_of(mol, nb.bond) != 1) throw SelfiesError("ring closure on a multiple bond is outside the supported alphabet");
        closure[nb.bond] = true;
        ring_targets[v].push_back(nb.atom);
      }
    }
    on_stack[v] = false;
  };
  dfs(0);

  std::vector<int> position(n, -1);
  int counter = 0;
  auto index_token = [](int value, const char* what) {
    if (value < 0 || value >= static_cast<int>(kIndexSymbols.size()))
      throw SelfiesError(std::string(what) + " span too long for a single index symbol");
    return kIndexSymbols[static_cast<std::size_t>(value)];
  };
  std::function<void(int, int, std::vector<std::string>&)> emit = [&](int v, int order, std::vector<std::string>& out) {
    out.push_back(atom_token(mol.atom(v).element, order));
    position[v] = counter++;
    for (int u : ring_targets[v]) {
      out.push_back("[Ring1]");
      out.push_back(index_token(position[v] - position[u] - 1, "ring"));
    }
    auto kids = children[v];
    // A multiple bond cannot open a branch, so it must continue the chain;
    // otherwise the largest subtree continues it to keep branches short.
    auto main = std::max_element(kids.begin(), kids.end(), [&](const Neighbor& x, const Neighbor& y) {
      return std::make_pair(order_of(mol, x.bond), subtree[x.atom]) < std::make_pair(order_of(mol, y.bond), subtree[y.atom]);
    });
    if (main != kids.end()) std::rotate(main, main + 1, kids.end());
    for (std::size_t i = 0; i < kids.size(); ++i) {
      int o = order_of(mol, kids[i].bond);
      if (i + 1 == kids.size()) {
        emit(kids[i].atom, o, out);
        break;
      }
      if (o != 1) throw SelfiesError("multiple-bond branches are outside the supported alphabet");
      std::vector<std::string> branch;
      emit(kids[i].atom, o, branch);
      out.push_back("[Branch1]");
      out.push_back(index_token(static_cast<int>(branch.size()) - 1, "branch"));
      out.insert(out.end(), branch.begin(), branch.end());
    }
  };
  std::vector<std::string> tokens;
  emit(0, 1, tokens);
  std::string text;
  for (const auto& t : tokens) text += t;
  return text;
}

}  // namespace hiermol
