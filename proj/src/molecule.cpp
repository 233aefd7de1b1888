#include "hiermol/molecule.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace hiermol {

namespace {

struct ElementInfo {
  std::string_view symbol;
  int atomic_number;
  bool organic;
  bool aromatic_form;
};

constexpr std::array<ElementInfo, kNumElements> kElements{{
    {"B", 5, true, true},
    {"C", 6, true, true},
    {"N", 7, true, true},
    {"O", 8, true, true},
    {"P", 15, true, true},
    {"S", 16, true, true},
    {"F", 9, true, false},
    {"Cl", 17, true, false},
    {"Br", 35, true, false},
    {"I", 53, true, false},
    {"H", 1, false, false},
    {"Li", 3, false, false},
    {"Na", 11, false, false},
    {"K", 19, false, false},
    {"Mg", 12, false, false},
    {"Ca", 20, false, false},
}};

const ElementInfo& info(Element e) { return kElements[static_cast<std::size_t>(e)]; }

}  // namespace

int atomic_number(Element e) { return info(e).atomic_number; }
std::string_view element_symbol(Element e) { return info(e).symbol; }
bool is_organic_subset(Element e) { return info(e).organic; }
bool can_be_aromatic(Element e) { return info(e).aromatic_form; }

std::optional<Element> element_from_symbol(std::string_view symbol) {
  for (std::size_t i = 0; i < kElements.size(); ++i)
    if (kElements[i].symbol == symbol) return static_cast<Element>(i);
  return std::nullopt;
}

int Molecule::add_atom(const Atom& atom) {
  if (atom.hydrogens < 0) throw MoleculeError("negative hydrogen count");
  if (atom.formal_charge < -4 || atom.formal_charge > 4) throw MoleculeError("formal charge out of range");
  atoms_.push_back(atom);
  adjacency_.emplace_back();
  return num_atoms() - 1;
}

int Molecule::add_bond(int a, int b, BondOrder order) {
  if (a < 0 || b < 0 || a >= num_atoms() || b >= num_atoms()) throw MoleculeError("bond endpoint out of range");
  if (a == b) throw MoleculeError("bond endpoints must differ");
  if (bond_between(a, b) >= 0) throw MoleculeError("duplicate bond between atoms " + std::to_string(a) + " and " + std::to_string(b));
  if (order == BondOrder::Aromatic && !(atoms_[a].aromatic && atoms_[b].aromatic))
    throw MoleculeError("aromatic bond between non-aromatic atoms");
  bonds_.push_back({a, b, order});
  int index = num_bonds() - 1;
  adjacency_[a].push_back({b, index});
  adjacency_[b].push_back({a, index});
  return index;
}

void Molecule::set_bond_order(int bond, BondOrder order) {
  auto& bd = bonds_.at(static_cast<std::size_t>(bond));
  if (order == BondOrder::Aromatic && !(atoms_[bd.begin].aromatic && atoms_[bd.end].aromatic))
    throw MoleculeError("aromatic bond between non-aromatic atoms");
  bd.order = order;
}

int Molecule::bond_between(int a, int b) const {
  if (a < 0 || a >= num_atoms()) return -1;
  for (const auto& n : adjacency_[a])
    if (n.atom == b) return n.bond;
  return -1;
}

int Molecule::heavy_degree(int atom) const {
  int d = 0;
  for (const auto& n : neighbors(atom))
    if (atoms_[n.atom].element != Element::H) ++d;
  return d;
}

int Molecule::total_hydrogens(int atom) const {
  int h = atoms_.at(atom).hydrogens;
  for (const auto& n : neighbors(atom))
    if (atoms_[n.atom].element == Element::H) ++h;
  return h;
}

int Molecule::heavy_atom_count() const {
  return static_cast<int>(std::count_if(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.element != Element::H; }));
}

std::vector<int> Molecule::fragment_ids() const {
  std::vector<int> id(atoms_.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < num_atoms(); ++s) {
    if (id[s] >= 0) continue;
    id[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& n : adjacency_[v]) {
        if (id[n.atom] < 0) {
          id[n.atom] = next;
          stack.push_back(n.atom);
        }
      }
    }
    ++next;
  }
  return id;
}

int Molecule::num_fragments() const {
  auto ids = fragment_ids();
  return ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
}

std::vector<bool> Molecule::ring_bonds() const {
  // Iterative Tarjan bridge finding; every non-bridge lies on a cycle.
  const int n = num_atoms();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> ring(bonds_.size(), true);
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  int timer = 0;
  std::vector<Frame> stack;
  for (int root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    disc[root] = low[root] = timer++;
    stack.push_back({root, -1, 0});
    while (!stack.empty()) {
      auto& f = stack.back();
      if (f.next < adjacency_[f.atom].size()) {
        auto nb = adjacency_[f.atom][f.next++];
        if (nb.bond == f.parent_bond) continue;
        if (disc[nb.atom] < 0) {
          disc[nb.atom] = low[nb.atom] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
        }
      } else {
        Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          int parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent]) ring[done.parent_bond] = false;
        }
      }
    }
  }
  return ring;
}

std::vector<bool> Molecule::ring_atoms() const {
  auto rb = ring_bonds();
  std::vector<bool> ra(atoms_.size(), false);
  for (std::size_t i = 0; i < bonds_.size(); ++i)
    if (rb[i]) ra[bonds_[i].begin] = ra[bonds_[i].end] = true;
  return ra;
}

Molecule Molecule::permuted(std::span<const int> new_index) const {
  if (static_cast<int>(new_index.size()) != num_atoms()) throw MoleculeError("permutation size mismatch");
  std::vector<int> old_of(atoms_.size(), -1);
  for (int i = 0; i < num_atoms(); ++i) {
    int j = new_index[i];
    if (j < 0 || j >= num_atoms() || old_of[j] >= 0) throw MoleculeError("not a permutation");
    old_of[j] = i;
  }
  Molecule out;
  for (int j = 0; j < num_atoms(); ++j) out.add_atom(atoms_[old_of[j]]);
  for (const auto& b : bonds_) out.add_bond(new_index[b.begin], new_index[b.end], b.order);
  return out;
}

Molecule Molecule::subgraph(std::span<const int> atoms) const {
  std::vector<int> keep(atoms.begin(), atoms.end());
  std::sort(keep.begin(), keep.end());
  std::vector<int> map(atoms_.size(), -1);
  Molecule out;
  for (int old : keep) map[old] = out.add_atom(atoms_.at(old));
  for (const auto& b : bonds_)
    if (map[b.begin] >= 0 && map[b.end] >= 0) out.add_bond(map[b.begin], map[b.end], b.order);
  return out;
}

}  // namespace hiermol
