#include "hiermol/canon.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "hiermol/rings.hpp"
#include "hiermol/smiles.hpp"
#include "hiermol/valence.hpp"

namespace hiermol {

namespace {

bool aromatizable_element(Element e) {
  return e == Element::C || e == Element::N || e == Element::O || e == Element::S;
}

// Pi electrons contributed by atom v to the ring, or -1 if it disqualifies it.
int ring_electrons(const Molecule& mol, int v, const std::vector<int>& ring_bond_ids) {
  const Atom& a = mol.atom(v);
  if (!aromatizable_element(a.element) && !a.aromatic) return -1;
  int in_ring_double = 0;
  bool has_aromatic = false;
  for (const auto& nb : mol.neighbors(v)) {
    const BondOrder o = mol.bond(nb.bond).order;
    const bool in_ring = std::find(ring_bond_ids.begin(), ring_bond_ids.end(), nb.bond) != ring_bond_ids.end();
    if (o == BondOrder::Aromatic) {
      has_aromatic = true;
    } else if (o == BondOrder::Double) {
      if (!in_ring) return -1;
      ++in_ring_double;
    } else if (o == BondOrder::Triple) {
      return -1;
    }
  }
  if (in_ring_double > 1) return -1;
  if (in_ring_double == 1 || has_aromatic) return 1;
  if (a.formal_charge != 0) return -1;
  const int connections = mol.degree(v) + a.hydrogens;
  if (a.element == Element::N && connections == 3) return 2;
  if ((a.element == Element::O || a.element == Element::S) && connections == 2) return 2;
  return -1;
}

std::vector<int> ring_bond_ids(const Molecule& mol, const std::vector<int>& ring) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < ring.size(); ++i) ids.push_back(mol.bond_between(ring[i], ring[(i + 1) % ring.size()]));
  return ids;
}

// Dense ranks of keys: equal keys share a rank, ranks ordered by key.
template <typename Key>
std::vector<int> dense_rank(const std::vector<Key>& keys) {
  std::vector<int> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return keys[x] < keys[y]; });
  std::vector<int> rank(keys.size());
  int r = -1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || keys[order[i - 1]] < keys[order[i]]) ++r;
    rank[order[i]] = r;
  }
  return rank;
}

int class_count(const std::vector<int>& ranks) {
  return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()) + 1;
}

// Splits classes by the multiset of (neighbor class, bond code) until the
// number of classes stops growing.
std::vector<int> refine(const Molecule& mol, std::vector<int> classes) {
  using Key = std::pair<int, std::vector<std::pair<int, int>>>;
  int count = class_count(classes);
  while (true) {
    std::vector<Key> keys(classes.size());
    for (int v = 0; v < mol.num_atoms(); ++v) {
      keys[v].first = classes[v];
      for (const auto& nb : mol.neighbors(v)) keys[v].second.emplace_back(classes[nb.atom], bond_code(mol.bond(nb.bond).order));
      std::sort(keys[v].second.begin(), keys[v].second.end());
    }
    auto next = dense_rank(keys);
    int next_count = class_count(next);
    if (next_count == count) return next;
    classes = std::move(next);
    count = next_count;
  }
}

}  // namespace

Molecule normalize_aromaticity(Molecule mol) {
  auto cycles = simple_cycles(mol, 6);
  std::erase_if(cycles, [](const std::vector<int>& c) { return c.size() < 5; });
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& ring : cycles) {
      auto bonds = ring_bond_ids(mol, ring);
      bool already = std::all_of(bonds.begin(), bonds.end(), [&](int b) { return mol.bond(b).order == BondOrder::Aromatic; });
      if (already) continue;
      int electrons = 0;
      bool ok = true;
      for (int v : ring) {
        int e = ring_electrons(mol, v, bonds);
        if (e < 0) {
          ok = false;
          break;
        }
        electrons += e;
      }
      if (!ok || electrons != 6) continue;
      for (int v : ring) mol.atom(v).aromatic = true;
      for (int b : bonds) mol.set_bond_order(b, BondOrder::Aromatic);
      changed = true;
    }
  }
  return mol;
}

std::optional<Molecule> kekulize(const Molecule& mol) {
  const int n = mol.num_atoms();
  std::vector<bool> needs(n, false);
  for (int v = 0; v < n; ++v) {
    const Atom& a = mol.atom(v);
    if (!a.aromatic) continue;
    auto allowed = allowed_valences(a.element, a.formal_charge);
    if (allowed.empty()) return std::nullopt;
    int used = a.hydrogens;
    for (const auto& nb : mol.neighbors(v)) used += bond_valence(mol.bond(nb.bond).order);
    needs[v] = allowed.front() - used == 1;
  }
  std::vector<int> partner(n, -1);
  auto candidates = [&](int v) {
    std::vector<Neighbor> out;
    for (const auto& nb : mol.neighbors(v))
      if (mol.bond(nb.bond).order == BondOrder::Aromatic && needs[nb.atom] && partner[nb.atom] < 0) out.push_back(nb);
    return out;
  };
  // Most-constrained-first backtracking over a perfect matching of the
  // atoms that need a double bond.
  auto solve = [&](auto&& self) -> bool {
    int best = -1;
    std::size_t best_count = 0;
    for (int v = 0; v < n; ++v) {
      if (!needs[v] || partner[v] >= 0) continue;
      auto c = candidates(v).size();
      if (best < 0 || c < best_count) {
        best = v;
        best_count = c;
      }
      if (c == 0) return false;
    }
    if (best < 0) return true;
    for (const auto& nb : candidates(best)) {
      partner[best] = nb.atom;
      partner[nb.atom] = best;
      if (self(self)) return true;
      partner[best] = partner[nb.atom] = -1;
    }
    return false;
  };
  if (!solve(solve)) return std::nullopt;
  Molecule out = mol;
  for (int b = 0; b < out.num_bonds(); ++b) {
    const Bond& bond = out.bond(b);
    if (bond.order != BondOrder::Aromatic) continue;
    out.set_bond_order(b, partner[bond.begin] == bond.end ? BondOrder::Double : BondOrder::Single);
  }
  for (int v = 0; v < n; ++v) out.atom(v).aromatic = false;
  return out;
}

std::vector<int> canonical_ranks(const Molecule& mol) {
  const int n = mol.num_atoms();
  using Invariant = std::tuple<int, int, int, int, int>;
  std::vector<Invariant> initial(n);
  for (int v = 0; v < n; ++v) {
    const Atom& a = mol.atom(v);
    initial[v] = {atomic_number(a.element), mol.heavy_degree(v), a.formal_charge, mol.total_hydrogens(v), a.aromatic ? 1 : 0};
  }
  auto classes = refine(mol, dense_rank(initial));
  while (class_count(classes) < n) {
    std::vector<int> size(static_cast<std::size_t>(n), 0);
    for (int c : classes) ++size[c];
    int target = -1;
    for (int c = 0; c < n; ++c)
      if (size[c] > 1 && (target < 0 || size[c] < size[target])) target = c;
    int chosen = static_cast<int>(std::find(classes.begin(), classes.end(), target) - classes.begin());
    std::vector<int> split(n);
    for (int v = 0; v < n; ++v) split[v] = 2 * classes[v] + ((classes[v] == target && v != chosen) ? 1 : 0);
    classes = refine(mol, dense_rank(split));
  }
  return classes;
}

CanonicalForm canonicalize(const Molecule& mol) {
  Molecule normalized = normalize_aromaticity(mol);
  auto ranks = canonical_ranks(normalized);
  return {write_smiles(normalized, ranks)};
}

bool is_isomorphic(const Molecule& a, const Molecule& b, int max_atoms) {
  if (a.heavy_atom_count() > max_atoms || b.heavy_atom_count() > max_atoms)
    throw std::length_error("is_isomorphic: molecule exceeds " + std::to_string(max_atoms) + " heavy atoms");
  const int n = a.num_atoms();
  if (n != b.num_atoms() || a.num_bonds() != b.num_bonds()) return false;
  if (n == 0) return true;

  // Joint refinement on the disjoint union gives colors comparable across
  // both molecules.
  Molecule joint = a;
  for (const auto& atom : b.atoms()) joint.add_atom(atom);
  for (const auto& bond : b.bonds()) joint.add_bond(bond.begin + n, bond.end + n, bond.order);
  using Label = std::tuple<int, int, int, int>;
  std::vector<Label> labels(2 * n);
  for (int v = 0; v < 2 * n; ++v) {
    const Atom& at = joint.atom(v);
    labels[v] = {static_cast<int>(at.element), at.formal_charge, at.aromatic ? 1 : 0, joint.degree(v)};
  }
  auto color = refine(joint, dense_rank(labels));
  std::vector<int> ca(color.begin(), color.begin() + n), cb(color.begin() + n, color.end());
  std::vector<int> sa = ca, sb = cb;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa != sb) return false;

  // Match atoms of a in BFS order so every atom after the first in a
  // fragment has a mapped neighbor to constrain it.
  std::vector<int> order;
  std::vector<bool> queued(n, false);
  for (int s = 0; s < n; ++s) {
    if (queued[s]) continue;
    queued[s] = true;
    std::size_t head = order.size();
    order.push_back(s);
    while (head < order.size()) {
      int v = order[head++];
      for (const auto& nb : a.neighbors(v))
        if (!queued[nb.atom]) {
          queued[nb.atom] = true;
          order.push_back(nb.atom);
        }
    }
  }
  std::vector<int> map_ab(n, -1), map_ba(n, -1);
  auto feasible = [&](int va, int vb) {
    if (ca[va] != cb[vb] || map_ba[vb] >= 0) return false;
    for (const auto& nb : a.neighbors(va)) {
      int img = map_ab[nb.atom];
      if (img < 0) continue;
      int bond = b.bond_between(vb, img);
      if (bond < 0 || b.bond(bond).order != a.bond(nb.bond).order) return false;
    }
    for (const auto& nb : b.neighbors(vb)) {
      int pre = map_ba[nb.atom];
      if (pre >= 0 && a.bond_between(va, pre) < 0) return false;
    }
    return true;
  };
  auto search = [&](auto&& self, std::size_t depth) -> bool {
    if (depth == order.size()) return true;
    int va = order[depth];
    for (int vb = 0; vb < n; ++vb) {
      if (!feasible(va, vb)) continue;
      map_ab[va] = vb;
      map_ba[vb] = va;
      if (self(self, depth + 1)) return true;
      map_ab[va] = map_ba[vb] = -1;
    }
    return false;
  };
  return search(search, 0);
}

}  // namespace hiermol
