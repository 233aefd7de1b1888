#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "hiermol/molecule.hpp"
#include "hiermol/rng.hpp"
#include "hiermol/smiles.hpp"

namespace hiermol {

// Random but chemically sensible molecules: grow a tree of atoms and ring
// templates, spending each atom's implicit hydrogens as bond capacity, then
// occasionally close extra rings.
class MoleculeGenerator {
 public:
  explicit MoleculeGenerator(std::uint64_t seed) : rng_(seed) {}

  Molecule next(int max_heavy) {
    Molecule mol;
    const int target = 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_heavy)));
    for (int guard = 0; guard < 200 && mol.num_atoms() < target; ++guard) {
      Molecule piece = parse_smiles(pick().smiles);
      if (mol.num_atoms() + piece.num_atoms() > max_heavy) continue;
      if (mol.empty()) {
        append(mol, piece, -1);
        continue;
      }
      auto open = open_atoms(mol);
      if (open.empty()) break;
      append(mol, piece, open[rng_.below(open.size())]);
    }
    if (rng_.uniform() < 0.3) close_ring(mol);
    return mol;
  }

 private:
  struct Piece {
    const char* smiles;
    double weight;
  };

  static const std::vector<Piece>& pieces() {
    static const std::vector<Piece> list{
        {"C", 6},      {"N", 1.5},       {"O", 1.5},        {"S", 0.5},         {"F", 0.4},       {"Cl", 0.4},
        {"Br", 0.2},   {"c1ccccc1", 1.2}, {"c1ccncc1", 0.4}, {"c1ccsc1", 0.3},   {"c1ccoc1", 0.3}, {"c1cc[nH]c1", 0.3},
        {"C1CCCCC1", 0.4}, {"C1CCNC1", 0.3}, {"C1CC1", 0.2},  {"C(=O)", 1.0},     {"C#N", 0.2},     {"P(=O)(O)O", 0.1},
    };
    return list;
  }

  const Piece& pick() {
    double total = 0;
    for (const auto& p : pieces()) total += p.weight;
    double x = rng_.uniform() * total;
    for (const auto& p : pieces()) {
      if ((x -= p.weight) < 0) return p;
    }
    return pieces().front();
  }

  static std::vector<int> open_atoms(const Molecule& mol) {
    std::vector<int> out;
    for (int v = 0; v < mol.num_atoms(); ++v)
      if (mol.atom(v).hydrogens > 0) out.push_back(v);
    return out;
  }

  void append(Molecule& mol, const Molecule& piece, int anchor) {
    std::vector<int> attach;
    for (int v = 0; v < piece.num_atoms(); ++v)
      if (piece.atom(v).hydrogens > 0) attach.push_back(v);
    if (anchor >= 0 && attach.empty()) return;
    const int offset = mol.num_atoms();
    for (const auto& a : piece.atoms()) mol.add_atom(a);
    for (const auto& b : piece.bonds()) mol.add_bond(b.begin + offset, b.end + offset, b.order);
    if (anchor < 0) return;
    int local = offset + attach[rng_.below(attach.size())];
    int capacity = std::min(mol.atom(anchor).hydrogens, mol.atom(local).hydrogens);
    int order = 1;
    if (!mol.atom(anchor).aromatic && !mol.atom(local).aromatic && capacity >= 2 && rng_.uniform() < 0.15)
      order = capacity >= 3 && rng_.uniform() < 0.3 ? 3 : 2;
    mol.add_bond(anchor, local, static_cast<BondOrder>(order - 1));
    mol.atom(anchor).hydrogens -= order;
    mol.atom(local).hydrogens -= order;
  }

  void close_ring(Molecule& mol) {
    auto open = open_atoms(mol);
    for (int tries = 0; tries < 10 && open.size() >= 2; ++tries) {
      int u = open[rng_.below(open.size())];
      int v = open[rng_.below(open.size())];
      if (u == v || mol.bond_between(u, v) >= 0) continue;
      if (mol.atom(u).aromatic && mol.atom(v).aromatic) continue;
      auto frag = mol.fragment_ids();
      if (frag[u] != frag[v]) continue;
      mol.add_bond(u, v, BondOrder::Single);
      --mol.atom(u).hydrogens;
      --mol.atom(v).hydrogens;
      return;
    }
  }

  Rng rng_;
};

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(std::span<int>(p));
  return p;
}

}  // namespace hiermol
