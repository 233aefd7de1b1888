#include "hiermol/rings.hpp"

#include <deque>

namespace hiermol {

std::vector<std::vector<int>> simple_cycles(const Molecule& mol, int max_size) {
  std::vector<std::vector<int>> cycles;
  const int n = mol.num_atoms();
  std::vector<int> path;
  std::vector<bool> on_path(n, false);
  // Paths only visit atoms above the start, and each cycle is kept in the
  // direction where the second atom is smaller than the last.
  auto extend = [&](auto&& self, int start, int v) -> void {
    for (const auto& nb : mol.neighbors(v)) {
      int u = nb.atom;
      if (u == start && path.size() >= 3) {
        if (path[1] < path.back()) cycles.push_back(path);
        continue;
      }
      if (u <= start || on_path[u] || static_cast<int>(path.size()) >= max_size) continue;
      on_path[u] = true;
      path.push_back(u);
      self(self, start, u);
      path.pop_back();
      on_path[u] = false;
    }
  };
  auto ring = mol.ring_atoms();
  for (int s = 0; s < n; ++s) {
    if (!ring[s]) continue;
    path = {s};
    on_path[s] = true;
    extend(extend, s, s);
    on_path[s] = false;
  }
  return cycles;
}

std::vector<int> smallest_ring_through_bond(const Molecule& mol) {
  auto ring = mol.ring_bonds();
  std::vector<int> size(static_cast<std::size_t>(mol.num_bonds()), 0);
  std::vector<int> dist(static_cast<std::size_t>(mol.num_atoms()));
  for (int b = 0; b < mol.num_bonds(); ++b) {
    if (!ring[b]) continue;
    const auto& bond = mol.bond(b);
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<int> queue{bond.begin};
    dist[bond.begin] = 0;
    while (!queue.empty() && dist[bond.end] < 0) {
      int v = queue.front();
      queue.pop_front();
      for (const auto& nb : mol.neighbors(v)) {
        if (nb.bond == b || dist[nb.atom] >= 0) continue;
        dist[nb.atom] = dist[v] + 1;
        queue.push_back(nb.atom);
      }
    }
    size[b] = dist[bond.end] + 1;
  }
  return size;
}

int ring_count(const Molecule& mol) { return mol.num_bonds() - mol.num_atoms() + mol.num_fragments(); }

}  // namespace hiermol
