#include "hiermol/hierseg.hpp"

#include <algorithm>
#include <stdexcept>

namespace hiermol {

namespace {

bool is_chain_hetero(Element e) { return e == Element::N || e == Element::O || e == Element::S || e == Element::P; }

bool ring_chain_junction(const BondContext& c) {
  const Bond& b = c.mol.bond(c.bond);
  return c.ring_atoms[b.begin] != c.ring_atoms[b.end];
}

bool carbon_to_acyclic_hetero(const BondContext& c) {
  const Bond& b = c.mol.bond(c.bond);
  auto test = [&](int carbon, int hetero) {
    return c.mol.atom(carbon).element == Element::C && is_chain_hetero(c.mol.atom(hetero).element) && !c.ring_atoms[hetero];
  };
  return test(b.begin, b.end) || test(b.end, b.begin);
}

}  // namespace

const FragmentationRules& simple_brics() {
  static const FragmentationRules rules{"simple-brics", {ring_chain_junction, carbon_to_acyclic_hetero}};
  return rules;
}

const FragmentationRules& rules_by_name(std::string_view name) {
  if (name == simple_brics().name) return simple_brics();
  throw std::invalid_argument("unknown fragmentation rule set: " + std::string(name));
}

std::vector<int> fragment_bonds(const Molecule& mol, const FragmentationRules& rules) {
  auto ring_bond = mol.ring_bonds();
  auto ring_atom = mol.ring_atoms();
  std::vector<int> cuts;
  for (int i = 0; i < mol.num_bonds(); ++i) {
    const Bond& b = mol.bond(i);
    if (b.order != BondOrder::Single || ring_bond[i]) continue;
    if (mol.heavy_degree(b.begin) <= 1 || mol.heavy_degree(b.end) <= 1) continue;
    BondContext ctx{mol, i, ring_atom};
    if (std::any_of(rules.rules.begin(), rules.rules.end(), [&](const auto& rule) { return rule(ctx); })) cuts.push_back(i);
  }
  return cuts;
}

std::vector<std::vector<int>> MotifPartition::members() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_motifs));
  for (std::size_t v = 0; v < motif_id.size(); ++v) out[motif_id[v]].push_back(static_cast<int>(v));
  return out;
}

MotifPartition build_motifs(const Molecule& mol, std::span<const int> cuts) {
  std::vector<bool> cut(static_cast<std::size_t>(mol.num_bonds()), false);
  for (int c : cuts) {
    if (c < 0 || c >= mol.num_bonds()) throw std::invalid_argument("cut bond index out of range");
    cut[c] = true;
  }
  MotifPartition p;
  p.motif_id.assign(static_cast<std::size_t>(mol.num_atoms()), -1);
  std::vector<int> stack;
  for (int s = 0; s < mol.num_atoms(); ++s) {
    if (p.motif_id[s] >= 0) continue;
    p.motif_id[s] = p.num_motifs;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& nb : mol.neighbors(v)) {
        if (cut[nb.bond] || p.motif_id[nb.atom] >= 0) continue;
        p.motif_id[nb.atom] = p.num_motifs;
        stack.push_back(nb.atom);
      }
    }
    ++p.num_motifs;
  }
  return p;
}

EdgeKind edge_kind(BondOrder order) { return static_cast<EdgeKind>(order); }

HierGraph::HierGraph(std::vector<HierNode> nodes, std::vector<HierEdge> edges, int num_atoms, int num_motifs,
                     std::vector<int> motif_of_atom)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), a_(num_atoms), b_(num_motifs), motif_of_atom_(std::move(motif_of_atom)) {
  const int n = num_nodes();
  std::vector<std::vector<HierNeighbor>> adj(static_cast<std::size_t>(n));
  for (const auto& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n || e.u == e.v) throw std::invalid_argument("hierarchy edge out of range");
    adj[e.u].push_back({e.v, e.kind});
    adj[e.v].push_back({e.u, e.kind});
  }
  offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int v = 0; v < n; ++v) {
    std::sort(adj[v].begin(), adj[v].end(), [](const HierNeighbor& x, const HierNeighbor& y) { return x.node < y.node; });
    offsets_[v + 1] = offsets_[v] + static_cast<int>(adj[v].size());
    adjacency_.insert(adjacency_.end(), adj[v].begin(), adj[v].end());
  }
}

HierGraph HierGraph::with_tokens(std::span<const int> node_ids, int token) const {
  HierGraph copy = *this;
  for (int id : node_ids) copy.nodes_.at(static_cast<std::size_t>(id)).token = token;
  return copy;
}

std::vector<std::string> HierGraph::check_invariants() const {
  std::vector<std::string> problems;
  int graph_nodes = 0;
  for (int v = 0; v < num_nodes(); ++v) {
    NodeLevel expected = v < a_ ? NodeLevel::Atom : (v < a_ + b_ ? NodeLevel::Motif : NodeLevel::Graph);
    if (nodes_[v].level != expected) problems.push_back("node " + std::to_string(v) + " has the wrong level");
    if (nodes_[v].level == NodeLevel::Graph) ++graph_nodes;
  }
  if (graph_nodes != 1) problems.push_back("expected exactly one graph node");
  std::vector<int> motif_links(static_cast<std::size_t>(a_), 0);
  int graph_links = 0, total_motif_links = 0;
  for (const auto& e : edges_) {
    auto level = [&](int v) { return nodes_[v].level; };
    switch (e.kind) {
      case EdgeKind::MotifLink: {
        ++total_motif_links;
        int atom = level(e.u) == NodeLevel::Atom ? e.u : e.v;
        int motif = atom == e.u ? e.v : e.u;
        if (level(atom) != NodeLevel::Atom || level(motif) != NodeLevel::Motif) {
          problems.push_back("motif link between wrong levels");
          break;
        }
        ++motif_links[atom];
        if (motif != motif_node(motif_of_atom_[atom])) problems.push_back("atom " + std::to_string(atom) + " linked to a foreign motif");
        break;
      }
      case EdgeKind::GraphLink: {
        ++graph_links;
        bool ok = (level(e.u) == NodeLevel::Graph && level(e.v) == NodeLevel::Motif) ||
                  (level(e.v) == NodeLevel::Graph && level(e.u) == NodeLevel::Motif);
        if (!ok) problems.push_back("graph link not between graph and motif nodes");
        break;
      }
      default:
        if (level(e.u) != NodeLevel::Atom || level(e.v) != NodeLevel::Atom) problems.push_back("bond edge touches a hierarchy node");
    }
  }
  for (int v = 0; v < a_; ++v)
    if (motif_links[v] != 1) problems.push_back("atom " + std::to_string(v) + " has " + std::to_string(motif_links[v]) + " motif links");
  if (total_motif_links != a_) problems.push_back("|E_m| != a");
  if (graph_links != b_) problems.push_back("|E_g| != b");
  return problems;
}

HierGraph build_hier_graph(const Molecule& mol, const MotifPartition& partition) {
  const int a = mol.num_atoms();
  const int b = partition.num_motifs;
  if (static_cast<int>(partition.motif_id.size()) != a) throw std::invalid_argument("partition does not cover the molecule");
  std::vector<HierNode> nodes;
  nodes.reserve(static_cast<std::size_t>(a + b + 1));
  for (const auto& atom : mol.atoms()) nodes.push_back({NodeLevel::Atom, static_cast<int>(atom.element)});
  for (int m = 0; m < b; ++m) nodes.push_back({NodeLevel::Motif, kMotifToken});
  nodes.push_back({NodeLevel::Graph, kGraphToken});
  std::vector<HierEdge> edges;
  edges.reserve(static_cast<std::size_t>(mol.num_bonds() + a + b));
  for (const auto& bond : mol.bonds()) edges.push_back({bond.begin, bond.end, edge_kind(bond.order)});
  for (int v = 0; v < a; ++v) {
    int m = partition.motif_id[v];
    if (m < 0 || m >= b) throw std::invalid_argument("motif id out of range");
    edges.push_back({v, a + m, EdgeKind::MotifLink});
  }
  for (int m = 0; m < b; ++m) edges.push_back({a + b, a + m, EdgeKind::GraphLink});
  return HierGraph(std::move(nodes), std::move(edges), a, b, partition.motif_id);
}

HierGraph segment(const Molecule& mol, const FragmentationRules& rules) {
  auto cuts = fragment_bonds(mol, rules);
  return build_hier_graph(mol, build_motifs(mol, cuts));
}

}  // namespace hiermol
