#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiermol/molecule.hpp"

namespace hiermol {

/// Context handed to a fragmentation rule for one candidate bond. Rules are
/// only consulted for single, acyclic bonds.
struct BondContext {
  const Molecule& mol;
  int bond;
  const std::vector<bool>& ring_atoms;
};

/// Named set of bond-cut predicates. A bond is cut when any rule accepts it.
struct FragmentationRules {
  std::string name;
  std::vector<std::function<bool(const BondContext&)>> rules;
};

/// Default rule set. A single acyclic bond whose endpoints both have heavy
/// degree above one is cut when exactly one endpoint is a ring atom, or when
/// it joins carbon to an acyclic N, O, S or P.
const FragmentationRules& simple_brics();

/// Looks up a rule set by name; throws std::invalid_argument if unknown.
const FragmentationRules& rules_by_name(std::string_view name);

/// Indices of bonds cut by the rules, ascending.
std::vector<int> fragment_bonds(const Molecule& mol, const FragmentationRules& rules);

struct MotifPartition {
  std::vector<int> motif_id;  ///< per atom, dense in 0..num_motifs-1
  int num_motifs = 0;

  /// Atom lists per motif, ascending.
  std::vector<std::vector<int>> members() const;
};

/// Connected components after removing the cut bonds, numbered in order of
/// their lowest atom index.
MotifPartition build_motifs(const Molecule& mol, std::span<const int> cuts);

enum class NodeLevel : std::uint8_t { Atom, Motif, Graph };

enum class EdgeKind : std::uint8_t { Single, Double, Triple, Aromatic, MotifLink, GraphLink };

inline constexpr int kNumEdgeKinds = 6;

/// Node vocabulary shared by atoms and hierarchy nodes: elements first, then
/// the motif, graph and mask tokens.
inline constexpr int kMotifToken = kNumElements;
inline constexpr int kGraphToken = kNumElements + 1;
inline constexpr int kMaskToken = kNumElements + 2;
inline constexpr int kNodeVocabulary = kNumElements + 3;

struct HierNode {
  NodeLevel level;
  int token;
};

struct HierEdge {
  int u;
  int v;
  EdgeKind kind;
};

struct HierNeighbor {
  int node;
  EdgeKind kind;
};

/// Augmented graph: atoms 0..a-1, motif nodes a..a+b-1, graph node a+b.
/// Edges are bonds (atom-atom), one motif link per atom, and one graph link
/// per motif.
class HierGraph {
 public:
  HierGraph(std::vector<HierNode> nodes, std::vector<HierEdge> edges, int num_atoms, int num_motifs,
            std::vector<int> motif_of_atom);

  int num_atoms() const { return a_; }
  int num_motifs() const { return b_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int graph_node() const { return a_ + b_; }
  int motif_node(int motif) const { return a_ + motif; }

  std::span<const HierNode> nodes() const { return nodes_; }
  std::span<const HierEdge> edges() const { return edges_; }
  const std::vector<int>& motif_of_atom() const { return motif_of_atom_; }

  /// Neighbors of a node, ascending by node index.
  std::span<const HierNeighbor> neighbors(int node) const {
    return {adjacency_.data() + offsets_[node], adjacency_.data() + offsets_[node + 1]};
  }

  /// Same graph with some node tokens replaced.
  HierGraph with_tokens(std::span<const int> node_ids, int token) const;

  /// Checks every structural invariant; returns the list of problems found.
  std::vector<std::string> check_invariants() const;

 private:
  std::vector<HierNode> nodes_;
  std::vector<HierEdge> edges_;
  int a_;
  int b_;
  std::vector<int> motif_of_atom_;
  std::vector<int> offsets_;
  std::vector<HierNeighbor> adjacency_;
};

EdgeKind edge_kind(BondOrder order);

HierGraph build_hier_graph(const Molecule& mol, const MotifPartition& partition);

/// fragment_bonds, build_motifs and build_hier_graph in sequence.
HierGraph segment(const Molecule& mol, const FragmentationRules& rules = simple_brics());

}  // namespace hiermol
