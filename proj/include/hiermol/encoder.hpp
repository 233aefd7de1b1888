#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "hiermol/hierseg.hpp"
#include "hiermol/rng.hpp"

namespace hiermol {

// Every parameter and activation matrix is row-major: node features are
// gathered and scattered by row, and checkpoints store blocks row by row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill, drawn in row-major order.
template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, Rng& rng, double fan_in) {
  const double bound = 1.0 / std::sqrt(fan_in);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
}

template <typename Scalar>
struct GinLayer {
  Matrix<Scalar> w1;  // d x d
  RowVector<Scalar> b1;
  Matrix<Scalar> w2;  // d x d
  RowVector<Scalar> b2;
  Scalar eps = 0;
};

namespace detail {

// Hands f(name, Map) a row-major view of a matrix, row vector or scalar
// parameter; the view is read-only when the parameter is const.
template <typename Param, typename F>
void visit_block(const std::string& name, Param& param, F& f) {
  using Plain = std::remove_const_t<Param>;
  if constexpr (std::is_arithmetic_v<Plain>) {
    using Map = std::conditional_t<std::is_const_v<Param>, Eigen::Map<const Matrix<Plain>>, Eigen::Map<Matrix<Plain>>>;
    f(name, Map(&param, 1, 1));
  } else {
    using Scalar = typename Plain::Scalar;
    using Map = std::conditional_t<std::is_const_v<Param>, Eigen::Map<const Matrix<Scalar>>, Eigen::Map<Matrix<Scalar>>>;
    f(name, Map(param.data(), param.rows(), param.cols()));
  }
}

}  // namespace detail

/// Encoder weights: node-token and edge-kind embedding tables plus one
/// two-layer perceptron and learnable epsilon per message-passing layer.
template <typename Scalar>
struct GnnParams {
  Matrix<Scalar> node_embedding;  // kNodeVocabulary x d
  Matrix<Scalar> edge_embedding;  // kNumEdgeKinds x d
  std::vector<GinLayer<Scalar>> layers;

  int dim() const { return static_cast<int>(node_embedding.cols()); }
  int depth() const { return static_cast<int>(layers.size()); }

  template <typename F>
  void for_each_block(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    visit(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& p, F& f) {
    detail::visit_block("gnn.node_embedding", p.node_embedding, f);
    detail::visit_block("gnn.edge_embedding", p.edge_embedding, f);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& layer = p.layers[l];
      const std::string prefix = "gnn.layer" + std::to_string(l) + ".";
      detail::visit_block(prefix + "w1", layer.w1, f);
      detail::visit_block(prefix + "b1", layer.b1, f);
      detail::visit_block(prefix + "w2", layer.w2, f);
      detail::visit_block(prefix + "b2", layer.b2, f);
      detail::visit_block(prefix + "eps", layer.eps, f);
    }
  }
};

/// Allocates parameters with the given shape, all zero.
template <typename Scalar>
GnnParams<Scalar> zero_params(int dim, int depth) {
  GnnParams<Scalar> p;
  p.node_embedding = Matrix<Scalar>::Zero(kNodeVocabulary, dim);
  p.edge_embedding = Matrix<Scalar>::Zero(kNumEdgeKinds, dim);
  p.layers.resize(static_cast<std::size_t>(depth));
  for (auto& layer : p.layers) {
    layer.w1 = Matrix<Scalar>::Zero(dim, dim);
    layer.b1 = RowVector<Scalar>::Zero(dim);
    layer.w2 = Matrix<Scalar>::Zero(dim, dim);
    layer.b2 = RowVector<Scalar>::Zero(dim);
    layer.eps = 0;
  }
  return p;
}

/// Deterministic initialization: every weight matrix and both embedding
/// tables draw from Uniform(-1/sqrt(d), 1/sqrt(d)) in block order; biases
/// and epsilons start at zero. Values are drawn in double precision so the
/// float and double models built from one seed agree up to rounding.
template <typename Scalar>
GnnParams<Scalar> init_params(std::uint64_t seed, int dim, int depth) {
  if (dim < 1) throw std::invalid_argument("d_GNN must be at least 1");
  if (depth < 0) throw std::invalid_argument("layer count must be non-negative");
  auto p = zero_params<Scalar>(dim, depth);
  Rng rng(mix_seed(seed, 0x676e6e));
  fill_uniform(p.node_embedding, rng, dim);
  fill_uniform(p.edge_embedding, rng, dim);
  for (auto& layer : p.layers) {
    fill_uniform(layer.w1, rng, dim);
    fill_uniform(layer.w2, rng, dim);
  }
  return p;
}

template <typename To, typename From>
GnnParams<To> cast_params(const GnnParams<From>& p) {
  GnnParams<To> out;
  out.node_embedding = p.node_embedding.template cast<To>();
  out.edge_embedding = p.edge_embedding.template cast<To>();
  for (const auto& l : p.layers)
    out.layers.push_back({l.w1.template cast<To>(), l.b1.template cast<To>(), l.w2.template cast<To>(), l.b2.template cast<To>(),
                          static_cast<To>(l.eps)});
  return out;
}

/// Per-level embeddings of one molecule: a node rows, b motif rows and the
/// graph-node row.
template <typename Scalar>
struct LevelFeatures {
  Matrix<Scalar> nodes;
  Matrix<Scalar> motifs;
  RowVector<Scalar> graph;

  int a() const { return static_cast<int>(nodes.rows()); }
  int b() const { return static_cast<int>(motifs.rows()); }
  int dim() const { return static_cast<int>(graph.cols()); }

  /// All a+b+1 rows in node, motif, graph order.
  Matrix<Scalar> stacked() const {
    Matrix<Scalar> out(a() + b() + 1, dim());
    out << nodes, motifs, graph;
    return out;
  }
};

/// Activations kept by the forward pass for the backward pass.
template <typename Scalar>
struct EncoderTrace {
  std::vector<Matrix<Scalar>> inputs;  // node states entering each layer
  std::vector<Matrix<Scalar>> aggregated;
  std::vector<Matrix<Scalar>> hidden_pre;  // before ReLU
};

/// Sum-aggregation message passing over every edge of the hierarchy:
///   z_v = (1 + eps) h_v + sum_{u in N(v)} (h_u + e_uv)
///   h_v <- relu(z_v W1 + b1) W2 + b2
/// Neighbors are accumulated in ascending index order, so outputs are
/// bit-reproducible. Returns the final (a+b+1) x d node states.
template <typename Scalar>
Matrix<Scalar> encode_nodes(const HierGraph& hg, const GnnParams<Scalar>& params, EncoderTrace<Scalar>* trace = nullptr) {
  const int n = hg.num_nodes();
  const int d = params.dim();
  Matrix<Scalar> h(n, d);
  for (int v = 0; v < n; ++v) h.row(v) = params.node_embedding.row(hg.nodes()[v].token);
  if (trace) *trace = {};
  RowVector<Scalar> agg(d);
  for (const auto& layer : params.layers) {
    Matrix<Scalar> z(n, d);
    for (int v = 0; v < n; ++v) {
      agg.setZero();
      for (const auto& nb : hg.neighbors(v)) {
        agg += h.row(nb.node);
        agg += params.edge_embedding.row(static_cast<int>(nb.kind));
      }
      z.row(v) = (Scalar(1) + layer.eps) * h.row(v) + agg;
    }
    Matrix<Scalar> pre = z * layer.w1;
    pre.rowwise() += layer.b1;
    Matrix<Scalar> next = pre.cwiseMax(Scalar(0)) * layer.w2;
    next.rowwise() += layer.b2;
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->aggregated.push_back(std::move(z));
      trace->hidden_pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

template <typename Scalar>
LevelFeatures<Scalar> split_levels(const HierGraph& hg, const Matrix<Scalar>& states) {
  const int a = hg.num_atoms();
  const int b = hg.num_motifs();
  return {states.topRows(a), states.middleRows(a, b), states.row(a + b)};
}

/// One forward pass yielding node, motif and graph embeddings.
template <typename Scalar>
LevelFeatures<Scalar> encode(const HierGraph& hg, const GnnParams<Scalar>& params) {
  return split_levels(hg, encode_nodes(hg, params));
}

/// Accumulates d(loss)/d(params) into grad given d(loss)/d(final states).
template <typename Scalar>
void encode_backward(const HierGraph& hg, const GnnParams<Scalar>& params, const EncoderTrace<Scalar>& trace,
                     Matrix<Scalar> d_states, GnnParams<Scalar>& grad) {
  const int n = hg.num_nodes();
  for (int l = params.depth() - 1; l >= 0; --l) {
    const auto& layer = params.layers[l];
    auto& g = grad.layers[l];
    const auto& h = trace.inputs[l];
    const auto& z = trace.aggregated[l];
    const auto& pre = trace.hidden_pre[l];
    Matrix<Scalar> act = pre.cwiseMax(Scalar(0));
    g.w2.noalias() += act.transpose() * d_states;
    g.b2 += d_states.colwise().sum();
    Matrix<Scalar> d_pre = (d_states * layer.w2.transpose()).cwiseProduct((pre.array() > Scalar(0)).template cast<Scalar>().matrix());
    g.w1.noalias() += z.transpose() * d_pre;
    g.b1 += d_pre.colwise().sum();
    Matrix<Scalar> d_z = d_pre * layer.w1.transpose();
    g.eps += d_z.cwiseProduct(h).sum();
    Matrix<Scalar> d_h = (Scalar(1) + layer.eps) * d_z;
    for (int v = 0; v < n; ++v) {
      for (const auto& nb : hg.neighbors(v)) {
        d_h.row(nb.node) += d_z.row(v);
        grad.edge_embedding.row(static_cast<int>(nb.kind)) += d_z.row(v);
      }
    }
    d_states = std::move(d_h);
  }
  for (int v = 0; v < n; ++v) grad.node_embedding.row(hg.nodes()[v].token) += d_states.row(v);
}

/// Zero-padded batch with validity masks. Sample i owns rows
/// [i*max_atoms, (i+1)*max_atoms) of nodes and likewise for motifs.
template <typename Scalar>
struct BatchedFeatures {
  int max_atoms = 0;
  int max_motifs = 0;
  Matrix<Scalar> nodes;
  Matrix<Scalar> motifs;
  Matrix<Scalar> graphs;  // one row per sample
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> node_mask;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> motif_mask;

  int size() const { return static_cast<int>(graphs.rows()); }
  int dim() const { return static_cast<int>(graphs.cols()); }
  int atom_count(int i) const { return static_cast<int>(node_mask.row(i).count()); }
  int motif_count(int i) const { return static_cast<int>(motif_mask.row(i).count()); }
  auto sample_nodes(int i) const { return nodes.middleRows(static_cast<Eigen::Index>(i) * max_atoms, max_atoms); }
  auto sample_motifs(int i) const { return motifs.middleRows(static_cast<Eigen::Index>(i) * max_motifs, max_motifs); }

  /// Unpadded features of sample i.
  LevelFeatures<Scalar> unpad(int i) const {
    return {sample_nodes(i).topRows(atom_count(i)), sample_motifs(i).topRows(motif_count(i)), graphs.row(i)};
  }
};

template <typename Scalar>
BatchedFeatures<Scalar> pad_batch(const std::vector<LevelFeatures<Scalar>>& items) {
  if (items.empty()) throw std::invalid_argument("empty batch");
  BatchedFeatures<Scalar> out;
  const int d = items.front().dim();
  for (const auto& f : items) {
    if (f.dim() != d) throw std::invalid_argument("feature width differs within batch");
    out.max_atoms = std::max(out.max_atoms, f.a());
    out.max_motifs = std::max(out.max_motifs, f.b());
  }
  const auto batch = static_cast<Eigen::Index>(items.size());
  out.nodes = Matrix<Scalar>::Zero(batch * out.max_atoms, d);
  out.motifs = Matrix<Scalar>::Zero(batch * out.max_motifs, d);
  out.graphs = Matrix<Scalar>::Zero(batch, d);
  out.node_mask.setConstant(batch, out.max_atoms, false);
  out.motif_mask.setConstant(batch, out.max_motifs, false);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto& f = items[static_cast<std::size_t>(i)];
    out.nodes.middleRows(i * out.max_atoms, f.a()) = f.nodes;
    out.motifs.middleRows(i * out.max_motifs, f.b()) = f.motifs;
    out.graphs.row(i) = f.graph;
    out.node_mask.row(i).head(f.a()).setConstant(true);
    out.motif_mask.row(i).head(f.b()).setConstant(true);
  }
  return out;
}

/// Encodes every graph independently and pads the results.
template <typename Scalar>
BatchedFeatures<Scalar> encode_batch(const std::vector<HierGraph>& graphs, const GnnParams<Scalar>& params) {
  if (graphs.empty()) throw std::invalid_argument("encode_batch needs at least one graph");
  std::vector<LevelFeatures<Scalar>> items;
  items.reserve(graphs.size());
  for (const auto& hg : graphs) items.push_back(encode(hg, params));
  return pad_batch(items);
}

struct MaskedGraph {
  HierGraph graph;
  std::vector<int> masked_atoms;  // ascending
};

/// Replaces ceil(ratio * a) atom tokens with the mask token; the choice is
/// a seeded shuffle of the atom indices.
MaskedGraph mask_atoms(const HierGraph& hg, double ratio, std::uint64_t seed);

// ------------------------------------------------------------ feature file --

/// "HMOLFEAT", u32 version, u32 count, u32 d, then per molecule u32 a,
/// u32 b and (a + b + 1) rows of d little-endian float32 values in node,
/// motif, graph order. All molecules share d.
void write_features(std::ostream& out, const std::vector<LevelFeatures<float>>& items, int dim);
std::vector<LevelFeatures<float>> read_features(std::istream& in);
void write_features(const std::string& path, const std::vector<LevelFeatures<float>>& items, int dim);
std::vector<LevelFeatures<float>> read_features(const std::string& path);

}  // namespace hiermol
