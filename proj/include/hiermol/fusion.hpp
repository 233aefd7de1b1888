#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hiermol/encoder.hpp"

namespace hiermol {

inline constexpr int kDefaultLlmDim = 2048;

enum class Level : std::uint8_t { Node, Motif, Graph };

/// How projected tokens are collapsed before they reach the language model.
/// The numeric values are the tags stored in token files.
enum class TokenReduction : std::uint8_t { None, Hierarchical, All, NodeOnly, MotifOnly, GraphOnly };

/// Accepts none, hier, all, node, motif, graph.
std::optional<TokenReduction> reduction_from_name(std::string_view name);
std::string_view reduction_name(TokenReduction mode);
std::string_view level_name(Level level);

/// Affine map from encoder space to language-model space, shared by all
/// three levels: x -> x * weight + bias.
template <typename Scalar>
struct Projector {
  Matrix<Scalar> weight;  // d_gnn x d_llm
  RowVector<Scalar> bias;

  int in_dim() const { return static_cast<int>(weight.rows()); }
  int out_dim() const { return static_cast<int>(weight.cols()); }
};

/// Weight ~ Uniform(-1/sqrt(d_gnn), 1/sqrt(d_gnn)), zero bias.
template <typename Scalar>
Projector<Scalar> init_projector(std::uint64_t seed, int d_gnn, int d_llm) {
  if (d_gnn < 1 || d_llm < 1) throw std::invalid_argument("projector dimensions must be positive");
  Projector<Scalar> p{Matrix<Scalar>(d_gnn, d_llm), RowVector<Scalar>::Zero(d_llm)};
  Rng rng(mix_seed(seed, 0x70726f6a));
  fill_uniform(p.weight, rng, d_gnn);
  return p;
}

template <typename Scalar>
Matrix<Scalar> project_rows(const Matrix<Scalar>& rows, const Projector<Scalar>& p) {
  if (rows.cols() != p.in_dim()) throw std::invalid_argument("feature width differs from projector input width");
  Matrix<Scalar> out = rows * p.weight;
  out.rowwise() += p.bias;
  return out;
}

/// Applies the projector row-wise to nodes, motifs and the graph vector.
template <typename Scalar>
LevelFeatures<Scalar> project(const LevelFeatures<Scalar>& f, const Projector<Scalar>& p) {
  if (f.dim() != p.in_dim()) throw std::invalid_argument("feature width differs from projector input width");
  return {project_rows(f.nodes, p), project_rows(f.motifs, p), f.graph * p.weight + p.bias};
}

template <typename Scalar>
struct TokenBundle {
  Matrix<Scalar> tokens;  // k x d_llm
  std::vector<Level> level_ids;
  TokenReduction reduction = TokenReduction::None;

  int k() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }
};

/// All tokens in node, motif, graph order; k = a + b + 1.
template <typename Scalar>
TokenBundle<Scalar> reduce_none(const LevelFeatures<Scalar>& f) {
  TokenBundle<Scalar> out{f.stacked(), {}, TokenReduction::None};
  out.level_ids.assign(static_cast<std::size_t>(f.a()), Level::Node);
  out.level_ids.insert(out.level_ids.end(), static_cast<std::size_t>(f.b()), Level::Motif);
  out.level_ids.push_back(Level::Graph);
  return out;
}

/// [mean of node tokens, mean of motif tokens, graph token]; k = 3.
template <typename Scalar>
TokenBundle<Scalar> reduce_hierarchical(const LevelFeatures<Scalar>& f) {
  if (f.a() == 0 || f.b() == 0) throw std::invalid_argument("hierarchical reduction needs non-empty node and motif levels");
  Matrix<Scalar> tokens(3, f.dim());
  tokens.row(0) = f.nodes.colwise().mean();
  tokens.row(1) = f.motifs.colwise().mean();
  tokens.row(2) = f.graph;
  return {std::move(tokens), {Level::Node, Level::Motif, Level::Graph}, TokenReduction::Hierarchical};
}

/// Mean over all a + b + 1 tokens; k = 1. The single token is tagged with
/// the graph level.
template <typename Scalar>
TokenBundle<Scalar> reduce_all(const LevelFeatures<Scalar>& f) {
  RowVector<Scalar> sum = f.nodes.colwise().sum() + f.motifs.colwise().sum() + f.graph;
  Matrix<Scalar> tokens = sum / static_cast<Scalar>(f.a() + f.b() + 1);
  return {std::move(tokens), {Level::Graph}, TokenReduction::All};
}

/// Mean of one level's tokens; k = 1.
template <typename Scalar>
TokenBundle<Scalar> select_level(const LevelFeatures<Scalar>& f, Level level) {
  Matrix<Scalar> tokens;
  TokenReduction tag;
  switch (level) {
    case Level::Node:
      if (f.a() == 0) throw std::invalid_argument("node level is empty");
      tokens = f.nodes.colwise().mean();
      tag = TokenReduction::NodeOnly;
      break;
    case Level::Motif:
      if (f.b() == 0) throw std::invalid_argument("motif level is empty");
      tokens = f.motifs.colwise().mean();
      tag = TokenReduction::MotifOnly;
      break;
    default:
      tokens = f.graph;
      tag = TokenReduction::GraphOnly;
  }
  return {std::move(tokens), {level}, tag};
}

template <typename Scalar>
TokenBundle<Scalar> reduce(const LevelFeatures<Scalar>& f, TokenReduction mode) {
  switch (mode) {
    case TokenReduction::None: return reduce_none(f);
    case TokenReduction::Hierarchical: return reduce_hierarchical(f);
    case TokenReduction::All: return reduce_all(f);
    case TokenReduction::NodeOnly: return select_level(f, Level::Node);
    case TokenReduction::MotifOnly: return select_level(f, Level::Motif);
    case TokenReduction::GraphOnly: return select_level(f, Level::Graph);
  }
  throw std::invalid_argument("unknown reduction mode");
}

/// Projects a padded batch; padding rows stay exactly zero.
template <typename Scalar>
BatchedFeatures<Scalar> project_batch(const BatchedFeatures<Scalar>& batch, const Projector<Scalar>& p) {
  BatchedFeatures<Scalar> out = batch;
  out.nodes = project_rows(batch.nodes, p);
  out.motifs = project_rows(batch.motifs, p);
  out.graphs = project_rows(batch.graphs, p);
  for (int i = 0; i < batch.size(); ++i) {
    for (int r = 0; r < batch.max_atoms; ++r)
      if (!batch.node_mask(i, r)) out.nodes.row(static_cast<Eigen::Index>(i) * batch.max_atoms + r).setZero();
    for (int r = 0; r < batch.max_motifs; ++r)
      if (!batch.motif_mask(i, r)) out.motifs.row(static_cast<Eigen::Index>(i) * batch.max_motifs + r).setZero();
  }
  return out;
}

/// Per-sample reductions straight from the padded layout: sums run over the
/// full padded block and are divided by the mask count, so zero padding
/// never changes a token.
template <typename Scalar>
std::vector<TokenBundle<Scalar>> reduce_batch(const BatchedFeatures<Scalar>& batch, TokenReduction mode) {
  std::vector<TokenBundle<Scalar>> out;
  out.reserve(static_cast<std::size_t>(batch.size()));
  for (int i = 0; i < batch.size(); ++i) {
    const int a = batch.atom_count(i), b = batch.motif_count(i);
    if (mode == TokenReduction::None) {
      out.push_back(reduce_none(batch.unpad(i)));
      continue;
    }
    const RowVector<Scalar> node_sum = batch.sample_nodes(i).colwise().sum();
    const RowVector<Scalar> motif_sum = batch.sample_motifs(i).colwise().sum();
    const RowVector<Scalar> graph = batch.graphs.row(i);
    TokenBundle<Scalar> t;
    t.reduction = mode;
    auto need = [](int n, const char* what) {
      if (n == 0) throw std::invalid_argument(std::string(what) + " level is empty");
    };
    switch (mode) {
      case TokenReduction::Hierarchical:
        need(a, "node");
        need(b, "motif");
        t.tokens.resize(3, batch.dim());
        t.tokens << node_sum / static_cast<Scalar>(a), motif_sum / static_cast<Scalar>(b), graph;
        t.level_ids = {Level::Node, Level::Motif, Level::Graph};
        break;
      case TokenReduction::All:
        t.tokens = (node_sum + motif_sum + graph) / static_cast<Scalar>(a + b + 1);
        t.level_ids = {Level::Graph};
        break;
      case TokenReduction::NodeOnly:
        need(a, "node");
        t.tokens = node_sum / static_cast<Scalar>(a);
        t.level_ids = {Level::Node};
        break;
      case TokenReduction::MotifOnly:
        need(b, "motif");
        t.tokens = motif_sum / static_cast<Scalar>(b);
        t.level_ids = {Level::Motif};
        break;
      default:
        t.tokens = graph;
        t.level_ids = {Level::Graph};
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------- projector alignment --

struct AlignSample {
  LevelFeatures<float> features;
  Eigen::RowVectorXd target;  ///< length d_llm
};

struct AlignConfig {
  std::uint64_t seed = 0;
  int steps = 500;
  int batch_size = 64;
  double lr = 1e-3;
};

/// Trains a projector with the encoder frozen: the all-reduced token of each
/// molecule is scored against text targets with the logistic contrastive
/// loss (one in-batch derangement of negatives per step), optimized with
/// Adam. Deterministic per seed. Throws std::runtime_error on divergence.
Projector<float> align_projector(const std::vector<AlignSample>& data, const AlignConfig& config,
                                 std::vector<double>* loss_history = nullptr);

/// Score matrix S(i, j) = reduce_all(project(features_i)) . target_j.
Matrix<double> alignment_scores(const std::vector<AlignSample>& data, const Projector<float>& projector);

// ------------------------------------------------------------ file formats --

/// "HMOLTOKN", u32 version, u32 k, u32 d_llm, u32 reduction tag, k x u32
/// level ids, then k*d_llm little-endian float32 values row by row.
void export_tokens(std::ostream& out, const TokenBundle<float>& bundle);
TokenBundle<float> import_tokens(std::istream& in);
void export_tokens(const std::string& path, const TokenBundle<float>& bundle);
TokenBundle<float> import_tokens(const std::string& path);

/// "HMOLPROJ", u32 version, u32 d_gnn, u32 d_llm, weight then bias as
/// little-endian float32 values.
void save_projector(std::ostream& out, const Projector<float>& p);
Projector<float> load_projector(std::istream& in);
void save_projector(const std::string& path, const Projector<float>& p);
Projector<float> load_projector(const std::string& path);

}  // namespace hiermol
