#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "hiermol/encoder.hpp"

namespace hiermol {

inline constexpr int kAtomClasses = kNumElements;
inline constexpr int kBondClasses = kNumBondOrders;

/// Prediction heads on top of the encoder. Row-vector convention: a head
/// maps an input row x to x * W + b.
template <typename Scalar>
struct Heads {
  Matrix<Scalar> atom_w;  // d x kAtomClasses
  RowVector<Scalar> atom_b;
  Matrix<Scalar> bond_w;  // 2d x kBondClasses, input [n_u + n_v, n_u * n_v]
  RowVector<Scalar> bond_b;
  Matrix<Scalar> atom_count_w;  // d x 1
  Scalar atom_count_b = 0;
  Matrix<Scalar> bond_count_w;  // d x 1
  Scalar bond_count_b = 0;
  Matrix<Scalar> text_proj;  // d x d_text, maps graph vectors into text space

  int text_dim() const { return static_cast<int>(text_proj.cols()); }

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
  static void visit(Self& h, F& f) {
    detail::visit_block("heads.atom_w", h.atom_w, f);
    detail::visit_block("heads.atom_b", h.atom_b, f);
    detail::visit_block("heads.bond_w", h.bond_w, f);
    detail::visit_block("heads.bond_b", h.bond_b, f);
    detail::visit_block("heads.atom_count_w", h.atom_count_w, f);
    detail::visit_block("heads.atom_count_b", h.atom_count_b, f);
    detail::visit_block("heads.bond_count_w", h.bond_count_w, f);
    detail::visit_block("heads.bond_count_b", h.bond_count_b, f);
    detail::visit_block("heads.text_proj", h.text_proj, f);
  }
};

/// Encoder plus heads: everything pre-training updates.
template <typename Scalar>
struct Model {
  GnnParams<Scalar> gnn;
  Heads<Scalar> heads;

  int dim() const { return gnn.dim(); }
  int depth() const { return gnn.depth(); }
  int text_dim() const { return heads.text_dim(); }

  template <typename F>
  void for_each_block(F&& f) {
    gnn.for_each_block(f);
    heads.for_each_block(f);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    gnn.for_each_block(f);
    heads.for_each_block(f);
  }
};

template <typename Scalar>
Model<Scalar> zero_model(int dim, int depth, int text_dim) {
  if (text_dim < 1) throw std::invalid_argument("d_text must be at least 1");
  Model<Scalar> m;
  m.gnn = zero_params<Scalar>(dim, depth);
  auto& h = m.heads;
  h.atom_w = Matrix<Scalar>::Zero(dim, kAtomClasses);
  h.atom_b = RowVector<Scalar>::Zero(kAtomClasses);
  h.bond_w = Matrix<Scalar>::Zero(2 * dim, kBondClasses);
  h.bond_b = RowVector<Scalar>::Zero(kBondClasses);
  h.atom_count_w = Matrix<Scalar>::Zero(dim, 1);
  h.bond_count_w = Matrix<Scalar>::Zero(dim, 1);
  h.text_proj = Matrix<Scalar>::Zero(dim, text_dim);
  return m;
}

/// Encoder initialized as in init_params; head weights drawn from
/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) on an independent stream,
/// head biases zero.
template <typename Scalar>
Model<Scalar> init_model(std::uint64_t seed, int dim, int depth, int text_dim) {
  Model<Scalar> m = zero_model<Scalar>(dim, depth, text_dim);
  m.gnn = init_params<Scalar>(seed, dim, depth);
  Rng rng(mix_seed(seed, 0x6865616473));
  fill_uniform(m.heads.atom_w, rng, dim);
  fill_uniform(m.heads.bond_w, rng, 2.0 * dim);
  fill_uniform(m.heads.atom_count_w, rng, dim);
  fill_uniform(m.heads.bond_count_w, rng, dim);
  fill_uniform(m.heads.text_proj, rng, dim);
  return m;
}

template <typename To, typename From>
Model<To> cast_model(const Model<From>& m) {
  Model<To> out = zero_model<To>(m.dim(), m.depth(), m.text_dim());
  out.gnn = cast_params<To>(m.gnn);
  std::vector<Eigen::Map<const Matrix<From>>> src;
  m.heads.for_each_block([&](const std::string&, auto map) { src.push_back(map); });
  std::size_t i = 0;
  out.heads.for_each_block([&](const std::string&, auto map) { map = src[i++].template cast<To>(); });
  return out;
}

/// dst += alpha * src, block by block.
template <typename Scalar>
void add_scaled(Model<Scalar>& dst, const Model<Scalar>& src, Scalar alpha = 1) {
  std::vector<Eigen::Map<const Matrix<Scalar>>> blocks;
  src.for_each_block([&](const std::string&, auto map) { blocks.push_back(map); });
  std::size_t i = 0;
  dst.for_each_block([&](const std::string&, auto map) { map += alpha * blocks[i++]; });
}

// ---------------------------------------------------------------- losses --

/// Labels derived from one molecule and its masked atom set.
struct SslTargets {
  std::vector<int> masked_atoms;
  std::vector<int> atom_labels;  ///< element index per masked atom
  std::vector<std::pair<int, int>> masked_bonds;  ///< bonds with >= 1 masked endpoint
  std::vector<int> bond_labels;  ///< bond order index per masked bond
  std::vector<std::pair<int, int>> bonds;  ///< every atom-atom bond, u < v
  int atom_count = 0;
  int bond_count = 0;
};

/// hg is the unmasked graph; its atom tokens provide the labels.
SslTargets make_targets(const HierGraph& hg, std::span<const int> masked_atoms);

inline constexpr double kProbabilityFloor = 1e-7;

/// log((1 - floor) / floor): scores beyond this saturate the clamped
/// probability and carry no gradient.
inline double score_limit() { return std::log((1.0 - kProbabilityFloor) / kProbabilityFloor); }

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Binary cross-entropy summed over unordered atom pairs i < j with
/// p_ij = sigmoid(n_i . n_j) clamped to [1e-7, 1 - 1e-7]; y_ij = 1 iff bonded.
/// Adds scale * d(loss)/d(nodes) into d_nodes when given.
template <typename Scalar>
Scalar link_loss(const Matrix<Scalar>& nodes, std::span<const std::pair<int, int>> bonds, Matrix<Scalar>* d_nodes = nullptr,
                 Scalar scale = 1) {
  const auto a = nodes.rows();
  Matrix<Scalar> gram = nodes * nodes.transpose();
  Matrix<Scalar> label = Matrix<Scalar>::Zero(a, a);
  for (auto [u, v] : bonds) label(u, v) = label(v, u) = 1;
  const Scalar limit = static_cast<Scalar>(score_limit());
  Matrix<Scalar> d_score;
  if (d_nodes) d_score = Matrix<Scalar>::Zero(a, a);
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < a; ++i) {
    for (Eigen::Index j = i + 1; j < a; ++j) {
      const Scalar s = gram(i, j);
      const Scalar clamped = std::clamp(s, -limit, limit);
      loss += softplus(clamped) - label(i, j) * clamped;
      if (d_nodes && s > -limit && s < limit) d_score(i, j) = d_score(j, i) = scale * (sigmoid(s) - label(i, j));
    }
  }
  if (d_nodes) d_nodes->noalias() += d_score * nodes;
  return loss;
}

/// Cross-entropy of softmax(logits) against label; writes scale * gradient
/// into d_logits when given.
template <typename Scalar, typename Row>
Scalar softmax_cross_entropy(const Row& logits, int label, RowVector<Scalar>* d_logits = nullptr, Scalar scale = 1) {
  const Scalar peak = logits.maxCoeff();
  RowVector<Scalar> e = (logits.array() - peak).exp().matrix();
  const Scalar z = e.sum();
  const Scalar loss = std::log(z) - (logits(label) - peak);
  if (d_logits) {
    *d_logits = (scale / z) * e;
    (*d_logits)(label) -= scale;
  }
  return loss;
}

/// Piecewise regression loss in the residual r = y_hat - y:
/// 0.5 r^2 for |r| < 1, |r| - 0.5 otherwise.
template <typename Scalar>
Scalar smooth_l1(Scalar r) {
  const Scalar m = std::abs(r);
  return m < 1 ? Scalar(0.5) * r * r : m - Scalar(0.5);
}

template <typename Scalar>
Scalar smooth_l1_grad(Scalar r) {
  return std::abs(r) < 1 ? r : (r > 0 ? Scalar(1) : Scalar(-1));
}

/// Cyclic permutation of 0..n-1 (Sattolo's algorithm), so no index maps to
/// itself. Requires n >= 2.
std::vector<int> derangement(int n, std::uint64_t seed);

/// Logistic contrastive loss between projected graph vectors z (B x k) and
/// text vectors t (B x k). With scores S = z t^T and negatives p:
///   mean_i -1/2 [ln s(S_ii) + ln(1 - s(S_i,p(i))) + ln(1 - s(S_p(i),i))]
/// Adds scale * gradients into d_z / d_t when given.
template <typename Scalar>
Scalar contrastive_loss(const Matrix<Scalar>& z, const Matrix<Scalar>& t, std::span<const int> negatives,
                        Matrix<Scalar>* d_z = nullptr, Matrix<Scalar>* d_t = nullptr, Scalar scale = 1) {
  const auto batch = z.rows();
  if (batch < 2) throw std::invalid_argument("contrastive loss needs a batch of at least 2");
  if (t.rows() != batch || t.cols() != z.cols()) throw std::invalid_argument("graph and text batches differ in shape");
  if (static_cast<Eigen::Index>(negatives.size()) != batch) throw std::invalid_argument("negative index count differs from batch");
  Matrix<Scalar> scores = z * t.transpose();
  Matrix<Scalar> d_scores = Matrix<Scalar>::Zero(batch, batch);
  const Scalar w = Scalar(0.5) / static_cast<Scalar>(batch);
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const Eigen::Index p = negatives[static_cast<std::size_t>(i)];
    // -ln s(x) = softplus(-x); -ln(1 - s(x)) = softplus(x)
    loss += w * (softplus(-scores(i, i)) + softplus(scores(i, p)) + softplus(scores(p, i)));
    d_scores(i, i) += -w * sigmoid(-scores(i, i));
    d_scores(i, p) += w * sigmoid(scores(i, p));
    d_scores(p, i) += w * sigmoid(scores(p, i));
  }
  if (d_z) d_z->noalias() += scale * d_scores * t;
  if (d_t) d_t->noalias() += scale * d_scores.transpose() * z;
  return loss;
}

// ------------------------------------------------------------- objective --

struct LossWeights {
  double link = 1.0;
  double atom_type = 1.0;
  double bond_type = 1.0;
  double atom_count = 1.0;
  double bond_count = 1.0;
  double contrastive = 1.0;

  /// Throws std::invalid_argument for negative or non-finite weights.
  void validate() const;
};

struct LossReport {
  double link = 0;
  double atom_type = 0;
  double bond_type = 0;
  double atom_count = 0;
  double bond_count = 0;
  double contrastive = 0;
  double total = 0;
  /// Fraction of masked atoms whose element the atom-type head predicts;
  /// diagnostic only, not part of total.
  double atom_type_accuracy = 0;
};

/// sum_k weight_k * loss_k over the six terms.
double total_loss(const LossReport& report, const LossWeights& weights);

/// One JSON object per line: step, the six losses, total, accuracy.
std::string to_json_line(int step, const LossReport& report);

/// How per-sample self-supervised terms combine across a batch. The
/// contrastive term is always a batch mean.
enum class Reduction { Mean, Sum };

struct ObjectiveConfig {
  LossWeights weights;
  Reduction reduction = Reduction::Mean;
  double mask_ratio = 0.15;
  /// When set, atom masks come from mix_seed(*mask_seed, sample.id) whatever
  /// the call seed, so every step sees the same masks (static masking).
  std::optional<std::uint64_t> mask_seed;
};

/// A training record: the molecule's hierarchy, an optional unit text vector
/// (empty when absent) and a stable id that seeds its masks.
struct PairSample {
  HierGraph graph;
  Eigen::RowVectorXd text;
  std::uint64_t id = 0;
};

namespace detail {

template <typename Scalar>
struct SampleState {
  MaskedGraph masked;
  SslTargets targets;
  EncoderTrace<Scalar> trace;
  Matrix<Scalar> states;
};

}  // namespace detail

/// Weighted pre-training objective on a batch and, when grad is non-null,
/// its exact gradient with respect to every block of model (grad is
/// overwritten). Atom masks are drawn from mix_seed(seed, sample.id) and
/// contrastive negatives from a derangement seeded by seed, so repeated
/// calls with the same arguments see identical masks. Bond-type terms skip
/// samples without a masked bond; Mean reduction divides each term by the
/// number of samples that contributed to it. Throws std::runtime_error on a
/// non-finite loss.
template <typename Scalar>
LossReport evaluate_objective(const Model<Scalar>& model, std::span<const PairSample> batch, const ObjectiveConfig& config,
                              std::uint64_t seed, Model<Scalar>* grad = nullptr) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  config.weights.validate();
  const LossWeights& w = config.weights;
  const int count = static_cast<int>(batch.size());
  const int d = model.dim();

  std::vector<detail::SampleState<Scalar>> samples;
  samples.reserve(batch.size());
  int with_masked_atoms = 0, with_masked_bonds = 0;
  for (int i = 0; i < count; ++i) {
    auto& s = samples.emplace_back(
        detail::SampleState<Scalar>{mask_atoms(batch[i].graph, config.mask_ratio, mix_seed(config.mask_seed.value_or(seed), batch[i].id)), {}, {}, {}});
    s.targets = make_targets(batch[i].graph, s.masked.masked_atoms);
    s.states = encode_nodes(s.masked.graph, model.gnn, grad ? &s.trace : nullptr);
    with_masked_atoms += !s.targets.masked_atoms.empty();
    with_masked_bonds += !s.targets.masked_bonds.empty();
  }
  if (w.atom_type > 0 && with_masked_atoms == 0) throw std::invalid_argument("atom-type loss needs at least one masked atom");
  const bool have_texts = count >= 2 && std::all_of(batch.begin(), batch.end(), [&](const PairSample& p) { return p.text.size() > 0; });
  if (w.contrastive > 0 && !have_texts) throw std::invalid_argument("contrastive loss needs text vectors and a batch of at least 2");

  const bool mean = config.reduction == Reduction::Mean;
  auto divisor = [&](int n) { return mean ? static_cast<Scalar>(std::max(n, 1)) : Scalar(1); };
  const Scalar c_link = static_cast<Scalar>(w.link) / divisor(count);
  const Scalar c_atom = static_cast<Scalar>(w.atom_type) / divisor(with_masked_atoms);
  const Scalar c_bond = static_cast<Scalar>(w.bond_type) / divisor(with_masked_bonds);
  const Scalar c_acount = static_cast<Scalar>(w.atom_count) / divisor(count);
  const Scalar c_bcount = static_cast<Scalar>(w.bond_count) / divisor(count);

  LossReport report;
  std::vector<Matrix<Scalar>> d_states(batch.size());
  std::vector<Model<Scalar>> sample_grads;
  if (grad) {
    *grad = zero_model<Scalar>(d, model.depth(), model.text_dim());
    for (int i = 0; i < count; ++i) {
      d_states[i] = Matrix<Scalar>::Zero(samples[i].states.rows(), d);
      sample_grads.push_back(zero_model<Scalar>(d, model.depth(), model.text_dim()));
    }
  }
  const auto& h = model.heads;
  int masked_total = 0, masked_correct = 0;
  for (int i = 0; i < count; ++i) {
    const auto& s = samples[i];
    const auto& tg = s.targets;
    const HierGraph& hg = batch[i].graph;
    const int a = hg.num_atoms();
    Matrix<Scalar>* ds = grad ? &d_states[i] : nullptr;
    Heads<Scalar>* gh = grad ? &sample_grads[i].heads : nullptr;
    const Matrix<Scalar> nodes = s.states.topRows(a);

    {
      Matrix<Scalar> d_nodes;
      if (ds) d_nodes = Matrix<Scalar>::Zero(a, d);
      report.link += static_cast<double>(link_loss<Scalar>(nodes, tg.bonds, ds ? &d_nodes : nullptr, c_link)) / divisor(count);
      if (ds) ds->topRows(a) += d_nodes;
    }

    if (!tg.masked_atoms.empty()) {
      const Scalar inv = Scalar(1) / static_cast<Scalar>(tg.masked_atoms.size());
      Scalar sum = 0;
      RowVector<Scalar> d_logits;
      for (std::size_t k = 0; k < tg.masked_atoms.size(); ++k) {
        const int v = tg.masked_atoms[k];
        RowVector<Scalar> logits = nodes.row(v) * h.atom_w + h.atom_b;
        Eigen::Index best;
        logits.maxCoeff(&best);
        masked_correct += best == tg.atom_labels[k];
        ++masked_total;
        sum += softmax_cross_entropy<Scalar>(logits, tg.atom_labels[k], ds ? &d_logits : nullptr, c_atom * inv);
        if (ds) {
          gh->atom_w.noalias() += nodes.row(v).transpose() * d_logits;
          gh->atom_b += d_logits;
          ds->row(v).noalias() += d_logits * h.atom_w.transpose();
        }
      }
      report.atom_type += static_cast<double>(sum * inv) / divisor(with_masked_atoms);
    }

    if (!tg.masked_bonds.empty()) {
      const Scalar inv = Scalar(1) / static_cast<Scalar>(tg.masked_bonds.size());
      Scalar sum = 0;
      RowVector<Scalar> input(2 * d), d_logits;
      for (std::size_t k = 0; k < tg.masked_bonds.size(); ++k) {
        auto [u, v] = tg.masked_bonds[k];
        input << nodes.row(u) + nodes.row(v), nodes.row(u).cwiseProduct(nodes.row(v));
        RowVector<Scalar> logits = input * h.bond_w + h.bond_b;
        sum += softmax_cross_entropy<Scalar>(logits, tg.bond_labels[k], ds ? &d_logits : nullptr, c_bond * inv);
        if (ds) {
          gh->bond_w.noalias() += input.transpose() * d_logits;
          gh->bond_b += d_logits;
          RowVector<Scalar> d_input = d_logits * h.bond_w.transpose();
          auto d_sum = d_input.head(d);
          auto d_prod = d_input.tail(d);
          ds->row(u) += d_sum + d_prod.cwiseProduct(nodes.row(v));
          ds->row(v) += d_sum + d_prod.cwiseProduct(nodes.row(u));
        }
      }
      report.bond_type += static_cast<double>(sum * inv) / divisor(with_masked_bonds);
    }

    const auto g = s.states.row(hg.graph_node());
    auto count_term = [&](const Matrix<Scalar>& cw, Scalar cb, int target, Scalar c, double& slot, Matrix<Scalar>* gw, Scalar* gb) {
      const Scalar r = g.dot(cw.col(0)) + cb - static_cast<Scalar>(target);
      slot += static_cast<double>(smooth_l1(r)) / divisor(count);
      if (ds) {
        const Scalar dr = c * smooth_l1_grad(r);
        *gw += dr * g.transpose();
        *gb += dr;
        ds->row(hg.graph_node()) += dr * cw.col(0).transpose();
      }
    };
    count_term(h.atom_count_w, h.atom_count_b, tg.atom_count, c_acount, report.atom_count, gh ? &gh->atom_count_w : nullptr,
                 gh ? &gh->atom_count_b : nullptr);
    count_term(h.bond_count_w, h.bond_count_b, tg.bond_count, c_bcount, report.bond_count, gh ? &gh->bond_count_w : nullptr,
                 gh ? &gh->bond_count_b : nullptr);
  }

  if (have_texts) {
    Matrix<Scalar> graphs(count, d), texts(count, model.text_dim());
    for (int i = 0; i < count; ++i) {
      if (batch[i].text.size() != model.text_dim()) throw std::invalid_argument("text vector width differs from d_text");
      graphs.row(i) = samples[i].states.row(batch[i].graph.graph_node());
      texts.row(i) = batch[i].text.template cast<Scalar>();
    }
    const Matrix<Scalar> z = graphs * h.text_proj;
    const auto negatives = derangement(count, mix_seed(seed, 0x6e6567));
    Matrix<Scalar> d_z;
    if (grad) d_z = Matrix<Scalar>::Zero(count, model.text_dim());
    report.contrastive = static_cast<double>(
        contrastive_loss<Scalar>(z, texts, negatives, grad ? &d_z : nullptr, nullptr, static_cast<Scalar>(w.contrastive)));
    if (grad) {
      grad->heads.text_proj.noalias() += graphs.transpose() * d_z;
      Matrix<Scalar> d_graphs = d_z * h.text_proj.transpose();
      for (int i = 0; i < count; ++i) d_states[i].row(batch[i].graph.graph_node()) += d_graphs.row(i);
    }
  }

  report.total = total_loss(report, w);
  report.atom_type_accuracy = masked_total ? static_cast<double>(masked_correct) / masked_total : 0.0;
  if (!std::isfinite(report.total)) throw std::runtime_error("non-finite loss");

  if (grad) {
    // Per-sample gradients are summed in batch order, so the reduction is
    // deterministic and a duplicated sample contributes exactly twice.
    for (int i = 0; i < count; ++i) {
      encode_backward(samples[i].masked.graph, model.gnn, samples[i].trace, std::move(d_states[i]), sample_grads[i].gnn);
      add_scaled(*grad, sample_grads[i]);
    }
  }
  return report;
}

// ------------------------------------------------------------- optimizer --

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a parameter block at step t (from 1).
template <typename P, typename G, typename M, typename V>
void adam_update(P&& param, const G& grad, M&& m, V&& v, const AdamConfig& config, int t) {
  using Scalar = typename std::remove_reference_t<P>::Scalar;
  const auto b1 = static_cast<Scalar>(config.beta1), b2 = static_cast<Scalar>(config.beta2);
  const auto lr = static_cast<Scalar>(config.lr), eps = static_cast<Scalar>(config.eps);
  const auto inv_c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(config.beta1, t)));
  const auto inv_c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(config.beta2, t)));
  m = b1 * m + (Scalar(1) - b1) * grad;
  v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() * inv_c1) / ((v.array() * inv_c2).sqrt() + eps);
}

template <typename Scalar>
class Adam {
 public:
  Adam(const Model<Scalar>& shape, AdamConfig config)
      : config_(config),
        m_(zero_model<Scalar>(shape.dim(), shape.depth(), shape.text_dim())),
        v_(zero_model<Scalar>(shape.dim(), shape.depth(), shape.text_dim())) {}

  void step(Model<Scalar>& model, const Model<Scalar>& grad) {
    ++t_;
    std::vector<Eigen::Map<const Matrix<Scalar>>> g;
    std::vector<Eigen::Map<Matrix<Scalar>>> m, v;
    grad.for_each_block([&](const std::string&, auto map) { g.push_back(map); });
    m_.for_each_block([&](const std::string&, auto map) { m.push_back(map); });
    v_.for_each_block([&](const std::string&, auto map) { v.push_back(map); });
    std::size_t i = 0;
    model.for_each_block([&](const std::string&, auto p) {
      adam_update(p, g[i], m[i], v[i], config_, t_);
      ++i;
    });
  }

  int steps() const { return t_; }

 private:
  AdamConfig config_;
  Model<Scalar> m_;
  Model<Scalar> v_;
  int t_ = 0;
};

// -------------------------------------------------------------- training --

struct TrainConfig {
  std::uint64_t seed = 0;
  int d_gnn = 300;
  int layers = 5;
  int d_text = 256;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int epochs = 1;
  int steps = 0;  ///< when positive, overrides epochs
  double mask_ratio = 0.15;
  /// Draw each molecule's mask once for the whole run instead of per step.
  bool static_masks = false;
  Reduction reduction = Reduction::Mean;
  LossWeights weights;
};

/// Reads the flat "key = value" format ('#' starts a comment). Unknown
/// keys and malformed values throw std::invalid_argument. Keys: seed,
/// d_gnn, layers, d_text, lr, beta1, beta2, adam_eps, batch_size, epochs,
/// steps, mask_ratio, static_masks (true|false), reduction (mean|sum), weight.link, weight.atom_type,
/// weight.bond_type, weight.atom_count, weight.bond_count,
/// weight.contrastive.
TrainConfig parse_train_config(std::string_view text);

/// Applies one "key=value" override to config.
void set_train_option(TrainConfig& config, std::string_view key, std::string_view value);

std::string format_train_config(const TrainConfig& config);

using StepLogger = std::function<void(int step, const LossReport&)>;

struct TrainResult {
  Model<float> model;
  std::vector<LossReport> history;
};

/// Adam on 32-bit parameters. Each epoch visits the dataset in an order
/// shuffled from the seed; step k evaluates its batch with seed
/// mix_seed(config.seed, k). Divergence throws std::runtime_error naming the
/// step.
TrainResult train(std::span<const PairSample> dataset, const TrainConfig& config, const StepLogger& log = {});

// ------------------------------------------------------------ checkpoint --

/// Binary layout: "HMOLCKPT", u32 version, u32 d_gnn, u32 layers, u32 block
/// count, then per block u32 name length, name bytes, u32 rows, u32 cols and
/// rows*cols little-endian float32 values in row-major order.
void save_checkpoint(std::ostream& out, const Model<float>& model);
Model<float> load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Model<float>& model);
Model<float> load_checkpoint(const std::string& path);

}  // namespace hiermol
