#include "hiermol/fusion.hpp"

#include <fstream>
#include <numeric>

#include "hiermol/binary_io.hpp"
#include "hiermol/pretrain.hpp"

namespace hiermol {

namespace {

constexpr std::string_view kTokenMagic = "HMOLTOKN";
constexpr std::string_view kProjectorMagic = "HMOLPROJ";
constexpr std::uint32_t kFormatVersion = 1;

struct ModeName {
  TokenReduction mode;
  std::string_view name;
};

constexpr ModeName kModeNames[] = {
    {TokenReduction::None, "none"},     {TokenReduction::Hierarchical, "hier"}, {TokenReduction::All, "all"},
    {TokenReduction::NodeOnly, "node"}, {TokenReduction::MotifOnly, "motif"},   {TokenReduction::GraphOnly, "graph"},
};

void write_matrix(std::ostream& out, const Matrix<float>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) binio::write_f32(out, m(r, c));
}

Matrix<float> read_matrix(std::istream& in, std::uint32_t rows, std::uint32_t cols) {
  if (static_cast<std::uint64_t>(rows) * cols > (1ULL << 30)) throw std::runtime_error("corrupt file: matrix too large");
  Matrix<float> m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = binio::read_f32(in);
  return m;
}

}  // namespace

std::optional<TokenReduction> reduction_from_name(std::string_view name) {
  for (const auto& m : kModeNames)
    if (m.name == name) return m.mode;
  return std::nullopt;
}

std::string_view reduction_name(TokenReduction mode) {
  for (const auto& m : kModeNames)
    if (m.mode == mode) return m.name;
  return "unknown";
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Node: return "node";
    case Level::Motif: return "motif";
    case Level::Graph: return "graph";
  }
  return "unknown";
}

// ---------------------------------------------------- projector alignment --

Projector<float> align_projector(const std::vector<AlignSample>& data, const AlignConfig& config, std::vector<double>* loss_history) {
  if (data.size() < 2) throw std::invalid_argument("projector alignment needs at least two samples");
  if (config.lr < 0) throw std::invalid_argument("lr must be non-negative");
  const int n = static_cast<int>(data.size());
  const int d_gnn = data.front().features.dim();
  const int d_llm = static_cast<int>(data.front().target.size());
  // With a shared affine map, the all-reduced projected token equals the
  // projection of the raw token mean.
  Matrix<float> means(n, d_gnn), targets(n, d_llm);
  for (int i = 0; i < n; ++i) {
    const auto& f = data[i].features;
    if (f.dim() != d_gnn || data[i].target.size() != d_llm) throw std::invalid_argument("alignment samples differ in shape");
    means.row(i) = (f.nodes.colwise().sum() + f.motifs.colwise().sum() + f.graph) / static_cast<float>(f.a() + f.b() + 1);
    targets.row(i) = data[i].target.cast<float>();
  }

  Projector<float> p = init_projector<float>(config.seed, d_gnn, d_llm);
  Matrix<float> m_w = Matrix<float>::Zero(d_gnn, d_llm), v_w = m_w;
  RowVector<float> m_b = RowVector<float>::Zero(d_llm), v_b = m_b;
  const AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
  const int batch = std::clamp(config.batch_size, 2, n);

  std::vector<int> order;
  std::size_t cursor = 0;
  std::uint64_t epoch = 0;
  std::vector<int> rows(static_cast<std::size_t>(batch));
  for (int step = 0; step < config.steps; ++step) {
    for (auto& r : rows) {
      if (cursor == order.size()) {
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(config.seed, 0x616c69676eULL + epoch++));
        rng.shuffle(std::span<int>(order));
        cursor = 0;
      }
      r = order[cursor++];
    }
    Matrix<float> x(batch, d_gnn), t(batch, d_llm);
    for (int i = 0; i < batch; ++i) {
      x.row(i) = means.row(rows[i]);
      t.row(i) = targets.row(rows[i]);
    }
    Matrix<float> u = project_rows(x, p);
    Matrix<float> d_u = Matrix<float>::Zero(batch, d_llm);
    const float loss = contrastive_loss<float>(u, t, derangement(batch, mix_seed(config.seed, static_cast<std::uint64_t>(step))), &d_u);
    if (!std::isfinite(loss)) throw std::runtime_error("projector alignment diverged at step " + std::to_string(step));
    if (loss_history) loss_history->push_back(loss);
    Matrix<float> g_w = x.transpose() * d_u;
    RowVector<float> g_b = d_u.colwise().sum();
    adam_update(p.weight, g_w, m_w, v_w, adam, step + 1);
    adam_update(p.bias, g_b, m_b, v_b, adam, step + 1);
  }
  return p;
}

Matrix<double> alignment_scores(const std::vector<AlignSample>& data, const Projector<float>& projector) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix<double> tokens(n, projector.out_dim()), targets(n, projector.out_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    tokens.row(i) = reduce_all(project(data[i].features, projector)).tokens.row(0).cast<double>();
    targets.row(i) = data[i].target;
  }
  return tokens * targets.transpose();
}

// ------------------------------------------------------------ file formats --

void export_tokens(std::ostream& out, const TokenBundle<float>& b) {
  if (static_cast<int>(b.level_ids.size()) != b.k()) throw std::invalid_argument("level id count differs from token count");
  binio::write_bytes(out, kTokenMagic);
  binio::write_u32(out, kFormatVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(b.k()));
  binio::write_u32(out, static_cast<std::uint32_t>(b.dim()));
  binio::write_u32(out, static_cast<std::uint32_t>(b.reduction));
  for (Level l : b.level_ids) binio::write_u32(out, static_cast<std::uint32_t>(l));
  write_matrix(out, b.tokens);
  if (!out) throw std::runtime_error("failed to write token file");
}

TokenBundle<float> import_tokens(std::istream& in) {
  binio::expect_magic(in, kTokenMagic, "token");
  if (auto v = binio::read_u32(in); v != kFormatVersion) throw std::runtime_error("unsupported token file version " + std::to_string(v));
  const auto k = binio::read_u32(in);
  const auto d = binio::read_u32(in);
  const auto tag = binio::read_u32(in);
  if (tag > static_cast<std::uint32_t>(TokenReduction::GraphOnly)) throw std::runtime_error("corrupt token file: bad reduction tag");
  TokenBundle<float> b;
  b.reduction = static_cast<TokenReduction>(tag);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto l = binio::read_u32(in);
    if (l > static_cast<std::uint32_t>(Level::Graph)) throw std::runtime_error("corrupt token file: bad level id");
    b.level_ids.push_back(static_cast<Level>(l));
  }
  b.tokens = read_matrix(in, k, d);
  return b;
}

void export_tokens(const std::string& path, const TokenBundle<float>& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  export_tokens(out, bundle);
}

TokenBundle<float> import_tokens(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return import_tokens(in);
}

void save_projector(std::ostream& out, const Projector<float>& p) {
  binio::write_bytes(out, kProjectorMagic);
  binio::write_u32(out, kFormatVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(p.in_dim()));
  binio::write_u32(out, static_cast<std::uint32_t>(p.out_dim()));
  write_matrix(out, p.weight);
  write_matrix(out, p.bias);
  if (!out) throw std::runtime_error("failed to write projector");
}

Projector<float> load_projector(std::istream& in) {
  binio::expect_magic(in, kProjectorMagic, "projector");
  if (auto v = binio::read_u32(in); v != kFormatVersion) throw std::runtime_error("unsupported projector version " + std::to_string(v));
  const auto d_gnn = binio::read_u32(in);
  const auto d_llm = binio::read_u32(in);
  Projector<float> p;
  p.weight = read_matrix(in, d_gnn, d_llm);
  p.bias = read_matrix(in, 1, d_llm);
  return p;
}

void save_projector(const std::string& path, const Projector<float>& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_projector(out, p);
}

Projector<float> load_projector(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_projector(in);
}

}  // namespace hiermol
