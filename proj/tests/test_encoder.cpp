#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "hiermol/encoder.hpp"
#include "hiermol/smiles.hpp"
#include "support/generators.hpp"

using namespace hiermol;

namespace {

HierGraph seg(std::string_view smiles) { return segment(parse_smiles(smiles)); }

double relative_gap(const Matrix<double>& a, const Matrix<double>& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300});
}

// Rows sorted lexicographically, for multiset comparison.
Matrix<double> sorted_rows(const Matrix<double>& m) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).data(), m.row(r).data() + m.cols());
  std::sort(rows.begin(), rows.end());
  Matrix<double> out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = rows[r][c];
  return out;
}

bool bit_identical(const GnnParams<float>& a, const GnnParams<float>& b) {
  std::vector<Matrix<float>> x, y;
  a.for_each_block([&](const std::string&, auto m) { x.emplace_back(m); });
  b.for_each_block([&](const std::string&, auto m) { y.emplace_back(m); });
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i].rows() != y[i].rows() || x[i].cols() != y[i].cols() ||
        std::memcmp(x[i].data(), y[i].data(), sizeof(float) * static_cast<std::size_t>(x[i].size())) != 0)
      return false;
  return true;
}

}  // namespace

TEST_CASE("init_params: determinism and shapes") {
  auto a = init_params<float>(0, 8, 2);
  auto b = init_params<float>(0, 8, 2);
  auto c = init_params<float>(1, 8, 2);
  CHECK(bit_identical(a, b));
  CHECK_FALSE(bit_identical(a, c));
  CHECK(a.node_embedding.rows() == kNodeVocabulary);
  CHECK(a.node_embedding.cols() == 8);
  CHECK(a.edge_embedding.rows() == kNumEdgeKinds);
  CHECK(a.layers.size() == 2);
  int blocks = 0;
  a.for_each_block([&](const std::string&, auto m) {
    ++blocks;
    CHECK(m.allFinite());
  });
  CHECK(blocks == 2 + 2 * 5);
  const double bound = 1.0 / std::sqrt(8.0);
  CHECK(a.layers[0].w1.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.layers[0].b1.isZero());
  CHECK_THROWS_AS(init_params<float>(0, 0, 2), std::invalid_argument);
}

TEST_CASE("encode: shapes for methane") {
  auto f = encode(seg("C"), init_params<float>(0, 4, 1));
  CHECK(f.nodes.rows() == 1);
  CHECK(f.nodes.cols() == 4);
  CHECK(f.motifs.rows() == 1);
  CHECK(f.graph.cols() == 4);
  CHECK(f.nodes.allFinite());
  CHECK(f.graph.allFinite());
}

TEST_CASE("encode: zero layers return token embeddings") {
  auto params = init_params<double>(3, 6, 0);
  auto hg = seg("CCO");
  auto f = encode(hg, params);
  for (int v = 0; v < 3; ++v) CHECK(f.nodes.row(v) == params.node_embedding.row(hg.nodes()[v].token));
  CHECK(f.graph == params.node_embedding.row(kGraphToken));
}

TEST_CASE("encode: one layer matches a hand evaluation") {
  // Two carbons joined by a single bond, one motif, one graph node.
  auto params = init_params<double>(5, 3, 1);
  params.layers[0].eps = 0.25;
  params.layers[0].b1.setConstant(0.1);
  params.layers[0].b2.setConstant(-0.2);
  auto hg = seg("CC");
  auto emb = [&](int token) { return params.node_embedding.row(token); };
  auto edge = [&](EdgeKind k) { return params.edge_embedding.row(static_cast<int>(k)); };
  const RowVector<double> c = emb(static_cast<int>(Element::C));
  RowVector<double> z_atom = 1.25 * c + c + edge(EdgeKind::Single) + emb(kMotifToken) + edge(EdgeKind::MotifLink);
  RowVector<double> z_motif = 1.25 * emb(kMotifToken) + 2 * (c + edge(EdgeKind::MotifLink)) + emb(kGraphToken) + edge(EdgeKind::GraphLink);
  RowVector<double> z_graph = 1.25 * emb(kGraphToken) + emb(kMotifToken) + edge(EdgeKind::GraphLink);
  const auto& l = params.layers[0];
  auto mlp = [&](const RowVector<double>& z) -> RowVector<double> {
    RowVector<double> hidden = z * l.w1 + l.b1;
    return hidden.cwiseMax(0.0) * l.w2 + l.b2;
  };
  auto f = encode(hg, params);
  CHECK(relative_gap(f.nodes.row(0), mlp(z_atom)) < 1e-14);
  CHECK(relative_gap(f.motifs.row(0), mlp(z_motif)) < 1e-14);
  CHECK(relative_gap(f.graph, mlp(z_graph)) < 1e-14);
}

TEST_CASE("encode: permutation invariance and equivariance") {
  auto params = init_params<double>(0, 16, 3);
  testing::MoleculeGenerator gen(21);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    Molecule m = gen.next(20);
    auto perm = testing::random_permutation(m.num_atoms(), rng);
    auto f = encode(segment(m), params);
    auto g = encode(segment(m.permuted(perm)), params);
    CHECK(relative_gap(f.graph, g.graph) < 1e-6);
    for (int v = 0; v < m.num_atoms(); ++v) CHECK(relative_gap(f.nodes.row(v), g.nodes.row(perm[v])) < 1e-6);
  }
}

TEST_CASE("encode: isomorphic inputs give the same node multiset") {
  auto params = init_params<double>(2, 8, 2);
  auto a = encode(seg("CCO"), params);
  auto b = encode(seg("OCC"), params);
  CHECK(relative_gap(sorted_rows(a.nodes), sorted_rows(b.nodes)) < 1e-6);
  CHECK(relative_gap(a.graph, b.graph) < 1e-6);
}

TEST_CASE("encode is bit-reproducible") {
  auto params = init_params<float>(9, 32, 5);
  auto hg = seg("CC(=O)Oc1ccccc1C(=O)O");
  auto a = encode(hg, params).stacked();
  auto b = encode(hg, params).stacked();
  CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0);
}

TEST_CASE("encode_batch: padding, masks and consistency") {
  auto params = init_params<float>(0, 8, 2);
  std::vector<HierGraph> graphs{seg("C"), seg("CCc1ccccc1")};
  auto batch = encode_batch(graphs, params);
  CHECK(batch.size() == 2);
  CHECK(batch.node_mask.row(0).count() == 1);
  CHECK(batch.node_mask.row(1).count() == 8);
  CHECK(batch.motif_mask.row(0).count() == 1);
  CHECK(batch.motif_mask.row(1).count() == 2);
  CHECK(batch.max_atoms == 8);
  for (int i = 0; i < 2; ++i) {
    auto single = encode(graphs[i], params);
    auto unpadded = batch.unpad(i);
    CHECK(unpadded.nodes == single.nodes);
    CHECK(unpadded.motifs == single.motifs);
    CHECK(unpadded.graph == single.graph);
  }
  CHECK(batch.sample_nodes(0).bottomRows(7).isZero(0));
  CHECK(batch.sample_motifs(0).bottomRows(1).isZero(0));

  auto one = encode_batch(std::vector<HierGraph>{graphs[1]}, params);
  CHECK(one.unpad(0).nodes == encode(graphs[1], params).nodes);

  auto swapped = encode_batch(std::vector<HierGraph>{graphs[1], graphs[0]}, params);
  CHECK(swapped.unpad(0).graph == batch.unpad(1).graph);
  CHECK(swapped.unpad(1).nodes == batch.unpad(0).nodes);
  CHECK_THROWS_AS(encode_batch(std::vector<HierGraph>{}, params), std::invalid_argument);
}

TEST_CASE("mask_atoms") {
  auto hg = seg("CC(=O)Oc1ccccc1C(=O)O");
  auto none = mask_atoms(hg, 0.0, 1);
  CHECK(none.masked_atoms.empty());
  auto all = mask_atoms(hg, 1.0, 1);
  CHECK(all.masked_atoms.size() == 13);
  for (int v = 0; v < 13; ++v) CHECK(all.graph.nodes()[v].token == kMaskToken);
  CHECK(all.graph.nodes()[13].token == kMotifToken);
  auto some = mask_atoms(hg, 0.15, 7);
  CHECK(some.masked_atoms.size() == 2);
  CHECK(mask_atoms(hg, 0.15, 7).masked_atoms == some.masked_atoms);
  int masked_tokens = 0;
  for (int v = 0; v < 13; ++v) masked_tokens += some.graph.nodes()[v].token == kMaskToken;
  CHECK(masked_tokens == 2);
  CHECK(mask_atoms(seg("CCCCC"), 0.2, 0).masked_atoms.size() == 1);
  CHECK_THROWS_AS(mask_atoms(hg, 1.5, 0), std::invalid_argument);
  // Different seeds eventually choose different atoms.
  bool differs = false;
  for (std::uint64_t s = 0; s < 10 && !differs; ++s) differs = mask_atoms(hg, 0.15, s).masked_atoms != some.masked_atoms;
  CHECK(differs);
}

TEST_CASE("encode_backward matches finite differences") {
  auto params = init_params<double>(11, 5, 2);
  params.layers[0].eps = 0.3;
  params.layers[1].b1.setConstant(0.05);
  auto hg = seg("CC(=O)Nc1ccncc1");
  Rng rng(8);
  Matrix<double> weight(hg.num_nodes(), 5);
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.uniform(-1, 1);
  auto objective = [&](const GnnParams<double>& p) { return encode_nodes(hg, p).cwiseProduct(weight).sum(); };

  EncoderTrace<double> trace;
  encode_nodes(hg, params, &trace);
  auto grad = zero_params<double>(5, 2);
  encode_backward(hg, params, trace, weight, grad);

  std::vector<Matrix<double>> analytic;
  grad.for_each_block([&](const std::string&, auto m) { analytic.emplace_back(m); });
  std::size_t block = 0;
  auto probe = params;
  probe.for_each_block([&](const std::string& name, auto m) {
    Matrix<double> numeric(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + 1e-5;
      const double up = objective(probe);
      m.data()[i] = saved - 1e-5;
      const double down = objective(probe);
      m.data()[i] = saved;
      numeric.data()[i] = (up - down) / 2e-5;
    }
    INFO(name);
    CHECK(relative_gap(analytic[block], numeric) < 1e-6);
    ++block;
  });
}

TEST_CASE("feature file round trip is bit-exact") {
  const auto params = init_params<float>(3, 6, 2);
  std::vector<LevelFeatures<float>> items;
  for (auto s : {"C", "CCc1ccccc1", "CC(=O)Oc1ccccc1C(=O)O"}) items.push_back(encode(seg(s), params));
  std::stringstream buf;
  write_features(buf, items, 6);
  // Header 20 bytes, then 8 bytes of counts plus (a + b + 1) * 6 floats each.
  const std::size_t rows = (1 + 1 + 1) + (8 + 2 + 1) + (13 + 4 + 1);
  CHECK(buf.str().size() == 20 + 3 * 8 + rows * 6 * 4);
  const auto back = read_features(buf);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].a() == items[i].a());
    CHECK(back[i].b() == items[i].b());
    CHECK(std::memcmp(back[i].stacked().data(), items[i].stacked().data(), sizeof(float) * items[i].stacked().size()) == 0);
  }

  std::stringstream empty;
  write_features(empty, {}, 4);
  CHECK(read_features(empty).empty());

  std::stringstream wrong;
  CHECK_THROWS_AS(write_features(wrong, items, 5), std::invalid_argument);
  std::istringstream bad("HMOLTOKN");
  CHECK_THROWS_AS(read_features(bad), std::runtime_error);
  std::istringstream truncated(buf.str().substr(0, 40));
  CHECK_THROWS_AS(read_features(truncated), std::runtime_error);
}
