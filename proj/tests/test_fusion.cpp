#include <doctest.h>

#include <cstring>
#include <sstream>

#include "hiermol/fusion.hpp"
#include "hiermol/smiles.hpp"

using namespace hiermol;

namespace {

LevelFeatures<double> example() {
  LevelFeatures<double> f;
  f.nodes.resize(2, 2);
  f.nodes << 1, 3, 3, 5;
  f.motifs.resize(1, 2);
  f.motifs << 2, 2;
  f.graph.resize(2);
  f.graph << 4, 8;
  return f;
}

LevelFeatures<double> random_features(Rng& rng, int a, int b, int d) {
  LevelFeatures<double> f{Matrix<double>(a, d), Matrix<double>(b, d), RowVector<double>(d)};
  for (Eigen::Index i = 0; i < f.nodes.size(); ++i) f.nodes.data()[i] = rng.uniform(-2, 2);
  for (Eigen::Index i = 0; i < f.motifs.size(); ++i) f.motifs.data()[i] = rng.uniform(-2, 2);
  for (Eigen::Index i = 0; i < f.graph.size(); ++i) f.graph.data()[i] = rng.uniform(-2, 2);
  return f;
}

double rel(const Matrix<double>& a, const Matrix<double>& b) { return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300}); }

}  // namespace

TEST_CASE("project: identity, constant and linear maps") {
  auto f = example();
  Projector<double> id{Matrix<double>::Identity(2, 2), RowVector<double>::Zero(2)};
  auto same = project(f, id);
  CHECK(same.nodes == f.nodes);
  CHECK(same.graph == f.graph);

  RowVector<double> beta(3);
  beta << 1, -2, 0.5;
  Projector<double> constant{Matrix<double>::Zero(2, 3), beta};
  auto c = project(f, constant);
  for (int r = 0; r < 2; ++r) CHECK(c.nodes.row(r) == beta);
  CHECK(c.motifs.row(0) == beta);
  CHECK(c.graph == beta);

  Rng rng(1);
  auto p = init_projector<double>(3, 2, 5);
  LevelFeatures<double> scaled{2.5 * f.nodes, 2.5 * f.motifs, 2.5 * f.graph};
  CHECK(rel(project(scaled, p).nodes, 2.5 * project(f, p).nodes) < 1e-14);
  CHECK_THROWS_AS(project(f, init_projector<double>(0, 3, 4)), std::invalid_argument);
}

TEST_CASE("reductions on the worked example") {
  auto f = example();
  auto none = reduce_none(f);
  Matrix<double> expected(4, 2);
  expected << 1, 3, 3, 5, 2, 2, 4, 8;
  CHECK(none.tokens == expected);
  CHECK(none.level_ids == std::vector<Level>{Level::Node, Level::Node, Level::Motif, Level::Graph});

  auto hier = reduce_hierarchical(f);
  Matrix<double> h(3, 2);
  h << 2, 4, 2, 2, 4, 8;
  CHECK(hier.tokens == h);
  CHECK(hier.k() == 3);

  auto all = reduce_all(f);
  CHECK(all.k() == 1);
  CHECK(all.tokens(0, 0) == 2.5);
  CHECK(all.tokens(0, 1) == 4.5);
  RowVector<double> weighted = (2 * hier.tokens.row(0) + 1 * hier.tokens.row(1) + hier.tokens.row(2)) / 4;
  CHECK(weighted == all.tokens.row(0));

  CHECK(select_level(f, Level::Graph).tokens.row(0) == f.graph);
  LevelFeatures<double> two_motifs{f.nodes, Matrix<double>(2, 2), f.graph};
  two_motifs.motifs << 2, 2, 4, 4;
  CHECK(select_level(two_motifs, Level::Motif).tokens(0, 0) == 3);
  CHECK(select_level(two_motifs, Level::Motif).tokens(0, 1) == 3);
  LevelFeatures<double> single{f.nodes.topRows(1), f.motifs, f.graph};
  CHECK(select_level(single, Level::Node).tokens.row(0) == f.nodes.row(0));
  CHECK(reduce_hierarchical(single).tokens == reduce_none(single).tokens);

  LevelFeatures<double> equal{Matrix<double>::Constant(5, 2, 1.5), Matrix<double>::Constant(2, 2, 1.5), RowVector<double>::Constant(2, 1.5)};
  CHECK(reduce_all(equal).tokens.row(0) == RowVector<double>::Constant(2, 1.5));
  CHECK(reduce_hierarchical(equal).tokens.row(0) == RowVector<double>::Constant(2, 1.5));

  LevelFeatures<double> empty{Matrix<double>(0, 2), f.motifs, f.graph};
  CHECK_THROWS_AS(reduce_hierarchical(empty), std::invalid_argument);
  CHECK_THROWS_AS(select_level(empty, Level::Node), std::invalid_argument);
}

TEST_CASE("token counts on real molecules") {
  auto params = init_params<double>(0, 8, 2);
  for (const char* smi : {"C", "CCO", "CC(=O)Oc1ccccc1C(=O)O", "CCc1ccccc1"}) {
    auto hg = segment(parse_smiles(smi));
    auto f = encode(hg, params);
    CHECK(reduce_none(f).k() == hg.num_atoms() + hg.num_motifs() + 1);
    CHECK(reduce_hierarchical(f).k() == 3);
    CHECK(reduce_all(f).k() == 1);
    for (Level l : {Level::Node, Level::Motif, Level::Graph}) CHECK(select_level(f, l).k() == 1);
  }
  CHECK(reduce_none(encode(segment(parse_smiles("C")), params)).k() == 3);
}

TEST_CASE("pooling algebra on random feature sets") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int a = 1 + static_cast<int>(rng.below(20)), b = 1 + static_cast<int>(rng.below(6)), d = 1 + static_cast<int>(rng.below(12));
    auto f = random_features(rng, a, b, d);
    auto p = init_projector<double>(trial, d, 7);
    p.bias.setRandom();
    auto projected = project(f, p);
    auto all = reduce_all(projected).tokens;
    auto hier = reduce_hierarchical(projected).tokens;
    Matrix<double> weighted = (a * hier.row(0) + b * hier.row(1) + hier.row(2)) / static_cast<double>(a + b + 1);
    CHECK(rel(all, weighted) <= 1e-5);
    RowVector<double> raw_mean = (f.nodes.colwise().sum() + f.motifs.colwise().sum() + f.graph) / static_cast<double>(a + b + 1);
    CHECK(rel(all, raw_mean * p.weight + p.bias) <= 1e-5);
  }
}

TEST_CASE("batched reductions equal unbatched ones") {
  auto params = init_params<float>(1, 8, 2);
  std::vector<HierGraph> graphs{segment(parse_smiles("C")), segment(parse_smiles("CCc1ccccc1")), segment(parse_smiles("OCCN"))};
  auto batch = encode_batch(graphs, params);
  auto p = init_projector<float>(2, 8, 5);
  auto projected = project_batch(batch, p);
  CHECK(projected.sample_nodes(0).bottomRows(7).isZero(0));
  for (auto mode : {TokenReduction::None, TokenReduction::Hierarchical, TokenReduction::All, TokenReduction::NodeOnly,
                    TokenReduction::MotifOnly, TokenReduction::GraphOnly}) {
    auto batched = reduce_batch(projected, mode);
    REQUIRE(batched.size() == 3);
    for (int i = 0; i < 3; ++i) {
      auto single = reduce(project(encode(graphs[i], params), p), mode);
      INFO(reduction_name(mode), " sample ", i);
      CHECK(batched[i].k() == single.k());
      CHECK(batched[i].level_ids == single.level_ids);
      CHECK((batched[i].tokens - single.tokens).cwiseAbs().maxCoeff() <= 1e-5f * std::max(1.0f, single.tokens.cwiseAbs().maxCoeff()));
    }
  }
  // Divisors are the mask counts {1, 8, 4}: all-ones node features reduce
  // to exactly one whatever the padding.
  BatchedFeatures<float> ones = batch;
  for (int i = 0; i < ones.size(); ++i)
    for (int r = 0; r < ones.max_atoms; ++r)
      ones.nodes.row(static_cast<Eigen::Index>(i) * ones.max_atoms + r).setConstant(ones.node_mask(i, r) ? 1.0f : 0.0f);
  for (const auto& t : reduce_batch(ones, TokenReduction::NodeOnly)) CHECK(t.tokens.isOnes(0));

  // Extra zero padding leaves every token unchanged.
  auto base = reduce_batch(projected, TokenReduction::Hierarchical);
  auto padded = pad_batch(std::vector<LevelFeatures<float>>{projected.unpad(0), projected.unpad(1), projected.unpad(2)});
  BatchedFeatures<float> wider = padded;
  wider.max_atoms += 5;
  wider.nodes = Matrix<float>::Zero(3 * wider.max_atoms, 5);
  wider.node_mask.setConstant(3, wider.max_atoms, false);
  for (int i = 0; i < 3; ++i) {
    wider.nodes.middleRows(static_cast<Eigen::Index>(i) * wider.max_atoms, padded.max_atoms) = padded.sample_nodes(i);
    wider.node_mask.row(i).head(padded.max_atoms) = padded.node_mask.row(i);
  }
  auto widened = reduce_batch(wider, TokenReduction::Hierarchical);
  for (int i = 0; i < 3; ++i) CHECK(widened[i].tokens == base[i].tokens);
}

TEST_CASE("reduction names") {
  CHECK(reduction_from_name("hier") == TokenReduction::Hierarchical);
  CHECK(reduction_from_name("graph") == TokenReduction::GraphOnly);
  CHECK_FALSE(reduction_from_name("max"));
  for (auto m : {TokenReduction::None, TokenReduction::All, TokenReduction::MotifOnly}) CHECK(reduction_from_name(reduction_name(m)) == m);
}

TEST_CASE("token file round trip") {
  Rng rng(5);
  auto f = random_features(rng, 3, 2, 6);
  auto p = init_projector<double>(1, 6, 16);
  LevelFeatures<float> ff{f.nodes.cast<float>(), f.motifs.cast<float>(), f.graph.cast<float>()};
  Projector<float> pf{p.weight.cast<float>(), p.bias.cast<float>()};
  for (auto mode : {TokenReduction::None, TokenReduction::All}) {
    auto bundle = reduce(project(ff, pf), mode);
    std::ostringstream out;
    export_tokens(out, bundle);
    const std::string bytes = out.str();
    if (mode == TokenReduction::All) CHECK(bytes.size() == 8 + 4 * 4 + 4 * 1 + 4 * 16);
    std::istringstream in(bytes);
    auto back = import_tokens(in);
    CHECK(back.reduction == bundle.reduction);
    CHECK(back.level_ids == bundle.level_ids);
    CHECK(std::memcmp(back.tokens.data(), bundle.tokens.data(), sizeof(float) * static_cast<std::size_t>(bundle.tokens.size())) == 0);
    std::ostringstream again;
    export_tokens(again, back);
    CHECK(again.str() == bytes);
    std::string corrupt = bytes;
    corrupt[3] = '?';
    std::istringstream bad(corrupt);
    CHECK_THROWS_AS(import_tokens(bad), std::runtime_error);
  }
}

TEST_CASE("projector file round trip") {
  auto p = init_projector<float>(9, 4, 7);
  p.bias.setConstant(0.25f);
  std::ostringstream out;
  save_projector(out, p);
  std::istringstream in(out.str());
  auto back = load_projector(in);
  CHECK(back.weight == p.weight);
  CHECK(back.bias == p.bias);
}

TEST_CASE("projector alignment separates synthetic pairs") {
  Rng rng(77);
  const int n = 24, d_gnn = 32, d_llm = 32;
  std::vector<AlignSample> data;
  for (int i = 0; i < n; ++i) {
    auto f = random_features(rng, 1 + static_cast<int>(rng.below(6)), 1 + static_cast<int>(rng.below(3)), d_gnn);
    Eigen::RowVectorXd target = Eigen::RowVectorXd::Zero(d_llm);
    target(i) = 1.0;
    data.push_back({{f.nodes.cast<float>(), f.motifs.cast<float>(), f.graph.cast<float>()}, target});
  }
  AlignConfig cfg;
  cfg.steps = 300;
  cfg.lr = 1e-2;
  cfg.batch_size = n;
  std::vector<double> losses;
  auto p = align_projector(data, cfg, &losses);
  auto s = alignment_scores(data, p);
  int good = 0, total = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) good += s(i, i) > s(i, j), ++total;
  CHECK(static_cast<double>(good) / total >= 0.9);
  CHECK(losses.back() < losses.front());

  auto again = align_projector(data, cfg);
  CHECK(again.weight == p.weight);
  cfg.lr = 0;
  auto frozen = align_projector(data, cfg);
  auto init = init_projector<float>(cfg.seed, d_gnn, d_llm);
  CHECK(frozen.weight == init.weight);
  CHECK(frozen.bias == init.bias);
}
