#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "hiermol/pretrain.hpp"
#include "hiermol/smiles.hpp"
#include "support/generators.hpp"

using namespace hiermol;

namespace {

PairSample sample(std::string_view smiles, std::uint64_t id, int d_text = 0, std::uint64_t text_seed = 0) {
  PairSample s{segment(parse_smiles(smiles)), {}, id};
  if (d_text > 0) {
    Rng rng(text_seed);
    s.text.resize(d_text);
    for (int k = 0; k < d_text; ++k) s.text(k) = rng.uniform(-1, 1);
    s.text.normalize();
  }
  return s;
}

std::vector<Matrix<double>> blocks_of(const Model<double>& m) {
  std::vector<Matrix<double>> out;
  m.for_each_block([&](const std::string&, auto map) { out.emplace_back(map); });
  return out;
}

std::string checkpoint_bytes(const Model<float>& m) {
  std::ostringstream out;
  save_checkpoint(out, m);
  return out.str();
}

}  // namespace

TEST_CASE("link loss: pair enumeration") {
  Matrix<double> two = Matrix<double>::Zero(2, 4);
  std::vector<std::pair<int, int>> bond{{0, 1}};
  CHECK(link_loss<double>(two, bond) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Matrix<double> three = Matrix<double>::Zero(3, 4);
  std::vector<std::pair<int, int>> chain{{0, 1}, {1, 2}};
  CHECK(link_loss<double>(three, chain) == doctest::Approx(3 * std::log(2.0)).epsilon(1e-12));

  // The bonded pair scores 20, past the probability floor; the other pairs
  // score 0.
  Matrix<double> n(3, 3);
  n << 4, 0, 0, 5, 0, 0, 0, 0, 1;
  std::vector<std::pair<int, int>> single{{0, 1}};
  const double expected = -std::log(1 - 1e-7) + 2 * std::log(2.0);
  CHECK(link_loss<double>(n, single) == doctest::Approx(expected).epsilon(1e-9));
  Matrix<double> d = Matrix<double>::Zero(3, 3);
  link_loss<double>(n, single, &d);
  // The saturated pair carries no gradient; the unbonded pairs pull with 0.5.
  CHECK(d.row(0).isApprox(0.5 * n.row(2), 1e-12));
  CHECK(d.row(2).isApprox(0.5 * (n.row(0) + n.row(1)), 1e-12));
}

TEST_CASE("cross-entropy values") {
  RowVector<double> uniform = RowVector<double>::Constant(10, 0.7);
  CHECK(softmax_cross_entropy<double>(uniform, 3) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  RowVector<double> four = RowVector<double>::Zero(4);
  CHECK(softmax_cross_entropy<double>(four, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  RowVector<double> sure = RowVector<double>::Zero(5);
  sure(2) = 60;
  CHECK(softmax_cross_entropy<double>(sure, 2) < 1e-20);
  RowVector<double> d;
  softmax_cross_entropy<double>(four, 1, &d, 2.0);
  CHECK(d(1) == doctest::Approx(2.0 * (0.25 - 1)));
  CHECK(d(0) == doctest::Approx(0.5));
}

TEST_CASE("smooth L1 branches") {
  CHECK(smooth_l1(0.0) == 0.0);
  CHECK(smooth_l1(0.5) == 0.125);
  CHECK(smooth_l1(-2.0) == 1.5);
  CHECK(smooth_l1(2.0) == 1.5);
  CHECK(std::abs(0.5 * 1.0 * 1.0 - 0.5) <= 1e-12);
  CHECK(std::abs(smooth_l1(1.0) - 0.5) <= 1e-12);
  CHECK(std::abs(smooth_l1(std::nextafter(1.0, 0.0)) - 0.5) <= 1e-12);
  CHECK(smooth_l1_grad(0.25) == 0.25);
  CHECK(smooth_l1_grad(-3.0) == -1.0);
}

TEST_CASE("contrastive loss values") {
  Matrix<double> z = Matrix<double>::Zero(4, 3), t = Matrix<double>::Zero(4, 3);
  auto neg = derangement(4, 1);
  CHECK(contrastive_loss<double>(z, t, neg) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));

  // Batch of two with scores +2 on the diagonal and -2 off it.
  Matrix<double> z2(2, 2), t2(2, 2);
  z2 << 1, 0, 0, 1;
  t2 << 2, -2, -2, 2;
  const double oracle = -0.5 * (std::log(1 / (1 + std::exp(-2.0))) + 2 * std::log(1 - 1 / (1 + std::exp(2.0))));
  CHECK(contrastive_loss<double>(z2, t2, derangement(2, 0)) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(0.19039).epsilon(1e-4));

  Matrix<double> far = 1e3 * t2;
  CHECK(contrastive_loss<double>(z2, far, derangement(2, 0)) < 1e-12);
  CHECK_THROWS_AS(contrastive_loss<double>(z2.topRows(1), t2.topRows(1), std::vector<int>{0}), std::invalid_argument);
}

TEST_CASE("derangements have no fixed points") {
  for (int n = 2; n < 40; ++n) {
    auto p = derangement(n, static_cast<std::uint64_t>(n));
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) {
      CHECK(p[i] != i);
      CHECK(sorted[i] == i);
    }
  }
  CHECK_THROWS(derangement(1, 0));
}

TEST_CASE("total loss weighting") {
  LossReport r{1, 2, 3, 4, 5, 6};
  CHECK(total_loss(r, {}) == 21);
  CHECK(total_loss(LossReport{}, {}) == 0);
  LossWeights w;
  w.contrastive = 0;
  CHECK(total_loss(r, w) == 15);
  w.link = -1;
  CHECK_THROWS_AS(total_loss(r, w), std::invalid_argument);
}

TEST_CASE("targets follow the hierarchy") {
  auto hg = segment(parse_smiles("CC(=O)Oc1ccccc1C(=O)O"));
  std::vector<int> masked{2, 5};
  auto t = make_targets(hg, masked);
  CHECK(t.atom_count == 13);
  CHECK(t.bond_count == 13);
  CHECK(t.atom_labels == std::vector<int>{static_cast<int>(Element::O), static_cast<int>(Element::C)});
  // O2 has one bond, aromatic c5 has two.
  CHECK(t.masked_bonds.size() == 3);
  CHECK(std::count(t.bond_labels.begin(), t.bond_labels.end(), static_cast<int>(BondOrder::Aromatic)) == 2);
}

TEST_CASE("objective terms match independent recomputation") {
  auto model = init_model<double>(4, 8, 2, 6);
  std::vector<PairSample> batch{sample("CC(=O)Oc1ccccc1C(=O)O", 0, 6, 1), sample("CCN(CC)CC", 1, 6, 2)};
  ObjectiveConfig cfg;
  cfg.mask_ratio = 0.3;
  auto report = evaluate_objective<double>(model, batch, cfg, 99);

  double atom_type = 0, acount = 0;
  for (const auto& s : batch) {
    auto masked = mask_atoms(s.graph, 0.3, mix_seed(99, s.id));
    auto states = encode_nodes(masked.graph, model.gnn);
    double sum = 0;
    for (int v : masked.masked_atoms) {
      RowVector<double> logits = states.row(v) * model.heads.atom_w + model.heads.atom_b;
      double lse = std::log((logits.array() - logits.maxCoeff()).exp().sum()) + logits.maxCoeff();
      sum += lse - logits(s.graph.nodes()[v].token);
    }
    atom_type += sum / static_cast<double>(masked.masked_atoms.size()) / 2;
    double pred = states.row(s.graph.graph_node()).dot(model.heads.atom_count_w.col(0)) + model.heads.atom_count_b;
    acount += smooth_l1(pred - s.graph.num_atoms()) / 2;
  }
  CHECK(report.atom_type == doctest::Approx(atom_type).epsilon(1e-12));
  CHECK(report.atom_count == doctest::Approx(acount).epsilon(1e-12));
  CHECK(report.total == doctest::Approx(report.link + report.atom_type + report.bond_type + report.atom_count +
                                        report.bond_count + report.contrastive));
  for (double v : {report.link, report.atom_type, report.bond_type, report.atom_count, report.bond_count, report.contrastive})
    CHECK(v >= 0);
}

TEST_CASE("bond head input is symmetric in its endpoints") {
  auto model = init_model<double>(1, 6, 1, 4);
  Rng rng(3);
  RowVector<double> a(6), b(6), x(12), y(12);
  for (int k = 0; k < 6; ++k) a(k) = rng.uniform(-1, 1), b(k) = rng.uniform(-1, 1);
  x << a + b, a.cwiseProduct(b);
  y << b + a, b.cwiseProduct(a);
  RowVector<double> lx = x * model.heads.bond_w, ly = y * model.heads.bond_w;
  CHECK(lx == ly);
}

TEST_CASE("gradient matches central finite differences") {
  testing::MoleculeGenerator gen(31);
  std::vector<PairSample> batch;
  for (int i = 0; i < 4; ++i) {
    auto m = gen.next(12);
    PairSample s{segment(m), {}, static_cast<std::uint64_t>(i)};
    Rng rng(100 + i);
    s.text.resize(6);
    for (int k = 0; k < 6; ++k) s.text(k) = rng.uniform(-1, 1);
    s.text.normalize();
    batch.push_back(std::move(s));
  }
  auto model = init_model<double>(17, 8, 2, 6);
  model.gnn.layers[0].eps = 0.1;
  ObjectiveConfig cfg;
  cfg.mask_ratio = 0.25;
  for (Reduction red : {Reduction::Mean, Reduction::Sum}) {
    cfg.reduction = red;
    Model<double> grad;
    evaluate_objective<double>(model, batch, cfg, 5, &grad);
    auto analytic = blocks_of(grad);
    auto probe = model;
    std::size_t block = 0;
    probe.for_each_block([&](const std::string& name, auto m) {
      Matrix<double> numeric(m.rows(), m.cols());
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double saved = m.data()[i];
        m.data()[i] = saved + 1e-5;
        const double up = evaluate_objective<double>(probe, batch, cfg, 5).total;
        m.data()[i] = saved - 1e-5;
        const double down = evaluate_objective<double>(probe, batch, cfg, 5).total;
        m.data()[i] = saved;
        numeric.data()[i] = (up - down) / 2e-5;
      }
      const double err = (analytic[block] - numeric).norm() / std::max({analytic[block].norm(), numeric.norm(), 1e-12});
      INFO(name);
      CHECK(err <= 1e-4);
      ++block;
    });
  }
}

TEST_CASE("gradient linearity and zero weights") {
  auto model = init_model<double>(2, 8, 2, 4);
  ObjectiveConfig cfg;
  cfg.weights.contrastive = 0;
  cfg.reduction = Reduction::Sum;
  std::vector<PairSample> one{sample("CC(=O)Nc1ccccc1", 3)};
  std::vector<PairSample> two{one[0], one[0]};
  Model<double> g1, g2;
  evaluate_objective<double>(model, one, cfg, 1, &g1);
  evaluate_objective<double>(model, two, cfg, 1, &g2);
  auto b1 = blocks_of(g1), b2 = blocks_of(g2);
  for (std::size_t i = 0; i < b1.size(); ++i) CHECK((2.0 * b1[i]).cwiseEqual(b2[i]).all());

  ObjectiveConfig zero;
  zero.weights = {0, 0, 0, 0, 0, 0};
  Model<double> gz;
  auto report = evaluate_objective<double>(model, one, zero, 1, &gz);
  CHECK(report.total == 0);
  for (const auto& b : blocks_of(gz)) CHECK(b.isZero(0));
}

TEST_CASE("training: lr zero, determinism and progress") {
  std::vector<PairSample> data;
  const char* smiles[] = {"CCO", "CC(=O)O", "c1ccccc1O", "CCN", "CC(C)Cl", "C1CCCCC1", "OCC(O)CO", "c1ccncc1"};
  for (int i = 0; i < 8; ++i) data.push_back(sample(smiles[i], static_cast<std::uint64_t>(i), 8, 50 + i));

  TrainConfig cfg;
  cfg.d_gnn = 8;
  cfg.layers = 2;
  cfg.d_text = 8;
  cfg.batch_size = 4;
  cfg.steps = 6;
  cfg.lr = 0;
  auto frozen = train(data, cfg);
  CHECK(checkpoint_bytes(frozen.model) == checkpoint_bytes(init_model<float>(0, 8, 2, 8)));

  cfg.lr = 1e-2;
  cfg.steps = 60;
  std::vector<std::string> lines;
  auto a = train(data, cfg, [&](int step, const LossReport& r) { lines.push_back(to_json_line(step, r)); });
  auto b = train(data, cfg);
  CHECK(checkpoint_bytes(a.model) == checkpoint_bytes(b.model));
  CHECK(lines.size() == 60);
  CHECK(lines.front().rfind("{\"step\":0,", 0) == 0);
  CHECK(a.history.back().total < a.history.front().total);
}

TEST_CASE("static masks ignore the step seed") {
  auto model = init_model<double>(4, 8, 2, 4);
  std::vector<PairSample> batch{sample("CC(=O)Nc1ccccc1", 3, 4, 1), sample("OCC(O)CO", 9, 4, 2)};
  ObjectiveConfig dynamic;
  dynamic.weights.contrastive = 0;
  dynamic.mask_ratio = 0.4;
  ObjectiveConfig fixed = dynamic;
  fixed.mask_seed = 77;
  const double a = evaluate_objective<double>(model, batch, fixed, 1).atom_type;
  const double b = evaluate_objective<double>(model, batch, fixed, 2).atom_type;
  CHECK(a == b);
  // With the mask seed set, the call seed matching it reproduces the masks.
  const double c = evaluate_objective<double>(model, batch, dynamic, 77).atom_type;
  CHECK(a == c);
  int differing = 0;
  for (std::uint64_t s = 0; s < 10; ++s)
    differing += evaluate_objective<double>(model, batch, dynamic, s).atom_type != evaluate_objective<double>(model, batch, dynamic, s + 100).atom_type;
  CHECK(differing > 0);
}

TEST_CASE("config file parsing") {
  auto c = parse_train_config("# comment\nseed = 7\nd_gnn=16\nlr = 0.01  # trailing\nreduction = sum\nweight.contrastive = 0\n");
  CHECK(c.seed == 7);
  CHECK(c.d_gnn == 16);
  CHECK(c.lr == 0.01);
  CHECK(c.reduction == Reduction::Sum);
  CHECK(c.weights.contrastive == 0);
  CHECK(c.layers == 5);
  CHECK_FALSE(c.static_masks);
  CHECK(parse_train_config("static_masks = true\n").static_masks);
  CHECK_THROWS_AS(parse_train_config("static_masks = yes\n"), std::invalid_argument);
  auto again = parse_train_config(format_train_config(c));
  CHECK(format_train_config(again) == format_train_config(c));
  CHECK_THROWS_AS(parse_train_config("colour = blue\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("lr = fast\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("weight.link = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("layers\n"), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto model = init_model<float>(12, 8, 3, 5);
  model.gnn.layers[1].eps = 0.37f;
  std::string bytes = checkpoint_bytes(model);
  std::istringstream in(bytes);
  auto loaded = load_checkpoint(in);
  CHECK(checkpoint_bytes(loaded) == bytes);
  CHECK(loaded.depth() == 3);
  CHECK(loaded.text_dim() == 5);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  std::istringstream bad(corrupt);
  CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), std::runtime_error);
}
