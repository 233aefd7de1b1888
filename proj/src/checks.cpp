#include "hiermol/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "hiermol/canon.hpp"
#include "hiermol/dataprep.hpp"
#include "hiermol/fusion.hpp"
#include "hiermol/pretrain.hpp"
#include "hiermol/random_molecule.hpp"
#include "hiermol/selfies.hpp"
#include "hiermol/smiles.hpp"
#include "hiermol/valence.hpp"

namespace hiermol {

namespace {

using Clock = std::chrono::steady_clock;

std::string format(const char* fmt, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

double relative_error(const Matrix<double>& a, const Matrix<double>& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

Eigen::RowVectorXd random_unit(Rng& rng, int d) {
  Eigen::RowVectorXd v(d);
  for (int k = 0; k < d; ++k) v(k) = rng.uniform(-1, 1);
  return v.normalized();
}

}  // namespace

CheckResult timed(const std::function<CheckResult()>& suite) {
  const auto start = Clock::now();
  CheckResult r = suite();
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

// --------------------------------------------------------------- gradients --

CheckResult check_gradients(std::uint64_t seed, int molecules) {
  CheckResult out{"gradient check", false, {}, 0};
  MoleculeGenerator gen(mix_seed(seed, 0x67726164));
  Rng rng(mix_seed(seed, 0x74657874));
  std::vector<PairSample> batch;
  for (int i = 0; i < molecules; ++i) {
    Molecule m = gen.next(12);
    batch.push_back({segment(m), random_unit(rng, 6), static_cast<std::uint64_t>(i)});
  }
  auto model = init_model<double>(seed, 8, 2, 6);
  // Nonzero eps and biases so every term of the layer update is exercised.
  for (auto& layer : model.gnn.layers) {
    layer.eps = rng.uniform(-0.2, 0.2);
    for (Eigen::Index k = 0; k < layer.b1.size(); ++k) layer.b1(k) = rng.uniform(-0.1, 0.1);
  }
  ObjectiveConfig cfg;
  cfg.mask_ratio = 0.25;
  double worst = 0;
  std::string worst_block;
  for (Reduction reduction : {Reduction::Mean, Reduction::Sum}) {
    cfg.reduction = reduction;
    Model<double> grad;
    evaluate_objective<double>(model, batch, cfg, seed, &grad);
    std::vector<Matrix<double>> analytic;
    grad.for_each_block([&](const std::string&, auto m) { analytic.emplace_back(m); });
    auto probe = model;
    std::size_t block = 0;
    probe.for_each_block([&](const std::string& name, auto m) {
      Matrix<double> numeric(m.rows(), m.cols());
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double saved = m.data()[i];
        m.data()[i] = saved + 1e-5;
        const double up = evaluate_objective<double>(probe, batch, cfg, seed).total;
        m.data()[i] = saved - 1e-5;
        const double down = evaluate_objective<double>(probe, batch, cfg, seed).total;
        m.data()[i] = saved;
        numeric.data()[i] = (up - down) / 2e-5;
      }
      const double err = relative_error(analytic[block++], numeric);
      if (err > worst || worst_block.empty()) worst = err, worst_block = name;
    });
  }
  out.passed = worst <= 1e-4;
  out.detail = std::to_string(molecules) + format(" molecules, worst relative error %.3g", worst) + " (" + worst_block + ")";
  return out;
}

// ----------------------------------------------------------------- pooling --

CheckResult check_pooling(std::uint64_t seed, int trials) {
  CheckResult out{"pooling algebra", false, {}, 0};
  Rng rng(mix_seed(seed, 0x706f6f6c));
  double worst = 0;
  int count_errors = 0;
  for (int t = 0; t < trials; ++t) {
    const int a = 1 + static_cast<int>(rng.below(40)), b = 1 + static_cast<int>(rng.below(10)), d = 1 + static_cast<int>(rng.below(32));
    const int d_llm = 1 + static_cast<int>(rng.below(32));
    LevelFeatures<double> f{Matrix<double>(a, d), Matrix<double>(b, d), RowVector<double>(d)};
    for (Eigen::Index i = 0; i < f.nodes.size(); ++i) f.nodes.data()[i] = rng.uniform(-3, 3);
    for (Eigen::Index i = 0; i < f.motifs.size(); ++i) f.motifs.data()[i] = rng.uniform(-3, 3);
    for (Eigen::Index i = 0; i < f.graph.size(); ++i) f.graph(i) = rng.uniform(-3, 3);
    auto p = init_projector<double>(rng.next(), d, d_llm);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias(i) = rng.uniform(-1, 1);

    const auto projected = project(f, p);
    const auto none = reduce_none(projected);
    const auto hier = reduce_hierarchical(projected);
    const auto all = reduce_all(projected);
    count_errors += none.k() != a + b + 1;
    count_errors += hier.k() != 3;
    count_errors += all.k() != 1;
    for (Level l : {Level::Node, Level::Motif, Level::Graph}) count_errors += select_level(projected, l).k() != 1;

    const Matrix<double> weighted = (a * hier.tokens.row(0) + b * hier.tokens.row(1) + hier.tokens.row(2)) / double(a + b + 1);
    const RowVector<double> raw_mean = (f.nodes.colwise().sum() + f.motifs.colwise().sum() + f.graph) / double(a + b + 1);
    const Matrix<double> of_mean = raw_mean * p.weight + p.bias;
    worst = std::max({worst, relative_error(all.tokens, weighted), relative_error(all.tokens, of_mean)});
  }
  out.passed = worst <= 1e-5 && count_errors == 0;
  out.detail = std::to_string(trials) + format(" feature sets, worst relative gap %.3g", worst) + ", token count errors " + std::to_string(count_errors);
  return out;
}

// ------------------------------------------------------------ segmentation --

namespace {

std::vector<std::string> segmentation_problems(const Molecule& mol) {
  std::vector<std::string> problems;
  const auto cuts = fragment_bonds(mol, simple_brics());
  const auto ring = mol.ring_bonds();
  std::vector<bool> is_cut(static_cast<std::size_t>(mol.num_bonds()), false);
  for (int c : cuts) {
    is_cut[c] = true;
    if (ring[c]) problems.push_back("ring bond " + std::to_string(c) + " cut");
  }
  const auto partition = build_motifs(mol, cuts);
  const auto hg = build_hier_graph(mol, partition);
  const int a = mol.num_atoms(), b = partition.num_motifs;
  if (hg.num_atoms() != a || hg.num_motifs() != b) problems.push_back("node counts differ");

  // Every atom belongs to exactly one motif and every motif is connected.
  std::vector<int> size(static_cast<std::size_t>(b), 0);
  for (int v = 0; v < a; ++v) {
    const int m = partition.motif_id[v];
    if (m < 0 || m >= b) problems.push_back("atom without a motif");
    else ++size[m];
  }
  for (int m = 0; m < b; ++m) {
    if (size[m] == 0) {
      problems.push_back("empty motif");
      continue;
    }
    int start = 0;
    while (partition.motif_id[start] != m) ++start;
    std::vector<bool> seen(static_cast<std::size_t>(a), false);
    std::vector<int> stack{start};
    seen[start] = true;
    int reached = 0;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++reached;
      for (const auto& nb : mol.neighbors(v))
        if (!is_cut[nb.bond] && !seen[nb.atom] && partition.motif_id[nb.atom] == m) {
          seen[nb.atom] = true;
          stack.push_back(nb.atom);
        }
    }
    if (reached != size[m]) problems.push_back("motif " + std::to_string(m) + " is disconnected");
  }

  int motif_links = 0, graph_links = 0, bond_edges = 0;
  std::vector<int> links_per_atom(static_cast<std::size_t>(a), 0);
  for (const auto& e : hg.edges()) {
    const int lo = std::min(e.u, e.v), hi = std::max(e.u, e.v);
    switch (e.kind) {
      case EdgeKind::MotifLink:
        ++motif_links;
        if (lo >= a || hi != a + partition.motif_id[lo]) problems.push_back("motif link to the wrong motif");
        else ++links_per_atom[lo];
        break;
      case EdgeKind::GraphLink:
        ++graph_links;
        if (lo < a || lo >= a + b || hi != a + b) problems.push_back("graph link not between a motif and the graph node");
        break;
      default:
        ++bond_edges;
        if (hi >= a) problems.push_back("bond edge touching a hierarchy node");
    }
  }
  if (motif_links != a) problems.push_back("|E_m| != a");
  if (graph_links != b) problems.push_back("|E_g| != b");
  if (bond_edges != mol.num_bonds()) problems.push_back("bond edges lost");
  for (int v = 0; v < a; ++v)
    if (links_per_atom[v] != 1) problems.push_back("atom with " + std::to_string(links_per_atom[v]) + " motif links");
  for (auto& p : hg.check_invariants()) problems.push_back(std::move(p));
  return problems;
}

}  // namespace

CheckResult check_segmentation(std::uint64_t seed, int molecules) {
  CheckResult out{"segmentation laws", false, {}, 0};
  MoleculeGenerator gen(mix_seed(seed, 0x736567));
  int tested = 0, violations = 0, attempts = 0;
  std::string first;
  while (tested < molecules && attempts < 50 * molecules) {
    ++attempts;
    const auto cleaned = clean(write_smiles(gen.next(40)));
    if (!cleaned.accepted()) continue;
    ++tested;
    const auto problems = segmentation_problems(parse_smiles(*cleaned.smiles));
    violations += static_cast<int>(problems.size());
    if (!problems.empty() && first.empty()) first = *cleaned.smiles + ": " + problems.front();
  }
  out.passed = tested >= molecules && violations == 0;
  out.detail = std::to_string(tested) + " cleaned molecules, " + std::to_string(violations) + " violations";
  if (!first.empty()) out.detail += "; first: " + first;
  return out;
}

// -------------------------------------------------------- canonicalization --

CheckResult check_canonical_stability(std::uint64_t seed, int molecules, int permutations, int max_pair_atoms) {
  CheckResult out{"canonical stability", false, {}, 0};
  MoleculeGenerator gen(mix_seed(seed, 0x63616e));
  Rng rng(mix_seed(seed, 0x7065726d));
  int unstable = 0;
  std::string first;
  for (int i = 0; i < molecules; ++i) {
    const Molecule m = gen.next(30);
    const std::string reference = canonicalize(m).text;
    if (canonicalize(parse_smiles(reference)).text != reference) {
      ++unstable;
      if (first.empty()) first = reference + " does not reproduce itself";
    }
    for (int p = 0; p < permutations; ++p) {
      const std::string got = canonicalize(m.permuted(random_permutation(m.num_atoms(), rng))).text;
      if (got != reference) {
        ++unstable;
        if (first.empty()) first = reference + " vs " + got;
      }
    }
  }
  // Small molecules collide often enough to exercise both answers.
  MoleculeGenerator small(mix_seed(seed, 0x736d616c));
  int pairs = 0, disagreements = 0, isomorphic = 0;
  std::vector<Molecule> pool;
  for (int i = 0; i < 400; ++i) pool.push_back(normalize_aromaticity(small.next(std::min(max_pair_atoms, 7))));
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    const Molecule& x = pool[i];
    if (x.num_atoms() > max_pair_atoms) continue;
    for (const Molecule* y : {&pool[(i + 1) % pool.size()], &pool[(i * 7 + 3) % pool.size()]}) {
      if (y->num_atoms() > max_pair_atoms) continue;
      const Molecule shuffled = y->permuted(random_permutation(y->num_atoms(), rng));
      const bool iso = is_isomorphic(x, shuffled, max_pair_atoms);
      const bool same = canonicalize(x) == canonicalize(shuffled);
      ++pairs;
      isomorphic += iso;
      if (iso != same) {
        ++disagreements;
        if (first.empty()) first = write_smiles(x) + " / " + write_smiles(*y) + " disagree";
      }
    }
  }
  out.passed = unstable == 0 && disagreements == 0;
  std::ostringstream d;
  d << molecules << " molecules x " << permutations << " permutations, " << unstable << " unstable; " << pairs << " pairs ("
    << isomorphic << " isomorphic), " << disagreements << " disagreements";
  if (!first.empty()) d << "; first: " << first;
  out.detail = d.str();
  return out;
}

// ------------------------------------------------------------------ selfies --

CheckResult check_selfies(std::uint64_t seed, int strings) {
  CheckResult out{"selfies robustness", false, {}, 0};
  Rng rng(mix_seed(seed, 0x73656c66));
  const auto alphabet = selfies_alphabet();
  int violations = 0, failures = 0;
  std::string first;
  for (int i = 0; i < strings; ++i) {
    std::string s;
    const int len = 1 + static_cast<int>(rng.below(30));
    for (int k = 0; k < len; ++k) s += alphabet[rng.below(alphabet.size())];
    try {
      const auto problems = validate_valence(decode_selfies(s));
      if (!problems.empty()) {
        ++violations;
        if (first.empty()) first = s + ": " + problems.front().message;
      }
    } catch (const std::exception& e) {
      ++failures;
      if (first.empty()) first = s + ": " + e.what();
    }
  }
  out.passed = violations == 0 && failures == 0;
  out.detail = std::to_string(strings) + " strings, " + std::to_string(violations) + " valence violations, " +
               std::to_string(failures) + " decode failures";
  if (!first.empty()) out.detail += "; first: " + first;
  return out;
}

// -------------------------------------------------------------- contrastive --

namespace {

std::vector<Molecule> distinct_molecules(std::uint64_t seed, int count, int min_heavy, int max_heavy) {
  MoleculeGenerator gen(seed);
  std::set<std::string> seen;
  std::vector<Molecule> out;
  while (static_cast<int>(out.size()) < count) {
    Molecule m = gen.next(max_heavy);
    if (m.heavy_atom_count() < min_heavy || m.num_fragments() != 1) continue;
    if (seen.insert(canonicalize(m).text).second) out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

ContrastiveRun run_contrastive(std::uint64_t seed, int pairs, int steps) {
  ContrastiveRun run;
  Matrix<double> zeros = Matrix<double>::Zero(4, 4);
  run.zero_score_loss = contrastive_loss<double>(zeros, Matrix<double>::Identity(4, 4), derangement(4, seed));

  std::vector<PairSample> data;
  const auto mols = distinct_molecules(mix_seed(seed, 0x636f6e), pairs, 4, 24);
  for (int i = 0; i < pairs; ++i)
    data.push_back({segment(mols[i]), Eigen::RowVectorXd::Unit(pairs, i), static_cast<std::uint64_t>(i)});

  TrainConfig cfg;
  cfg.seed = seed;
  cfg.d_gnn = 32;
  cfg.layers = 2;
  cfg.d_text = pairs;
  cfg.lr = 1e-2;
  cfg.batch_size = pairs;
  cfg.steps = steps;
  cfg.mask_ratio = 0;
  cfg.weights = {0, 0, 0, 0, 0, 1};
  auto result = train(data, cfg);
  run.first_loss = result.history.front().contrastive;
  run.last_loss = result.history.back().contrastive;

  const auto& model = result.model;
  Matrix<float> scores(pairs, pairs);
  for (int i = 0; i < pairs; ++i) scores.row(i) = encode(data[i].graph, model.gnn).graph * model.heads.text_proj;
  int good = 0;
  for (int i = 0; i < pairs; ++i)
    for (int j = 0; j < pairs; ++j)
      if (i != j) good += scores(i, i) > scores(i, j);
  run.separated_fraction = static_cast<double>(good) / (static_cast<double>(pairs) * (pairs - 1));
  return run;
}

CheckResult check_contrastive(std::uint64_t seed) {
  CheckResult out{"contrastive sanity", false, {}, 0};
  const auto run = run_contrastive(seed);
  const double expected = 1.5 * std::log(2.0);
  out.passed = std::abs(run.zero_score_loss - expected) <= 1e-9 && run.separated_fraction >= 0.9;
  out.detail = format("zero-score loss %.12f, separated %.4f", run.zero_score_loss, run.separated_fraction) +
               format(", loss %.4f -> %.4f", run.first_loss, run.last_loss);
  return out;
}

// ------------------------------------------------------------------ overfit --

namespace {

const char* const kOverfitCorpus[] = {
    "CC(=O)Oc1ccccc1C(=O)O",        "CC(C)Cc1ccc(C(C)C(=O)O)cc1",   "CN1C=NC2=C1C(=O)N(C)C(=O)N2C",
    "CC(=O)Nc1ccc(O)cc1",           "OC(=O)c1ccccc1O",              "CCN(CC)CCOC(=O)c1ccc(N)cc1",
    "COc1ccc2[nH]cc(CCN)c2c1",      "NCCc1ccc(O)c(O)c1",            "CCOC(=O)C1=C(C)NC(C)=C(C(=O)OC)C1",
    "Clc1ccc(cc1)C(c1ccccc1)N1CCNCC1", "CC(C)NCC(O)COc1cccc2ccccc12", "O=C1CCCN1",
    "CSCCC(N)C(=O)O",               "FC(F)(F)c1ccccc1",             "N#Cc1ccccc1Br",
    "OCC1OC(O)C(O)C(O)C1O",
};

}  // namespace

OverfitRun run_overfit(std::uint64_t seed, const OverfitConfig& config) {
  const int molecules = config.molecules;
  const int available = static_cast<int>(std::size(kOverfitCorpus));
  if (molecules > available) throw std::invalid_argument("overfit corpus has " + std::to_string(available) + " molecules");
  std::vector<PairSample> data;
  for (int i = 0; i < molecules; ++i) {
    const std::string description = std::string("compound number ") + std::to_string(i) + " from the overfit corpus";
    data.push_back({segment(parse_smiles(kOverfitCorpus[i])), text_embed_stub(description, 32, seed), static_cast<std::uint64_t>(i)});
  }
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.d_gnn = config.d_gnn;
  cfg.layers = config.layers;
  cfg.d_text = 32;
  cfg.lr = config.lr;
  cfg.batch_size = molecules;
  cfg.steps = config.steps;
  cfg.weights = config.weights;
  cfg.static_masks = config.static_masks;
  auto result = train(data, cfg);

  auto accuracy = [&](auto mask_seed_for) {
    int hits = 0, masked = 0;
    for (const auto& s : data) {
      const auto m = mask_atoms(s.graph, cfg.mask_ratio, mask_seed_for(s.id));
      const Matrix<float> states = encode_nodes(m.graph, result.model.gnn);
      for (int v : m.masked_atoms) {
        RowVector<float> logits = states.row(v) * result.model.heads.atom_w + result.model.heads.atom_b;
        Eigen::Index best;
        logits.maxCoeff(&best);
        hits += static_cast<int>(best) == s.graph.nodes()[v].token;
        ++masked;
      }
    }
    return std::pair{hits, masked};
  };

  OverfitRun run;
  run.first_total = result.history.front().total;
  run.last_total = result.history.back().total;
  if (config.static_masks) {
    const auto [hits, masked] = accuracy([&](std::uint64_t id) { return mix_seed(seed, id); });
    run.atom_type_accuracy = masked ? static_cast<double>(hits) / masked : 0.0;
  }
  int hits = 0, masked = 0;
  for (std::uint64_t draw = 0; draw < 8; ++draw) {
    const auto [h, m] = accuracy([&](std::uint64_t id) { return mix_seed(mix_seed(seed, 0x6576616c), draw * 1000 + id); });
    hits += h;
    masked += m;
  }
  run.fresh_mask_accuracy = masked ? static_cast<double>(hits) / masked : 0.0;
  if (!config.static_masks) run.atom_type_accuracy = run.fresh_mask_accuracy;
  return run;
}

CheckResult check_overfit(std::uint64_t seed) {
  CheckResult out{"overfit", false, {}, 0};
  const auto run = run_overfit(seed);
  out.passed = run.atom_type_accuracy >= 0.95 && run.last_total < run.first_total;
  out.detail = format("masked atom accuracy %.4f (fresh masks %.4f)", run.atom_type_accuracy, run.fresh_mask_accuracy) +
               format(", total loss %.4f -> %.4f", run.first_total, run.last_total);
  return out;
}

// -------------------------------------------------------------- determinism --

CheckResult check_determinism(std::uint64_t seed) {
  CheckResult out{"determinism and formats", false, {}, 0};
  std::vector<PairSample> data;
  const char* smiles[] = {"CCO", "CC(=O)O", "c1ccccc1O", "CCN", "CC(C)Cl", "C1CCCCC1", "OCC(O)CO", "c1ccncc1"};
  for (int i = 0; i < 8; ++i) data.push_back({segment(parse_smiles(smiles[i])), text_embed_stub(smiles[i], 8, seed), std::uint64_t(i)});
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.d_gnn = 8;
  cfg.layers = 2;
  cfg.d_text = 8;
  cfg.batch_size = 4;
  cfg.steps = 20;
  cfg.lr = 1e-2;
  auto bytes_of = [](auto&& writer) {
    std::ostringstream os;
    writer(os);
    return os.str();
  };
  std::vector<std::string> failures;
  const auto a = train(data, cfg).model, b = train(data, cfg).model;
  const std::string ckpt_a = bytes_of([&](std::ostream& os) { save_checkpoint(os, a); });
  const std::string ckpt_b = bytes_of([&](std::ostream& os) { save_checkpoint(os, b); });
  if (ckpt_a != ckpt_b) failures.push_back("checkpoints differ between runs");
  std::istringstream ckpt_in(ckpt_a);
  if (bytes_of([&](std::ostream& os) { save_checkpoint(os, load_checkpoint(ckpt_in)); }) != ckpt_a)
    failures.push_back("checkpoint round trip changed bytes");

  const auto p1 = init_projector<float>(seed, 8, 16), p2 = init_projector<float>(seed, 8, 16);
  for (auto mode : {TokenReduction::None, TokenReduction::Hierarchical, TokenReduction::All}) {
    const auto hg = segment(parse_smiles("CC(=O)Oc1ccccc1C(=O)O"));
    const auto t1 = reduce(project(encode(hg, a.gnn), p1), mode);
    const auto t2 = reduce(project(encode(hg, b.gnn), p2), mode);
    const std::string tok1 = bytes_of([&](std::ostream& os) { export_tokens(os, t1); });
    const std::string tok2 = bytes_of([&](std::ostream& os) { export_tokens(os, t2); });
    if (tok1 != tok2) failures.push_back(std::string("token files differ for ") + std::string(reduction_name(mode)));
    std::istringstream tok_in(tok1);
    if (bytes_of([&](std::ostream& os) { export_tokens(os, import_tokens(tok_in)); }) != tok1)
      failures.push_back("token round trip changed bytes");
  }
  const std::string proj = bytes_of([&](std::ostream& os) { save_projector(os, p1); });
  std::istringstream proj_in(proj);
  if (bytes_of([&](std::ostream& os) { save_projector(os, load_projector(proj_in)); }) != proj)
    failures.push_back("projector round trip changed bytes");

  out.passed = failures.empty();
  out.detail = failures.empty() ? "checkpoints, token files and projectors are bit-identical" : failures.front();
  return out;
}

// --------------------------------------------------------------- throughput --

CheckResult check_throughput(std::uint64_t seed, int molecules) {
  CheckResult out{"throughput", false, {}, 0};
  MoleculeGenerator gen(mix_seed(seed, 0x74707574));
  std::vector<Molecule> mols;
  int atoms = 0;
  while (static_cast<int>(mols.size()) < molecules) {
    Molecule m = gen.next(50);
    if (m.num_atoms() > 50) continue;
    atoms += m.num_atoms();
    mols.push_back(std::move(m));
  }
  const auto params = init_params<float>(seed, 300, 5);
  float sink = 0;
  for (int i = 0; i < 5; ++i) sink += encode(segment(mols[i]), params).graph(0);
  const auto start = Clock::now();
  for (const auto& m : mols) sink += encode(segment(m), params).graph(0);
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  const double rate = molecules / seconds;
  out.passed = rate >= 100 && std::isfinite(sink);
  out.detail = format("%.1f molecules/s (mean %.1f atoms, d=300, L=5, 1 worker)", rate, double(atoms) / molecules);
  return out;
}

}  // namespace hiermol
