#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hiermol/canon.hpp"
#include "hiermol/checks.hpp"
#include "hiermol/dataprep.hpp"
#include "hiermol/encoder.hpp"
#include "hiermol/fusion.hpp"
#include "hiermol/hierseg.hpp"
#include "hiermol/metrics.hpp"
#include "hiermol/parallel.hpp"
#include "hiermol/pretrain.hpp"
#include "hiermol/smiles.hpp"

using json = nlohmann::ordered_json;
using namespace hiermol;

namespace {

// Validation problems map to exit 1, everything else at run time to exit 2.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void report_error(const char* kind, const std::string& message) {
  json line;
  line["error"] = kind;
  line["message"] = message;
  std::cerr << line.dump() << '\n';
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

// Writes to a file when a path is given, else to stdout.
template <typename F>
void with_output(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_output(path);
  write(out);
  if (!out) throw std::runtime_error("failed to write " + path);
}

ErrorPolicy policy_from(const std::string& name) { return name == "skip" ? ErrorPolicy::Skip : ErrorPolicy::Abort; }

void print_skipped(const std::vector<LineIssue>& skipped) {
  for (const auto& s : skipped) {
    json line;
    line["skipped_line"] = s.line;
    line["reason"] = s.message;
    std::cerr << line.dump() << '\n';
  }
}

TokenReduction mode_from(const std::string& name) {
  if (auto m = reduction_from_name(name)) return *m;
  throw UsageError("unknown reduction mode " + name);
}

json level_names(const TokenBundle<float>& b) {
  json ids = json::array();
  for (Level l : b.level_ids) ids.push_back(level_name(l));
  return ids;
}

// Encoder weights from a checkpoint, or a seeded random initialization.
struct EncoderSource {
  std::string checkpoint;
  int d_gnn = 300;
  int layers = 5;

  void add_options(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Pre-trained checkpoint (random init when omitted)")->check(CLI::ExistingFile);
    app->add_option("--d-gnn", d_gnn, "Encoder width for random init")->check(CLI::PositiveNumber);
    app->add_option("--layers", layers, "Encoder depth for random init")->check(CLI::NonNegativeNumber);
  }

  GnnParams<float> load(std::uint64_t seed) const {
    if (!checkpoint.empty()) return load_checkpoint(checkpoint).gnn;
    return init_params<float>(seed, d_gnn, layers);
  }
};

struct ProjectorSource {
  std::string path;
  int d_llm = 2048;

  void add_options(CLI::App* app) {
    app->add_option("--projector", path, "Projector file (random init when omitted)")->check(CLI::ExistingFile);
    app->add_option("--d-llm", d_llm, "Language-model width for random init")->check(CLI::PositiveNumber);
  }

  Projector<float> load(std::uint64_t seed, int d_gnn) const {
    if (path.empty()) return init_projector<float>(seed, d_gnn, d_llm);
    auto p = load_projector(path);
    if (p.in_dim() != d_gnn)
      throw UsageError("projector expects d_gnn " + std::to_string(p.in_dim()) + " but features have " + std::to_string(d_gnn));
    return p;
  }
};

std::vector<LevelFeatures<float>> encode_all(const std::vector<SmilesRecord>& records, const GnnParams<float>& params,
                                             int workers) {
  std::vector<LevelFeatures<float>> out(records.size());
  parallel_for(static_cast<int>(records.size()), workers, [&](int i) { out[i] = encode(segment(parse_smiles(records[i].smiles)), params); });
  return out;
}

// Text vectors: a sidecar file when given, else the hashed stub.
Eigen::MatrixXd text_vectors(const std::vector<PairRecord>& pairs, const std::string& sidecar, int d_text, std::uint64_t seed) {
  if (!sidecar.empty()) {
    auto rows = read_sidecar(sidecar);
    if (rows.rows() != static_cast<Eigen::Index>(pairs.size()))
      throw UsageError("sidecar has " + std::to_string(rows.rows()) + " rows for " + std::to_string(pairs.size()) + " pairs");
    return rows;
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(pairs.size()), d_text);
  for (std::size_t i = 0; i < pairs.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = text_embed_stub(pairs[i].text, d_text, seed);
  return rows;
}

std::vector<PairRecord> load_pair_records(const std::string& path, const std::string& on_error) {
  auto loaded = load_pairs_file(path, policy_from(on_error));
  print_skipped(loaded.skipped);
  if (loaded.records.empty()) throw UsageError("no usable pairs in " + path);
  return loaded.records;
}

std::vector<SmilesRecord> load_smiles_records(const std::string& path, const std::string& on_error) {
  auto loaded = load_smiles_file(path, policy_from(on_error));
  print_skipped(loaded.skipped);
  return loaded.records;
}

// ----------------------------------------------------------- subcommands --

struct CleanArgs {
  std::string input, output, rejects;
  int min_heavy_atoms = 5;
  bool keep_all_fragments = false;
};

int run_clean(const CleanArgs& args) {
  const CleanConfig config{args.min_heavy_atoms, !args.keep_all_fragments};
  config.validate();
  CleanReport report;
  std::ostringstream kept, rejected;
  int number = 0;
  for (const auto& line : read_lines(args.input)) {
    ++number;
    std::istringstream fields(line);
    std::string smiles;
    if (!(fields >> smiles)) continue;
    const auto result = clean(smiles, config);
    report.add(result);
    if (result.accepted())
      kept << *result.smiles << '\n';
    else
      rejected << number << '\t' << reject_reason_name(result.reason) << '\t' << result.detail << '\n';
  }
  with_output(args.output, [&](std::ostream& out) { out << kept.str(); });
  if (!args.rejects.empty()) with_output(args.rejects, [&](std::ostream& out) { out << rejected.str(); });
  json summary;
  summary["input"] = report.total();
  summary["accepted"] = report.accepted;
  json reasons = json::object();
  for (auto r : {RejectReason::Parse, RejectReason::Valence, RejectReason::Size}) {
    auto it = report.rejected.find(r);
    reasons[std::string(reject_reason_name(r))] = it == report.rejected.end() ? 0 : it->second;
  }
  summary["rejected"] = reasons;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct SegmentArgs {
  std::string input, output, rules = "simple-brics", on_error = "abort";
};

int run_segment(const SegmentArgs& args) {
  const auto& rules = rules_by_name(args.rules);
  const auto records = load_smiles_records(args.input, args.on_error);
  with_output(args.output, [&](std::ostream& out) {
    for (const auto& r : records) {
      const Molecule mol = parse_smiles(r.smiles);
      const auto cuts = fragment_bonds(mol, rules);
      const auto partition = build_motifs(mol, cuts);
      const HierGraph hg = build_hier_graph(mol, partition);
      json line;
      line["line"] = r.line;
      line["smiles"] = r.smiles;
      line["a"] = hg.num_atoms();
      line["b"] = hg.num_motifs();
      json cut_pairs = json::array();
      for (int c : cuts) cut_pairs.push_back({mol.bond(c).begin, mol.bond(c).end});
      line["cut_bonds"] = cut_pairs;
      line["motifs"] = partition.members();
      out << line.dump() << '\n';
    }
  });
  return 0;
}

struct PretrainArgs {
  std::string pairs, config, checkpoint, log, text_embeddings, on_error = "abort";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
};

int run_pretrain(const PretrainArgs& args) {
  TrainConfig config;
  if (!args.config.empty()) {
    std::ifstream in(args.config);
    if (!in) throw std::runtime_error("cannot open " + args.config);
    std::stringstream text;
    text << in.rdbuf();
    config = parse_train_config(text.str());
  }
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + kv);
    set_train_option(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed) config.seed = *args.seed;

  const auto pairs = load_pair_records(args.pairs, args.on_error);
  const Eigen::MatrixXd texts = text_vectors(pairs, args.text_embeddings, config.d_text, config.seed);
  config.d_text = static_cast<int>(texts.cols());
  if (args.print_config) std::cerr << format_train_config(config);

  std::vector<PairSample> data;
  data.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    data.push_back({segment(parse_smiles(pairs[i].smiles)), texts.row(static_cast<Eigen::Index>(i)), static_cast<std::uint64_t>(i)});

  std::ofstream log;
  if (!args.log.empty()) log = open_output(args.log);
  const auto result = train(data, config, [&](int step, const LossReport& r) {
    if (log.is_open()) log << to_json_line(step, r) << '\n';
  });
  save_checkpoint(args.checkpoint, result.model);
  json summary;
  summary["pairs"] = data.size();
  summary["steps"] = result.history.size();
  summary["first_total"] = result.history.empty() ? 0.0 : result.history.front().total;
  summary["last_total"] = result.history.empty() ? 0.0 : result.history.back().total;
  summary["checkpoint"] = args.checkpoint;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct EmbedArgs {
  std::string input, output, on_error = "abort";
  EncoderSource encoder;
  std::uint64_t seed = 0;
  int workers = 1;
};

int run_embed(const EmbedArgs& args) {
  const auto params = args.encoder.load(args.seed);
  const auto records = load_smiles_records(args.input, args.on_error);
  const auto features = encode_all(records, params, args.workers);
  write_features(args.output, features, params.dim());
  json summary;
  summary["molecules"] = features.size();
  summary["d_gnn"] = params.dim();
  summary["output"] = args.output;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct ReduceArgs {
  std::string features, output, mode = "hier";
  ProjectorSource projector;
  std::uint64_t seed = 0;
};

int run_reduce(const ReduceArgs& args) {
  const TokenReduction mode = mode_from(args.mode);
  const auto features = read_features(args.features);
  if (features.empty()) throw UsageError("feature file " + args.features + " has no molecules");
  const auto projector = args.projector.load(args.seed, features.front().dim());
  with_output(args.output, [&](std::ostream& out) {
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto bundle = reduce(project(features[i], projector), mode);
      json line;
      line["index"] = i;
      line["mode"] = reduction_name(mode);
      line["k"] = bundle.k();
      line["level_ids"] = level_names(bundle);
      json rows = json::array();
      for (Eigen::Index r = 0; r < bundle.tokens.rows(); ++r)
        rows.push_back(std::vector<float>(bundle.tokens.row(r).begin(), bundle.tokens.row(r).end()));
      line["tokens"] = rows;
      out << line.dump() << '\n';
    }
  });
  return 0;
}

struct ExportArgs {
  std::string input, output_dir, mode = "hier", on_error = "abort";
  EncoderSource encoder;
  ProjectorSource projector;
  std::uint64_t seed = 0;
  int workers = 1;
};

int run_export(const ExportArgs& args) {
  const TokenReduction mode = mode_from(args.mode);
  const auto params = args.encoder.load(args.seed);
  const auto projector = args.projector.load(args.seed, params.dim());
  const auto records = load_smiles_records(args.input, args.on_error);
  const auto features = encode_all(records, params, args.workers);
  std::filesystem::create_directories(args.output_dir);
  const std::filesystem::path dir(args.output_dir);
  auto index = open_output((dir / "index.tsv").string());
  index << "file\tline\tsmiles\tk\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.tok", i);
    const auto bundle = reduce(project(features[i], projector), mode);
    export_tokens((dir / name).string(), bundle);
    index << name << '\t' << records[i].line << '\t' << records[i].smiles << '\t' << bundle.k() << '\n';
  }
  json summary;
  summary["molecules"] = records.size();
  summary["mode"] = reduction_name(mode);
  summary["d_llm"] = projector.out_dim();
  summary["output_dir"] = args.output_dir;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct AlignArgs {
  std::string pairs, checkpoint, output, log, text_embeddings, on_error = "abort";
  int d_llm = 2048;
  AlignConfig config;
  int workers = 1;
};

int run_align(const AlignArgs& args) {
  const auto params = load_checkpoint(args.checkpoint).gnn;
  const auto pairs = load_pair_records(args.pairs, args.on_error);
  const Eigen::MatrixXd targets = text_vectors(pairs, args.text_embeddings, args.d_llm, args.config.seed);
  std::vector<LevelFeatures<float>> features(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), args.workers, [&](int i) { features[i] = encode(segment(parse_smiles(pairs[i].smiles)), params); });
  std::vector<AlignSample> data;
  for (std::size_t i = 0; i < pairs.size(); ++i) data.push_back({std::move(features[i]), targets.row(static_cast<Eigen::Index>(i))});

  std::vector<double> losses;
  const auto projector = align_projector(data, args.config, &losses);
  save_projector(args.output, projector);
  if (!args.log.empty()) {
    auto log = open_output(args.log);
    for (std::size_t s = 0; s < losses.size(); ++s) {
      json line;
      line["step"] = s;
      line["contrastive"] = losses[s];
      log << line.dump() << '\n';
    }
  }
  const auto scores = alignment_scores(data, projector);
  const auto n = scores.rows();
  long separated = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) separated += i != j && scores(i, i) > scores(i, j);
  json summary;
  summary["pairs"] = n;
  summary["d_llm"] = projector.out_dim();
  summary["first_loss"] = losses.empty() ? 0.0 : losses.front();
  summary["last_loss"] = losses.empty() ? 0.0 : losses.back();
  summary["separated_fraction"] = n > 1 ? static_cast<double>(separated) / static_cast<double>(n * (n - 1)) : 1.0;
  std::cout << summary.dump() << '\n';
  return 0;
}

struct EvalArgs {
  std::string pred, truth, summary, records, format = "smiles";
  int workers = 1;
};

int run_eval_mol(const EvalArgs& args) {
  const auto format = args.format == "selfies" ? MoleculeFormat::Selfies : MoleculeFormat::Smiles;
  const auto report = evaluate_molecules(read_lines(args.pred), read_lines(args.truth), format, args.workers);
  with_output(args.summary, [&](std::ostream& out) { write_summary_csv(out, molecule_columns(), report.summary); });
  if (!args.records.empty()) with_output(args.records, [&](std::ostream& out) { write_records_jsonl(out, report); });
  return 0;
}

int run_eval_text(const EvalArgs& args) {
  const auto report = evaluate_texts(read_lines(args.pred), read_lines(args.truth), args.workers);
  with_output(args.summary, [&](std::ostream& out) { write_summary_csv(out, text_columns(), report.summary); });
  if (!args.records.empty()) with_output(args.records, [&](std::ostream& out) { write_records_jsonl(out, report); });
  return 0;
}

struct SelfcheckArgs {
  std::uint64_t seed = 0;
  std::vector<std::string> suites{"gradient", "pooling", "canonical"};
};

const std::vector<std::string> kSuiteNames{"gradient", "pooling",     "segmentation", "canonical", "selfies",
                                           "contrastive", "overfit", "determinism", "throughput"};

CheckResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "gradient") return check_gradients(seed);
  if (name == "pooling") return check_pooling(seed);
  if (name == "segmentation") return check_segmentation(seed);
  if (name == "canonical") return check_canonical_stability(seed);
  if (name == "selfies") return check_selfies(seed);
  if (name == "contrastive") return check_contrastive(seed);
  if (name == "overfit") return check_overfit(seed);
  if (name == "determinism") return check_determinism(seed);
  if (name == "throughput") return check_throughput(seed);
  throw UsageError("unknown suite " + name);
}

int run_selfcheck(const SelfcheckArgs& args) {
  std::vector<std::string> suites;
  for (const auto& s : args.suites) {
    if (s == "all")
      suites.insert(suites.end(), kSuiteNames.begin(), kSuiteNames.end());
    else
      suites.push_back(s);
  }
  bool all_passed = true;
  for (const auto& name : suites) {
    const auto r = timed([&] { return run_suite(name, args.seed); });
    all_passed = all_passed && r.passed;
    std::printf("%s %-14s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", name.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical molecular graph toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hiermol 0.1.0");

  const std::vector<std::string> policies{"skip", "abort"};
  auto on_error_option = [&](CLI::App* sub, std::string& target) {
    sub->add_option("--on-error", target, "Malformed input lines: skip or abort")->check(CLI::IsMember(policies));
  };
  auto workers_option = [](CLI::App* sub, int& target) {
    sub->add_option("--workers", target, "Worker threads; output order does not depend on it")->check(CLI::PositiveNumber);
  };
  std::vector<std::string> modes{"none", "hier", "all", "node", "motif", "graph"};

  CleanArgs clean_args;
  auto* clean_cmd = app.add_subcommand("clean", "Canonicalize and filter a SMILES file");
  clean_cmd->add_option("--input", clean_args.input, "SMILES file, one per line")->required()->check(CLI::ExistingFile);
  clean_cmd->add_option("--output", clean_args.output, "Accepted canonical SMILES")->required();
  clean_cmd->add_option("--rejects", clean_args.rejects, "TSV of rejected lines: line, reason, detail");
  clean_cmd->add_option("--min-heavy-atoms", clean_args.min_heavy_atoms, "Smallest accepted molecule");
  clean_cmd->add_flag("--keep-all-fragments", clean_args.keep_all_fragments, "Do not strip salts and solvents");

  SegmentArgs segment_args;
  auto* segment_cmd = app.add_subcommand("segment", "Split molecules into motifs and print the hierarchy");
  segment_cmd->add_option("--input", segment_args.input, "SMILES file")->required()->check(CLI::ExistingFile);
  segment_cmd->add_option("--output", segment_args.output, "JSON lines (stdout when omitted)");
  segment_cmd->add_option("--rules", segment_args.rules, "Fragmentation rule set")->check(CLI::IsMember({"simple-brics"}));
  on_error_option(segment_cmd, segment_args.on_error);

  PretrainArgs pretrain_args;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Pre-train the encoder on molecule/text pairs");
  pretrain_cmd->add_option("--pairs", pretrain_args.pairs, "TSV of smiles<TAB>text")->required()->check(CLI::ExistingFile);
  pretrain_cmd->add_option("--config", pretrain_args.config, "key = value training config")->check(CLI::ExistingFile);
  pretrain_cmd->add_option("--set", pretrain_args.overrides, "Override one config key, key=value (repeatable)");
  pretrain_cmd->add_option("--seed", pretrain_args.seed, "Random seed (overrides the config)");
  pretrain_cmd->add_option("--checkpoint", pretrain_args.checkpoint, "Output checkpoint")->required();
  pretrain_cmd->add_option("--log", pretrain_args.log, "Per-step loss log, JSON lines");
  pretrain_cmd->add_option("--text-embeddings", pretrain_args.text_embeddings, "Sidecar text vectors, one row per pair")
      ->check(CLI::ExistingFile);
  pretrain_cmd->add_flag("--print-config", pretrain_args.print_config, "Echo the effective config to stderr");
  on_error_option(pretrain_cmd, pretrain_args.on_error);

  EmbedArgs embed_args;
  auto* embed_cmd = app.add_subcommand("embed", "Segment and encode molecules into a feature file");
  embed_cmd->add_option("--input", embed_args.input, "SMILES file")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--output", embed_args.output, "Feature file")->required();
  embed_cmd->add_option("--seed", embed_args.seed, "Seed for random init");
  embed_args.encoder.add_options(embed_cmd);
  workers_option(embed_cmd, embed_args.workers);
  on_error_option(embed_cmd, embed_args.on_error);

  ReduceArgs reduce_args;
  auto* reduce_cmd = app.add_subcommand("reduce", "Project and reduce a feature file to tokens (JSON lines)");
  reduce_cmd->add_option("--features", reduce_args.features, "Feature file from embed")->required()->check(CLI::ExistingFile);
  reduce_cmd->add_option("--mode", reduce_args.mode, "Token reduction")->check(CLI::IsMember(modes));
  reduce_cmd->add_option("--output", reduce_args.output, "JSON lines (stdout when omitted)");
  reduce_cmd->add_option("--seed", reduce_args.seed, "Seed for random projector init");
  reduce_args.projector.add_options(reduce_cmd);

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-tokens", "Write one binary token file per molecule");
  export_cmd->add_option("--input", export_args.input, "SMILES file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--output-dir", export_args.output_dir, "Directory for NNNNNN.tok files and index.tsv")->required();
  export_cmd->add_option("--mode", export_args.mode, "Token reduction")->check(CLI::IsMember(modes));
  export_cmd->add_option("--seed", export_args.seed, "Seed for random init");
  export_args.encoder.add_options(export_cmd);
  export_args.projector.add_options(export_cmd);
  workers_option(export_cmd, export_args.workers);
  on_error_option(export_cmd, export_args.on_error);

  AlignArgs align_args;
  auto* align_cmd = app.add_subcommand("align-projector", "Fit the projector to text vectors with the encoder frozen");
  align_cmd->add_option("--pairs", align_args.pairs, "TSV of smiles<TAB>text")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--checkpoint", align_args.checkpoint, "Pre-trained checkpoint")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--output", align_args.output, "Output projector file")->required();
  align_cmd->add_option("--d-llm", align_args.d_llm, "Target width (ignored with --text-embeddings)")->check(CLI::PositiveNumber);
  align_cmd->add_option("--text-embeddings", align_args.text_embeddings, "Sidecar target vectors")->check(CLI::ExistingFile);
  align_cmd->add_option("--steps", align_args.config.steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
  align_cmd->add_option("--lr", align_args.config.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  align_cmd->add_option("--batch-size", align_args.config.batch_size, "Pairs per step")->check(CLI::Range(2, 1 << 20));
  align_cmd->add_option("--seed", align_args.config.seed, "Random seed");
  align_cmd->add_option("--log", align_args.log, "Per-step loss log, JSON lines");
  workers_option(align_cmd, align_args.workers);
  on_error_option(align_cmd, align_args.on_error);

  EvalArgs mol_args;
  auto* eval_mol_cmd = app.add_subcommand("eval-mol", "Score predicted molecules against references");
  eval_mol_cmd->add_option("--pred", mol_args.pred, "Predictions, one per line")->required()->check(CLI::ExistingFile);
  eval_mol_cmd->add_option("--truth", mol_args.truth, "References, one per line")->required()->check(CLI::ExistingFile);
  eval_mol_cmd->add_option("--format", mol_args.format, "Molecule notation")->check(CLI::IsMember({"smiles", "selfies"}));
  eval_mol_cmd->add_option("--summary", mol_args.summary, "Summary CSV (stdout when omitted)");
  eval_mol_cmd->add_option("--records", mol_args.records, "Per-line scores, JSON lines");
  workers_option(eval_mol_cmd, mol_args.workers);

  EvalArgs text_args;
  auto* eval_text_cmd = app.add_subcommand("eval-text", "Score generated captions against references");
  eval_text_cmd->add_option("--pred", text_args.pred, "Predictions, one per line")->required()->check(CLI::ExistingFile);
  eval_text_cmd->add_option("--truth", text_args.truth, "References, one per line")->required()->check(CLI::ExistingFile);
  eval_text_cmd->add_option("--summary", text_args.summary, "Summary CSV (stdout when omitted)");
  eval_text_cmd->add_option("--records", text_args.records, "Per-line scores, JSON lines");
  workers_option(eval_text_cmd, text_args.workers);

  SelfcheckArgs check_args;
  auto* check_cmd = app.add_subcommand("selfcheck", "Run built-in correctness suites");
  check_cmd->add_option("--seed", check_args.seed, "Random seed");
  std::vector<std::string> suite_choices = kSuiteNames;
  suite_choices.push_back("all");
  check_cmd->add_option("--suite", check_args.suites, "Suites to run (repeatable; default gradient pooling canonical)")
      ->check(CLI::IsMember(suite_choices))
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("usage", e.what());
    return 1;
  }

  try {
    if (clean_cmd->parsed()) return run_clean(clean_args);
    if (segment_cmd->parsed()) return run_segment(segment_args);
    if (pretrain_cmd->parsed()) return run_pretrain(pretrain_args);
    if (embed_cmd->parsed()) return run_embed(embed_args);
    if (reduce_cmd->parsed()) return run_reduce(reduce_args);
    if (export_cmd->parsed()) return run_export(export_args);
    if (align_cmd->parsed()) return run_align(align_args);
    if (eval_mol_cmd->parsed()) return run_eval_mol(mol_args);
    if (eval_text_cmd->parsed()) return run_eval_text(text_args);
    if (check_cmd->parsed()) return run_selfcheck(check_args);
  } catch (const std::invalid_argument& e) {
    report_error("validation", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return 2;
  }
  return 1;
}
