#include "hiermol/pretrain.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hiermol/binary_io.hpp"

namespace hiermol {

SslTargets make_targets(const HierGraph& hg, std::span<const int> masked_atoms) {
  SslTargets t;
  const int a = hg.num_atoms();
  std::vector<bool> masked(static_cast<std::size_t>(a), false);
  for (int v : masked_atoms) {
    if (v < 0 || v >= a) throw std::invalid_argument("masked atom out of range");
    masked[v] = true;
    t.masked_atoms.push_back(v);
    t.atom_labels.push_back(hg.nodes()[v].token);
  }
  for (const auto& e : hg.edges()) {
    if (e.kind == EdgeKind::MotifLink || e.kind == EdgeKind::GraphLink) continue;
    auto pair = std::minmax(e.u, e.v);
    t.bonds.emplace_back(pair.first, pair.second);
    if (masked[e.u] || masked[e.v]) {
      t.masked_bonds.emplace_back(pair.first, pair.second);
      t.bond_labels.push_back(static_cast<int>(e.kind));
    }
  }
  t.atom_count = a;
  t.bond_count = static_cast<int>(t.bonds.size());
  return t;
}

std::vector<int> derangement(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("a derangement needs at least two elements");
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i))]);
  return p;
}

void LossWeights::validate() const {
  for (double w : {link, atom_type, bond_type, atom_count, bond_count, contrastive})
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and non-negative");
}

double total_loss(const LossReport& r, const LossWeights& w) {
  w.validate();
  return w.link * r.link + w.atom_type * r.atom_type + w.bond_type * r.bond_type + w.atom_count * r.atom_count +
         w.bond_count * r.bond_count + w.contrastive * r.contrastive;
}

std::string to_json_line(int step, const LossReport& r) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["link"] = r.link;
  j["atom_type"] = r.atom_type;
  j["bond_type"] = r.bond_type;
  j["atom_count"] = r.atom_count;
  j["bond_count"] = r.bond_count;
  j["contrastive"] = r.contrastive;
  j["total"] = r.total;
  j["atom_type_accuracy"] = r.atom_type_accuracy;
  return j.dump();
}

// ---------------------------------------------------------------- config --

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || end != value.data() + value.size())
    throw std::invalid_argument("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
  return out;
}

int parse_positive(std::string_view key, std::string_view value) {
  int v = parse_number<int>(key, value);
  if (v < 1) throw std::invalid_argument(std::string(key) + " must be positive");
  return v;
}

}  // namespace

void set_train_option(TrainConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  auto real = [&] { return parse_number<double>(key, value); };
  if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "d_gnn") c.d_gnn = parse_positive(key, value);
  else if (key == "layers") c.layers = parse_positive(key, value);
  else if (key == "d_text") c.d_text = parse_positive(key, value);
  else if (key == "lr") c.lr = real();
  else if (key == "beta1") c.beta1 = real();
  else if (key == "beta2") c.beta2 = real();
  else if (key == "adam_eps") c.adam_eps = real();
  else if (key == "batch_size") c.batch_size = parse_positive(key, value);
  else if (key == "epochs") c.epochs = parse_positive(key, value);
  else if (key == "steps") c.steps = parse_number<int>(key, value);
  else if (key == "mask_ratio") c.mask_ratio = real();
  else if (key == "static_masks") {
    if (value == "true") c.static_masks = true;
    else if (value == "false") c.static_masks = false;
    else throw std::invalid_argument("static_masks must be true or false");
  } else if (key == "reduction") {
    if (value == "mean") c.reduction = Reduction::Mean;
    else if (value == "sum") c.reduction = Reduction::Sum;
    else throw std::invalid_argument("reduction must be mean or sum");
  } else if (key == "weight.link") c.weights.link = real();
  else if (key == "weight.atom_type") c.weights.atom_type = real();
  else if (key == "weight.bond_type") c.weights.bond_type = real();
  else if (key == "weight.atom_count") c.weights.atom_count = real();
  else if (key == "weight.bond_count") c.weights.bond_count = real();
  else if (key == "weight.contrastive") c.weights.contrastive = real();
  else throw std::invalid_argument("unknown config key: " + std::string(key));
  if (c.lr < 0) throw std::invalid_argument("lr must be non-negative");
  if (!(c.mask_ratio >= 0 && c.mask_ratio <= 1)) throw std::invalid_argument("mask_ratio must lie in [0, 1]");
  c.weights.validate();
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    try {
      set_train_option(c, s.substr(0, eq), s.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return c;
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "seed = " << c.seed << "\nd_gnn = " << c.d_gnn << "\nlayers = " << c.layers << "\nd_text = " << c.d_text
      << "\nlr = " << c.lr << "\nbeta1 = " << c.beta1 << "\nbeta2 = " << c.beta2 << "\nadam_eps = " << c.adam_eps
      << "\nbatch_size = " << c.batch_size << "\nepochs = " << c.epochs << "\nsteps = " << c.steps
      << "\nmask_ratio = " << c.mask_ratio << "\nstatic_masks = " << (c.static_masks ? "true" : "false") << "\nreduction = " << (c.reduction == Reduction::Mean ? "mean" : "sum")
      << "\nweight.link = " << c.weights.link << "\nweight.atom_type = " << c.weights.atom_type
      << "\nweight.bond_type = " << c.weights.bond_type << "\nweight.atom_count = " << c.weights.atom_count
      << "\nweight.bond_count = " << c.weights.bond_count << "\nweight.contrastive = " << c.weights.contrastive << "\n";
  return out.str();
}

// -------------------------------------------------------------- training --

TrainResult train(std::span<const PairSample> dataset, const TrainConfig& config, const StepLogger& log) {
  if (dataset.empty()) throw std::invalid_argument("training set is empty");
  const int n = static_cast<int>(dataset.size());
  const int batch_size = std::min(config.batch_size, n);
  const int steps_per_epoch = (n + batch_size - 1) / batch_size;
  const int total_steps = config.steps > 0 ? config.steps : config.epochs * steps_per_epoch;

  TrainResult result{init_model<float>(config.seed, config.d_gnn, config.layers, config.d_text), {}};
  Adam<float> optimizer(result.model, {config.lr, config.beta1, config.beta2, config.adam_eps});
  ObjectiveConfig objective{config.weights, config.reduction, config.mask_ratio, std::nullopt};
  if (config.static_masks) objective.mask_seed = config.seed;

  // Batches are drawn from a stream of per-epoch shuffles so every batch has
  // exactly batch_size records.
  std::vector<int> order;
  std::size_t cursor = 0;
  int epoch = 0;
  auto next_index = [&] {
    if (cursor == order.size()) {
      order.resize(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      Rng rng(mix_seed(config.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch++)));
      rng.shuffle(std::span<int>(order));
      cursor = 0;
    }
    return order[cursor++];
  };

  Model<float> grad;
  std::vector<PairSample> batch;
  for (int step = 0; step < total_steps; ++step) {
    batch.clear();
    for (int k = 0; k < batch_size; ++k) batch.push_back(dataset[static_cast<std::size_t>(next_index())]);
    LossReport report;
    try {
      report = evaluate_objective<float>(result.model, batch, objective, mix_seed(config.seed, static_cast<std::uint64_t>(step)), &grad);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    optimizer.step(result.model, grad);
    if (log) log(step, report);
    result.history.push_back(report);
  }
  return result;
}

// ------------------------------------------------------------ checkpoint --

namespace {

constexpr std::string_view kCheckpointMagic = "HMOLCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(std::ostream& out, const Model<float>& model) {
  binio::write_bytes(out, kCheckpointMagic);
  binio::write_u32(out, kCheckpointVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(model.dim()));
  binio::write_u32(out, static_cast<std::uint32_t>(model.depth()));
  std::uint32_t blocks = 0;
  model.for_each_block([&](const std::string&, const auto&) { ++blocks; });
  binio::write_u32(out, blocks);
  model.for_each_block([&](const std::string& name, const auto& map) {
    binio::write_u32(out, static_cast<std::uint32_t>(name.size()));
    binio::write_bytes(out, name);
    binio::write_u32(out, static_cast<std::uint32_t>(map.rows()));
    binio::write_u32(out, static_cast<std::uint32_t>(map.cols()));
    for (Eigen::Index r = 0; r < map.rows(); ++r)
      for (Eigen::Index c = 0; c < map.cols(); ++c) binio::write_f32(out, map(r, c));
  });
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

Model<float> load_checkpoint(std::istream& in) {
  binio::expect_magic(in, kCheckpointMagic, "checkpoint");
  const auto version = binio::read_u32(in);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto dim = static_cast<int>(binio::read_u32(in));
  const auto depth = static_cast<int>(binio::read_u32(in));
  const auto count = binio::read_u32(in);
  std::map<std::string, Matrix<float>> blocks;
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = binio::read_u32(in);
    if (name_len > 256) throw std::runtime_error("corrupt checkpoint: block name too long");
    std::string name = binio::read_bytes(in, name_len);
    const auto rows = binio::read_u32(in), cols = binio::read_u32(in);
    if (static_cast<std::uint64_t>(rows) * cols > (1ULL << 28)) throw std::runtime_error("corrupt checkpoint: block too large");
    Matrix<float> m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = binio::read_f32(in);
    blocks.emplace(std::move(name), std::move(m));
  }
  auto proj = blocks.find("heads.text_proj");
  if (proj == blocks.end()) throw std::runtime_error("checkpoint lacks block heads.text_proj");
  Model<float> model = zero_model<float>(dim, depth, static_cast<int>(proj->second.cols()));
  model.for_each_block([&](const std::string& name, auto map) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw std::runtime_error("checkpoint lacks block " + name);
    if (it->second.rows() != map.rows() || it->second.cols() != map.cols())
      throw std::runtime_error("checkpoint block " + name + " has the wrong shape");
    map = it->second;
    blocks.erase(it);
  });
  if (!blocks.empty()) throw std::runtime_error("checkpoint has unexpected block " + blocks.begin()->first);
  return model;
}

void save_checkpoint(const std::string& path, const Model<float>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(out, model);
}

Model<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace hiermol
