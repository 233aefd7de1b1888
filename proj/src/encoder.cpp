#include "hiermol/encoder.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "hiermol/binary_io.hpp"

namespace hiermol {

MaskedGraph mask_atoms(const HierGraph& hg, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("mask ratio must lie in [0, 1]");
  const int a = hg.num_atoms();
  // The small slack keeps products such as 0.2 * 5 from rounding up to 2.
  const int count = std::min(a, static_cast<int>(std::ceil(ratio * a - 1e-9)));
  std::vector<int> order(static_cast<std::size_t>(a));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x6d61736b));
  rng.shuffle(std::span<int>(order));
  std::vector<int> chosen(order.begin(), order.begin() + std::max(count, 0));
  std::sort(chosen.begin(), chosen.end());
  return {hg.with_tokens(chosen, kMaskToken), chosen};
}

namespace {

constexpr std::string_view kFeatureMagic = "HMOLFEAT";
constexpr std::uint32_t kFeatureVersion = 1;

}  // namespace

void write_features(std::ostream& out, const std::vector<LevelFeatures<float>>& items, int dim) {
  if (dim < 1) throw std::invalid_argument("feature dimension must be positive");
  binio::write_bytes(out, kFeatureMagic);
  binio::write_u32(out, kFeatureVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(items.size()));
  binio::write_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& f : items) {
    if (f.dim() != dim || f.nodes.cols() != dim || f.motifs.cols() != dim)
      throw std::invalid_argument("feature dimension differs from " + std::to_string(dim));
    binio::write_u32(out, static_cast<std::uint32_t>(f.a()));
    binio::write_u32(out, static_cast<std::uint32_t>(f.b()));
    const Matrix<float> rows = f.stacked();
    for (Eigen::Index i = 0; i < rows.size(); ++i) binio::write_f32(out, rows.data()[i]);
  }
  if (!out) throw std::runtime_error("failed to write feature file");
}

std::vector<LevelFeatures<float>> read_features(std::istream& in) {
  binio::expect_magic(in, kFeatureMagic, "feature");
  if (auto v = binio::read_u32(in); v != kFeatureVersion) throw std::runtime_error("unsupported feature file version " + std::to_string(v));
  const auto count = binio::read_u32(in);
  const auto d = binio::read_u32(in);
  if (d == 0) throw std::runtime_error("corrupt feature file: zero dimension");
  std::vector<LevelFeatures<float>> items;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto a = binio::read_u32(in);
    const auto b = binio::read_u32(in);
    if (static_cast<std::uint64_t>(a + 1ULL + b) * d > (1ULL << 28)) throw std::runtime_error("corrupt feature file: record too large");
    Matrix<float> rows(a + b + 1, d);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = binio::read_f32(in);
    LevelFeatures<float> f;
    f.nodes = rows.topRows(a);
    f.motifs = rows.middleRows(a, b);
    f.graph = rows.row(a + b);
    items.push_back(std::move(f));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("corrupt feature file: trailing bytes");
  return items;
}

void write_features(const std::string& path, const std::vector<LevelFeatures<float>>& items, int dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_features(out, items, dim);
}

std::vector<LevelFeatures<float>> read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_features(in);
}

}  // namespace hiermol
