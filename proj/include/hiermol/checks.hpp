#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hiermol/pretrain.hpp"

namespace hiermol {

/// Outcome of one self-check suite. detail carries the measured quantity
/// (worst error, fraction, rate) in human-readable form.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

/// Reverse-mode gradient of the full pre-training objective against central
/// differences (h = 1e-5, double precision) on random molecules with
/// d = 8, L = 2, for Mean and Sum reductions. Passes when every block's
/// relative error is at most 1e-4.
CheckResult check_gradients(std::uint64_t seed, int molecules = 10);

/// On random feature sets: the single all-reduced token equals the
/// (a, b, 1)-weighted mean of the hierarchical tokens and the projection of
/// the raw mean (relative 1e-5), and token counts are a+b+1, 3 and 1.
CheckResult check_pooling(std::uint64_t seed, int trials = 1000);

/// Segments cleaned random molecules and verifies that motifs partition the
/// atoms into connected pieces, every atom has one motif link and every motif
/// one graph link, and no ring bond is cut.
CheckResult check_segmentation(std::uint64_t seed, int molecules = 1000);

/// Canonical SMILES must not change under random atom permutations, and
/// canonical equality must agree with the isomorphism test on small pairs.
CheckResult check_canonical_stability(std::uint64_t seed, int molecules = 500, int permutations = 20, int max_pair_atoms = 12);

/// Random strings over the SELFIES alphabet must decode to valence-valid
/// molecules.
CheckResult check_selfies(std::uint64_t seed, int strings = 1000);

struct ContrastiveRun {
  double zero_score_loss = 0;
  double separated_fraction = 0;  ///< ordered pairs with S_ii > S_ij
  double first_loss = 0;
  double last_loss = 0;
};

/// Trains with only the contrastive term on `pairs` distinct molecules paired
/// with orthogonal text vectors and reports how many matched scores beat the
/// mismatched ones afterwards.
ContrastiveRun run_contrastive(std::uint64_t seed, int pairs = 64, int steps = 500);
CheckResult check_contrastive(std::uint64_t seed);

struct OverfitConfig {
  int molecules = 16;
  int steps = 500;
  int d_gnn = 64;
  int layers = 3;
  double lr = 2e-3;
  bool static_masks = true;
  /// The link term sums over all atom pairs while the others are means, so
  /// at weight 1 it swamps the shared encoder within 500 steps.
  LossWeights weights = [] {
    LossWeights w;
    w.link = 0.1;
    return w;
  }();
};

struct OverfitRun {
  double first_total = 0;
  double last_total = 0;
  double atom_type_accuracy = 0;   ///< on the training masks (fresh ones when masks are dynamic)
  double fresh_mask_accuracy = 0;  ///< over eight mask draws never used in training
};

/// Joint objective on a small fixed corpus; the model should memorize it.
/// With static masks each molecule keeps one mask for the whole run, so
/// accuracy on those masks measures memorization; fresh masks measure
/// recovery of atoms in unseen masked contexts.
OverfitRun run_overfit(std::uint64_t seed, const OverfitConfig& config = {});
CheckResult check_overfit(std::uint64_t seed);

/// Same seed gives byte-identical checkpoints, token files and projector
/// files; each format round-trips bit-exactly.
CheckResult check_determinism(std::uint64_t seed);

/// Segment + encode rate on molecules of at most 50 atoms, single worker,
/// d = 300, L = 5. Passes at >= 100 molecules per second.
CheckResult check_throughput(std::uint64_t seed, int molecules = 300);

/// Times a suite and fills in seconds.
CheckResult timed(const std::function<CheckResult()>& suite);

}  // namespace hiermol
