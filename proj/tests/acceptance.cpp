// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Usage: acceptance [seed]

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "hiermol/checks.hpp"
#include "hiermol/metrics.hpp"
#include "hiermol/pretrain.hpp"
#include "hiermol/rng.hpp"

using namespace hiermol;

namespace {

struct Criterion {
  int id;
  std::string title;
  double time_limit;  // seconds, 0 for none
  std::function<CheckResult()> run;
};

CheckResult smooth_l1_branches() {
  CheckResult out{"smooth-L1", false, {}, 0};
  // Quadratic branch 0.5 r^2 below 1, linear branch |r| - 0.5 from 1 on.
  const double quadratic_at_one = 0.5 * 1.0 * 1.0;
  const double linear_at_one = 1.0 - 0.5;
  const double at_one = smooth_l1(1.0);
  const double below = smooth_l1(std::nextafter(1.0, 0.0));
  const double at_half = smooth_l1(0.5);
  const double at_two = smooth_l1(2.0);
  const double at_minus_two = smooth_l1(-2.0);
  const bool ok = std::abs(quadratic_at_one - linear_at_one) <= 1e-12 && std::abs(at_one - 0.5) <= 1e-12 &&
                  std::abs(below - 0.5) <= 1e-12 && at_half == 0.125 && at_two == 1.5 && at_minus_two == 1.5;
  out.passed = ok;
  char buf[160];
  std::snprintf(buf, sizeof buf, "f(1)=%.15g f(1-)=%.15g f(0.5)=%.15g f(2)=%.15g", at_one, below, at_half, at_two);
  out.detail = buf;
  return out;
}

int levenshtein_recursive(const std::string& a, std::size_t i, const std::string& b, std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  if (a[i] == b[j]) return levenshtein_recursive(a, i + 1, b, j + 1);
  return 1 + std::min({levenshtein_recursive(a, i + 1, b, j), levenshtein_recursive(a, i, b, j + 1),
                       levenshtein_recursive(a, i + 1, b, j + 1)});
}

CheckResult metric_oracles(std::uint64_t seed) {
  CheckResult out{"metric oracles", false, {}, 0};
  Rng rng(mix_seed(seed, 9));
  auto random_string = [&] {
    std::string s(rng.below(9), ' ');
    for (char& c : s) c = "abcC(=)1"[rng.below(8)];
    return s;
  };
  int edit_mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::string a = random_string(), b = random_string();
    edit_mismatches += levenshtein(a, b) != levenshtein_recursive(a, 0, b, 0);
  }

  int fp_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const int nbits = 64 * (1 + static_cast<int>(rng.below(8)));
    Fingerprint x(FingerprintKind::Morgan, 2, nbits), y(FingerprintKind::Morgan, 2, nbits);
    const double density = rng.uniform();
    for (int bit = 0; bit < nbits; ++bit) {
      if (rng.uniform() < density) x.set(static_cast<std::uint64_t>(bit));
      if (rng.uniform() < density) y.set(static_cast<std::uint64_t>(bit));
    }
    const double xy = tanimoto(x, y);
    fp_failures += tanimoto(x, x) != 1.0 || !(xy >= 0.0 && xy <= 1.0) || xy != tanimoto(y, x);
  }

  const std::vector<std::string> texts{
      "the molecule is an aromatic ester derived from salicylic acid",
      "a b",
      "single",
      "it is a conjugate acid of a carboxylate anion and a member of benzenes",
  };
  int text_failures = 0;
  for (const auto& s : texts) {
    const auto w = whitespace_tokens(s);
    text_failures += bleu(w, w, 2) != 1.0 || bleu(w, w, 4) != 1.0 || rouge_n(w, w, 1) != 1.0 || rouge_n(w, w, 2) != 1.0 ||
                     rouge_l(w, w) != 1.0;
    const auto c = character_tokens(s);
    text_failures += bleu(c, c, 4) != 1.0;
  }

  out.passed = edit_mismatches == 0 && fp_failures == 0 && text_failures == 0;
  out.detail = "levenshtein mismatches " + std::to_string(edit_mismatches) + "/200, tanimoto failures " +
               std::to_string(fp_failures) + "/1000, BLEU/ROUGE failures " + std::to_string(text_failures);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 60, [&] { return check_gradients(seed, 10); }},
      {2, "pooling algebra", 0, [&] { return check_pooling(seed, 1000); }},
      {3, "segmentation laws", 0, [&] { return check_segmentation(seed, 1000); }},
      {4, "smooth-L1 branch agreement", 0, [] { return smooth_l1_branches(); }},
      {5, "contrastive sanity", 120, [&] { return check_contrastive(seed); }},
      {6, "overfit", 120, [&] { return check_overfit(seed); }},
      {7, "canonicalization stability", 0, [&] { return check_canonical_stability(seed, 500, 20, 12); }},
      {8, "SELFIES robustness", 0, [&] { return check_selfies(seed, 1000); }},
      {9, "metric oracles", 0, [&] { return metric_oracles(seed); }},
      {10, "determinism and formats", 0, [&] { return check_determinism(seed); }},
      {11, "throughput", 0, [&] { return check_throughput(seed); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    CheckResult r;
    try {
      r = timed(c.run);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    bool passed = r.passed;
    if (c.time_limit > 0 && r.seconds >= c.time_limit) {
      passed = false;
      r.detail += "; over the " + std::to_string(static_cast<int>(c.time_limit)) + " s limit";
    }
    failed += !passed;
    std::printf("AC%-2d %s  %-28s %s (%.2fs)\n", c.id, passed ? "PASS" : "FAIL", c.title.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
