#include <doctest.h>

#include <cmath>

#include "hiermol/checks.hpp"

using namespace hiermol;

TEST_CASE("suites pass at reduced sizes") {
  CHECK(check_gradients(3, 2).passed);
  CHECK(check_pooling(3, 50).passed);
  CHECK(check_segmentation(3, 50).passed);
  CHECK(check_canonical_stability(3, 20, 5, 10).passed);
  CHECK(check_selfies(3, 100).passed);
  CHECK(check_determinism(3).passed);
}

TEST_CASE("contrastive run reports the zero-score loss") {
  const auto run = run_contrastive(1, 8, 100);
  CHECK(run.zero_score_loss == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(run.last_loss < run.first_loss);
  CHECK(run.separated_fraction >= 0.0);
  CHECK(run.separated_fraction <= 1.0);
}

TEST_CASE("overfit run: static and dynamic mask accounting") {
  OverfitConfig small;
  small.molecules = 4;
  small.steps = 40;
  small.d_gnn = 16;
  small.layers = 2;
  const auto fixed = run_overfit(2, small);
  CHECK(fixed.last_total < fixed.first_total);
  CHECK(fixed.atom_type_accuracy >= 0.0);
  CHECK(fixed.atom_type_accuracy <= 1.0);

  small.static_masks = false;
  const auto dynamic = run_overfit(2, small);
  CHECK(dynamic.atom_type_accuracy == dynamic.fresh_mask_accuracy);

  small.molecules = 1000;
  CHECK_THROWS_AS(run_overfit(2, small), std::invalid_argument);
}

TEST_CASE("timed fills in a duration") {
  const auto r = timed([] { return CheckResult{"noop", true, "", 0}; });
  CHECK(r.passed);
  CHECK(r.seconds >= 0.0);
}
