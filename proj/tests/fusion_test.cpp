// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "palmpipe/fusion.hpp"
#include "testutil.hpp"

using namespace palmpipe;

TEST_CASE("ensemble mean of five patch scores") {
  CHECK(ensemble_mean({0.8, 0.8, 0.8, 0.8, 0.8}) == doctest::Approx(0.8));
  CHECK(ensemble_mean({1.0, 0.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.2));
  // Symmetric under permutation.
  CHECK(ensemble_mean({0.1, 0.2, 0.3, 0.4, 0.5}) ==
        doctest::Approx(ensemble_mean({0.5, 0.4, 0.3, 0.2, 0.1})));

  CHECK(testutil::thrown_code([] { ensemble_mean({1.2, 0.0, 0.0, 0.0, 0.0}); }) ==
        ErrorCode::OutOfRangeScore);
  CHECK(testutil::thrown_code([] { ensemble_mean({-0.1, 0.0, 0.0, 0.0, 0.0}); }) ==
        ErrorCode::OutOfRangeScore);

  const EnsembleScore es = make_ensemble_score({0.9, 0.8, 0.7, 0.6, 0.5});
  CHECK(es.fused == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(es.per_patch[0] == 0.9);

  // Mean is 1/5-Lipschitz in each argument.
  const double base = ensemble_mean({0.5, 0.5, 0.5, 0.5, 0.5});
  const double moved = ensemble_mean({0.75, 0.5, 0.5, 0.5, 0.5});
  CHECK(std::abs(moved - base) == doctest::Approx(0.25 / 5.0));
}

TEST_CASE("sum fusion scales the in-house score onto the external range") {
  CHECK(sum_fuse(1.0, 100.0) == doctest::Approx(200.0));
  CHECK(sum_fuse(0.0, 0.0) == doctest::Approx(0.0));
  CHECK(sum_fuse(0.5, 40.0) == doctest::Approx(90.0));

  CHECK(testutil::thrown_code([] { sum_fuse(1.1, 50.0); }) == ErrorCode::OutOfRangeScore);
  CHECK(testutil::thrown_code([] { sum_fuse(0.5, 101.0); }) == ErrorCode::OutOfRangeScore);
  CHECK(testutil::thrown_code([] { sum_fuse(-0.1, 50.0); }) == ErrorCode::OutOfRangeScore);

  // Order preserved when both inputs increase.
  CHECK(sum_fuse(0.6, 55.0) > sum_fuse(0.5, 50.0));
}

TEST_CASE("contingency table counts decision agreement") {
  const std::vector<bool> a = {true, true, false, false, true};
  const std::vector<bool> b = {true, false, true, false, true};
  const ContingencyTable t = contingency(a, b);
  CHECK(t.both_match == 2);
  CHECK(t.a_only == 1);
  CHECK(t.b_only == 1);
  CHECK(t.neither == 1);
  CHECK(t.total() == a.size());

  const ContingencyTable same = contingency(a, a);
  CHECK(same.a_only == 0);
  CHECK(same.b_only == 0);
  CHECK(same.total() == a.size());

  CHECK(testutil::thrown_code([&] { contingency(a, {true}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("contingency fixture totals match the published cell values") {
  ContingencyTable t;
  t.both_match = 162696;
  t.a_only = 10805;
  t.b_only = 21810;
  t.neither = 31316;
  CHECK(t.total() == 226627);
}
