// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_FUSION_HPP
#define PALMPIPE_FUSION_HPP

#include <array>
#include <cstdint>
#include <vector>

namespace palmpipe {

/// Scores of one comparison across the 5 patches, in order (whole, q1, q2,
/// q3, q4), with their arithmetic mean.
struct EnsembleScore {
  std::array<double, 5> per_patch{};
  double fused = 0.0;
};

struct ContingencyTable {
  std::uint64_t both_match = 0;
  std::uint64_t a_only = 0;
  std::uint64_t b_only = 0;
  std::uint64_t neither = 0;

  std::uint64_t total() const noexcept { return both_match + a_only + b_only + neither; }
};

/// Arithmetic mean of the 5 patch scores. Each input must lie in [0, 1].
double ensemble_mean(const std::array<double, 5>& scores);

EnsembleScore make_ensemble_score(const std::array<double, 5>& scores);

/// Cross-matcher sum fusion: the in-house score is scaled by 100 onto the
/// external matcher's [0, 100] range, giving a fused score in [0, 200].
double sum_fuse(double s_primary, double s_external);

/// Agreement counts of two matchers' accept decisions over the same
/// comparison list.
ContingencyTable contingency(const std::vector<bool>& decisions_a,
                             const std::vector<bool>& decisions_b);

}  // namespace palmpipe

#endif
