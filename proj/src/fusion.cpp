// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/fusion.hpp"

#include <cmath>
#include <cstdio>

#include "palmpipe/error.hpp"

namespace palmpipe {

namespace {

void check_unit_range(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%s %.6g outside [0, 1]", what, v);
    raise(ErrorCode::OutOfRangeScore, buf);
  }
}

}  // namespace

double ensemble_mean(const std::array<double, 5>& scores) {
  double sum = 0.0;
  for (double s : scores) {
    check_unit_range(s, "patch score");
    sum += s;
  }
  return sum / 5.0;
}

EnsembleScore make_ensemble_score(const std::array<double, 5>& scores) {
  EnsembleScore out;
  out.per_patch = scores;
  out.fused = ensemble_mean(scores);
  return out;
}

double sum_fuse(double s_primary, double s_external) {
  check_unit_range(s_primary, "primary score");
  if (!std::isfinite(s_external) || s_external < 0.0 || s_external > 100.0) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "external score %.6g outside [0, 100]", s_external);
    raise(ErrorCode::OutOfRangeScore, buf);
  }
  return 100.0 * s_primary + s_external;
}

ContingencyTable contingency(const std::vector<bool>& decisions_a,
                             const std::vector<bool>& decisions_b) {
  if (decisions_a.size() != decisions_b.size()) {
    raise(ErrorCode::LengthMismatch, "decision lists have different lengths");
  }
  ContingencyTable t;
  for (std::size_t i = 0; i < decisions_a.size(); ++i) {
    const bool a = decisions_a[i];
    const bool b = decisions_b[i];
    if (a && b) {
      ++t.both_match;
    } else if (a) {
      ++t.a_only;
    } else if (b) {
      ++t.b_only;
    } else {
      ++t.neither;
    }
  }
  return t;
}

}  // namespace palmpipe
