// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_EVALUATION_HPP
#define PALMPIPE_EVALUATION_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "palmpipe/manifest.hpp"

namespace palmpipe {

struct ScoreRecord {
  std::string probe_id;
  std::string gallery_id;
  std::string subject_a;
  std::string subject_b;
  double score = 0.0;
  bool genuine = false;
};

/// Empirical ROC sampled at every distinct observed score. far and tar are
/// the fractions of impostor and genuine scores ≥ each threshold (ties
/// count as matches), so both are non-increasing in the threshold.
struct RocCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> far;
  std::vector<double> tar;

  void validate() const;
};

enum class ImpostorPolicy { FirstCapture = 0, AllCross = 1 };

const char* impostor_policy_name(ImpostorPolicy policy);
ImpostorPolicy impostor_policy_from_name(const std::string& name);

struct PairPolicy {
  ImpostorPolicy impostor = ImpostorPolicy::FirstCapture;
  std::uint64_t impostor_cap = 1000000;  // sample above this many impostor pairs
  std::uint64_t seed = 0;
};

/// Indices into the manifest's entry list.
struct PairSpec {
  int probe_index = 0;
  int gallery_index = 0;
  bool genuine = false;
};

/// Genuine pairs are all within-subject cross-capture combinations.
/// Impostor pairs follow the policy: first capture of every subject
/// against every other subject's first capture, or all cross-subject
/// capture pairs; either set is uniformly subsampled to impostor_cap with
/// the policy seed when it is larger. Deterministic for fixed inputs.
std::vector<PairSpec> generate_pairs(const Manifest& manifest, const PairPolicy& policy);

RocCurve compute_roc(const std::vector<ScoreRecord>& records);

struct OperatingPoint {
  double tar = 0.0;
  double threshold = 0.0;  // +inf when no threshold reaches the FAR target
};

/// Smallest threshold whose empirical FAR is ≤ far_target, with the TAR
/// there; (0, +inf) when even the strictest threshold is above target.
OperatingPoint tar_at_far(const RocCurve& roc, double far_target);

/// FAR = FRR crossing, linearly interpolated between the bracketing
/// thresholds.
double eer(const RocCurve& roc);

/// CSV with header probe_id,gallery_id,genuine,score; genuine is 1 or 0;
/// UTF-8, LF line endings.
void save_score_csv(const std::vector<ScoreRecord>& records, const std::string& path);
std::vector<ScoreRecord> load_score_csv(const std::string& path);

/// One labeled subset of records (e.g. an age band) for a summary
/// breakdown section.
using RecordGroup = std::pair<std::string, std::vector<ScoreRecord>>;

/// Writes scores.csv, roc.csv, histogram.csv (100 uniform bins over the
/// observed score range, per class), and summary.txt (operating points at
/// FAR 0.1% and 1%, EER, per-group breakdowns). Byte-deterministic.
void export_report(const std::vector<ScoreRecord>& records, const std::vector<RecordGroup>& groups,
                   const std::string& out_dir);

}  // namespace palmpipe

#endif
