// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_PIPELINE_HPP
#define PALMPIPE_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "palmpipe/evaluation.hpp"
#include "palmpipe/features.hpp"
#include "palmpipe/fusion.hpp"
#include "palmpipe/gallery.hpp"
#include "palmpipe/image.hpp"
#include "palmpipe/keypoints.hpp"
#include "palmpipe/manifest.hpp"
#include "palmpipe/tps.hpp"

namespace palmpipe {

/// Configuration shared by the matching workflows. On disk this is flat
/// `key = value` text, one pair per line, with '#' comments; unknown keys
/// are rejected. Command-line overrides are applied on top of file values
/// through set_config_value, so the precedence is defaults < file < flags.
struct PipelineConfig {
  KeypointProviderConfig keypoints;
  bool enhance = true;
  int enhance_window = 31;
  bool realign = true;
  RealignParams realign_params;
  bool ensemble = true;
  DescriptorConfig descriptor;
  // Verification accept threshold. Default sits at the FAR ~ 0.1% operating
  // point of the no-realignment score distribution on the seeded reference
  // benchmark (verify scores probes without a per-comparison realign).
  double similarity_threshold = 0.96;
  ImpostorPolicy impostor_policy = ImpostorPolicy::FirstCapture;
  std::uint64_t impostor_cap = 1000000;
  std::uint64_t seed = 0;
  int jobs = 1;  // 0 = one worker per hardware thread

  void validate() const;
};

PipelineConfig pipeline_config_from_text(const std::string& text);
std::string pipeline_config_to_text(const PipelineConfig& cfg);
PipelineConfig load_pipeline_config(const std::string& path);

/// Applies one textual override; keys and value syntax are exactly the
/// config file's.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

struct ProcessedCapture {
  std::string subject_id;
  std::string capture_id;
  int age_months = 0;
  Image roi;  // enhancement already applied when configured
  std::array<Embedding, kNumPatches> embeddings;
};

/// Keypoints (from file or detection) -> mirror left captures to the
/// right-hand layout -> homographic ROI crop -> optional enhancement ->
/// five patch embeddings.
ProcessedCapture process_image(const Image& img, const std::optional<KeypointSet>& keypoints,
                               const PipelineConfig& cfg);

/// process_image for one manifest entry, resolving paths relative to the
/// manifest's directory.
ProcessedCapture process_capture(const Manifest& manifest, const std::string& dataset_dir,
                                 int index, const PipelineConfig& cfg);

struct PipelineRunStats {
  int processed = 0;
  int failed = 0;
};

/// Processes every capture of the manifest and writes roi/<capture>.png
/// plus emb/<capture>.<patch>.plme under out_dir, along with the effective
/// config.txt. Per-capture failures are logged and counted, never fatal.
PipelineRunStats run_pipeline(const std::string& manifest_path, const PipelineConfig& cfg,
                              const std::string& out_dir);

struct EvalMetrics {
  double eer = 0.0;
  double tar_at_far_0_1pct = 0.0;
  double threshold_far_0_1pct = 0.0;
  double tar_at_far_1pct = 0.0;
  double threshold_far_1pct = 0.0;
  std::uint64_t genuine_pairs = 0;
  std::uint64_t impostor_pairs = 0;
};

/// Verification benchmark over one dataset: processes all captures, forms
/// genuine/impostor pairs per the configured policy, scores them (with
/// per-comparison probe re-alignment toward the gallery ROI when enabled),
/// and writes scores.csv, roc.csv, histogram.csv, summary.txt and
/// config.txt under out_dir. The summary breaks results down by age band
/// when the manifest carries ages. Deterministic for fixed inputs,
/// independent of the worker count.
EvalMetrics run_eval(const std::string& manifest_path, const PipelineConfig& cfg,
                     const std::string& out_dir);

struct FuseMetrics {
  double threshold_a = 0.0;  // matcher A accept threshold at FAR = 0.1%
  double threshold_b = 0.0;  // matcher B accept threshold at FAR = 0.1%
  ContingencyTable table;    // agreement of the two accept decisions
  EvalMetrics fused;         // operating points of the fused score set
};

/// Sum-score fusion of two matchers' score files over the same pair set
/// (csv_a holds in-house scores in [0,1], csv_b external scores in
/// [0,100]). Writes the fused report plus contingency.csv under out_dir.
/// Pair-set mismatches raise LengthMismatch.
FuseMetrics run_fuse(const std::string& csv_a, const std::string& csv_b,
                     const std::string& out_dir);

/// Builds a gallery file from every capture of a manifest. Returns the
/// number of enrolled captures.
int run_enroll(const std::string& manifest_path, const PipelineConfig& cfg,
               const std::string& gallery_path);

/// One-image verification against an enrolled subject. keypoints_path may
/// be empty only with the heuristic provider.
VerifyResult run_verify(const std::string& gallery_path, const std::string& image_path,
                        const std::string& keypoints_path, const std::string& subject_id,
                        const PipelineConfig& cfg);

/// Top-n identification of a single capture.
std::vector<RankedMatch> run_identify(const std::string& gallery_path,
                                      const std::string& image_path,
                                      const std::string& keypoints_path, int top_n,
                                      const PipelineConfig& cfg);

}  // namespace palmpipe

#endif
