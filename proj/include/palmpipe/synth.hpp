// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_SYNTH_HPP
#define PALMPIPE_SYNTH_HPP

#include <array>
#include <cstdint>
#include <string>

#include "palmpipe/geometry.hpp"
#include "palmpipe/image.hpp"
#include "palmpipe/manifest.hpp"
#include "palmpipe/rng.hpp"
#include "palmpipe/tps.hpp"

namespace palmpipe {

/// Per-identity deviations from the reference hand silhouette. Only
/// non-landmark outline vertices move, so ground-truth keypoints stay
/// exactly on the pose-mapped template coordinates.
struct OutlineParams {
  std::array<double, 4> finger_length_delta{};  // index..little, px along finger axis
  std::array<double, 4> finger_width_delta{};   // px perpendicular, per tip corner
  double thumb_length_delta = 0.0;
  double ulnar_width_delta = 0.0;  // outward shift of the little-finger-side bulge

  /// Bounds keep fingertip prominence and the lateral-extremum ordering
  /// of the silhouette intact: |length| <= 8, |width| <= 3, |thumb| <= 6,
  /// |ulnar| <= 3.
  void validate() const;
};

/// Deterministic description of one palm: silhouette plus skin texture
/// (three principal lines, minor creases, a ridge carrier field, mottling).
/// All rendering randomness derives from `seed`.
struct PalmIdentity {
  std::uint64_t seed = 0;

  std::array<std::array<Vec2, 4>, 3> principal_line_controls{};  // cubic Bezier, canonical frame
  std::array<double, 3> principal_line_depth{0.22, 0.22, 0.22};
  std::array<double, 3> principal_line_sigma{2.5, 2.5, 2.5};

  double minor_crease_density = 0.04;  // creases per 100 square px of silhouette
  double ridge_frequency = 0.07;       // cycles per px, in (0, 0.2]
  double ridge_orientation = 0.0;      // radians, [0, pi)
  double ridge_phase_amplitude = 2.0;  // radians of smooth phase wobble
  std::uint64_t ridge_phase_field_seed = 0;
  double base_level = 0.62;  // mean skin intensity

  OutlineParams outline;

  static PalmIdentity from_seed(std::uint64_t seed);
  void validate() const;
};

enum class Background { Dark = 0, Cluttered = 1 };

const char* background_name(Background bg);
Background background_from_name(const std::string& name);

/// One capture event. Rendering is deterministic in (identity, params,
/// size); capture_seed drives the noise stream, the non-rigid jitter field
/// and clutter placement.
struct CaptureParams {
  Homography pose;             // canonical 320-frame -> capture frame
  double tps_jitter_px = 0.0;  // max displacement of the smooth non-rigid field
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;                // additive gaussian, intensity units
  Vec2 illumination_gradient{0.0, 0.0};    // multiplicative slope per px, per axis
  Background background = Background::Dark;
  std::uint64_t capture_seed = 0;

  /// Finite fields, bounded degradations, well-conditioned pose.
  void validate() const;
};

struct PoseAngles {
  double roll_deg = 0.0;   // in-plane rotation
  double pitch_deg = 0.0;  // out-of-plane tilt about the horizontal axis
  double yaw_deg = 0.0;    // out-of-plane tilt about the vertical axis
  double scale = 1.0;      // magnification at the palm plane
  double translate_x = 0.0;
  double translate_y = 0.0;
};

/// Camera-above-palm projection at a fixed standoff: the canonical frame
/// center maps to the capture frame center plus the translation. Zero
/// angles at scale 1 give a pure translation.
Homography make_pose(const PoseAngles& angles, int capture_size);

/// Sampling ranges for sample_capture_params. Angles and translation are
/// symmetric bounds; blur is drawn in [min, max] and noise in [0, max];
/// the jitter amplitude is taken as-is (field shape still varies per
/// capture) so ablation datasets keep a fixed deformation level.
struct CaptureRanges {
  double roll_deg = 18.0;
  double pitch_deg = 8.0;
  double yaw_deg = 8.0;
  double scale_min = 0.92;
  double scale_max = 1.10;
  double translate_px = 16.0;
  double tps_jitter_px = 2.5;
  double blur_sigma_min = 0.0;
  double blur_sigma_max = 0.8;
  double noise_sigma_max = 0.015;
  double illumination_max = 6e-4;
  Background background = Background::Dark;
};

CaptureParams sample_capture_params(Rng& rng, const CaptureRanges& ranges, int capture_size);

struct RenderResult {
  Image image;
  KeypointSet keypoints;   // ground truth, right-hand layout
  Homography pose;         // copy of the rigid part used
  TpsWarp jitter;          // capture-frame displacement field; identity when jitter is 0
  Vec2 roi_center_marker;  // capture point that lands on the ROI crop center
};

/// Renders one right-hand capture of `identity` into a size x size frame
/// (size >= 256). Ground-truth keypoints are the template landmarks pushed
/// through pose and jitter, so with zero jitter the pose is recoverable
/// exactly from them.
RenderResult render_palm(const PalmIdentity& identity, const CaptureParams& params, int size);

/// Same texture model on a fingerless silhouette. Landmark detection must
/// reject these frames, so no keypoints are produced.
Image render_closed_fist(const PalmIdentity& identity, const CaptureParams& params, int size);

struct DatasetOptions {
  int image_size = 416;
  CaptureRanges ranges;
  double left_hand_fraction = 0.5;
  int age_months_min = 6;
  int age_months_max = 48;
};

/// Writes images/, keypoints/ and manifest.json under out_dir and returns
/// the manifest. Subject ids are S0001.., capture ids S0001_C01... Hand
/// side and age are drawn once per subject; left-hand captures are stored
/// mirrored together with mirrored keypoints. Deterministic in every
/// argument.
Manifest generate_dataset(int n_subjects, int captures_per_subject, std::uint64_t seed,
                          const std::string& out_dir, const DatasetOptions& options = {});

}  // namespace palmpipe

#endif
