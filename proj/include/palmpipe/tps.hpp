// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_TPS_HPP
#define PALMPIPE_TPS_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "palmpipe/geometry.hpp"
#include "palmpipe/image.hpp"

namespace palmpipe {

/// Thin-plate-spline map f(p) = A·(1,x,y) + Σ w_i U(|p - s_i|) per output
/// coordinate, with kernel U(r) = r² log r. Side conditions Σw = 0,
/// Σw·x = 0, Σw·y = 0 hold for any fitted instance.
struct TpsWarp {
  std::vector<Vec2> source_points;
  std::vector<Vec2> weights;           // (w_x, w_y) per source point
  std::array<double, 3> affine_x{0, 1, 0};  // x' = a0 + a1 x + a2 y
  std::array<double, 3> affine_y{0, 0, 1};
  double lambda = 0.0;

  static TpsWarp identity();
  /// Checks structural consistency and the side conditions (within 1e-8).
  void validate() const;
};

struct Correspondence {
  Vec2 source;
  Vec2 target;
  double confidence = 1.0;  // in [0, 1]
};

using Correspondences = std::vector<Correspondence>;

struct RealignParams {
  int grid_n = 8;
  int radius = 10;
  // Block-matching targets carry ~1 px of localization noise on ridge
  // texture (the peak is broad along the ridge direction). Kernel entries
  // at this node spacing are ~3e4, so lambda must sit in the hundreds to
  // smooth that noise instead of interpolating it.
  double lambda = 1000.0;
  double min_confidence = 0.5;
  int min_nodes = 8;  // fewer surviving nodes → pass probe through unchanged
  // Extra passes re-match the once-aligned probe at a small radius and
  // recover a few percent more residual displacement, but they tighten
  // false alignments on impostor pairs just as well and cost verification
  // accuracy, so the default stays single-pass.
  int passes = 1;
};

/// Fits the regularized TPS system on correspondences with confidence
/// ≥ 0.5. λ = 0 interpolates the retained pairs exactly; λ > 0 trades
/// fidelity for smoothness (diagonal regularization of the kernel block).
TpsWarp fit_tps(const Correspondences& corr, double lambda);

Vec2 evaluate_tps(const TpsWarp& warp, const Vec2& p);

/// Inverse-mapping resample: the inverse field is approximated by refitting
/// a TPS on the swapped (warped source → source) pairs. Out-of-source
/// samples are 0. Output dimensions equal input.
Image apply_tps(const Image& img, const TpsWarp& warp);

/// Block matching on a grid_n×grid_n interior grid: the 21×21 patch around
/// each node in probe is searched in reference within ±radius px (integer
/// sweep, zero-mean normalized cross-correlation) and the peak is refined
/// to sub-pixel precision by a separable parabolic fit. Confidence is the
/// NCC peak remapped to [0,1]; zero-variance probe patches get confidence
/// 0. Results are ordered by node index (row-major).
Correspondences find_correspondences(const Image& probe, const Image& reference, int grid_n,
                                     int radius);

/// wᵀKw summed over both coordinates; 0 iff the field is affine.
double bending_energy(const TpsWarp& warp);

/// Correspondence search plus robust fit for realign: nodes whose residual
/// against a first fit exceeds max(3 x median residual, 1 px) are dropped
/// (border patches that overlap resampling fill match confidently but
/// wrongly) and the field is refitted. Returns nothing when fewer than
/// min_nodes correspondences pass the confidence threshold.
std::optional<TpsWarp> realign_fit(const Image& probe, const Image& reference,
                                   const RealignParams& params);

/// Full re-alignment of probe toward reference: realign_fit + apply_tps.
/// When the fit is declined the probe is returned unchanged.
Image realign(const Image& probe, const Image& reference, const RealignParams& params);

std::string tps_warp_to_json(const TpsWarp& warp);
TpsWarp tps_warp_from_json(const std::string& text);

}  // namespace palmpipe

#endif
