// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_ENHANCE_HPP
#define PALMPIPE_ENHANCE_HPP

#include "palmpipe/image.hpp"

namespace palmpipe {

/// Deterministic local contrast normalization: (v - mean) / (stddev + eps)
/// over a centered window (clipped at borders), remapped into [0,1] with a
/// fixed affine map. Zero-variance windows produce 0.5. Window must be odd
/// and within [3, min(width, height)].
Image enhance_baseline(const Image& img, int window = 31);

/// Mean of the per-tile intensity standard deviations over a fixed 16-px
/// tiling. 0 iff the image is constant on every tile.
double ridge_contrast(const Image& img);

}  // namespace palmpipe

#endif
