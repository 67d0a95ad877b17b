// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_AUGMENT_HPP
#define PALMPIPE_AUGMENT_HPP

#include <cstdint>

#include "palmpipe/image.hpp"

namespace palmpipe {

/// Training-style perturbation parameters. Each enabled component fires
/// independently with apply_probability, driven by the seed.
struct AugmentationSpec {
  double rotation_degrees = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  double scale = 1.0;               // > 0
  double blur_sigma = 0.0;          // >= 0, pixels
  int downsample_factor = 1;        // >= 1
  double perspective_jitter = 0.0;  // >= 0, corner displacement bound in px
  double apply_probability = 1.0;   // in [0,1]

  void validate() const;
};

/// Applies the spec in the fixed order scale, rotation, translation,
/// perspective, blur, downsample/upsample. Output keeps the input
/// dimensions; vacated regions are filled with 0. Deterministic in
/// (img, spec, seed).
Image apply_augmentation(const Image& img, const AugmentationSpec& spec, uint64_t seed);

/// Gaussian blur with kernel radius ceil(3*sigma), replicate borders.
/// sigma == 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

/// Box-average downsample by an integer factor, then bilinear resample back
/// to the original dimensions (used as a quality degradation).
Image downsample_degrade(const Image& img, int factor);

}  // namespace palmpipe

#endif
