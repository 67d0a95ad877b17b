// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_KEYPOINTS_HPP
#define PALMPIPE_KEYPOINTS_HPP

#include <string>

#include "palmpipe/geometry.hpp"
#include "palmpipe/image.hpp"

namespace palmpipe {

enum class KeypointProviderKind { File = 0, Heuristic = 1 };

struct KeypointProviderConfig {
  KeypointProviderKind kind = KeypointProviderKind::File;
  double binarization_threshold = 0.25;  // heuristic only
  double min_hand_area = 0.05;           // fraction of the frame

  void validate() const;
};

struct KeypointRecord {
  std::string image_id;
  KeypointSet keypoints;
};

/// JSON schema: {"image_id": text, "hand_side": "left"|"right",
/// "points": [[x, y] * 9]} with points in convention order.
KeypointRecord load_keypoints(const std::string& path);
void save_keypoints(const KeypointSet& keypoints, const std::string& image_id,
                    const std::string& path);

/// Heuristic landmark detector for bright-hand-on-dark-background frames:
/// threshold segmentation, largest connected component, boundary trace,
/// fingertips as prominent maxima of the boundary distance-to-centroid
/// profile, valleys as minima between adjacent fingertips, wrist corners
/// and lateral extrema picked along hand-axis coordinates, palm center as
/// the mask centroid. Requires five extended, separated fingers.
KeypointSet detect_valleys(const Image& img, const KeypointProviderConfig& cfg);

}  // namespace palmpipe

#endif
