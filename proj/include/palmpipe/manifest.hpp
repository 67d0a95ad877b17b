// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_MANIFEST_HPP
#define PALMPIPE_MANIFEST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "palmpipe/geometry.hpp"

namespace palmpipe {

struct ManifestEntry {
  std::string subject_id;
  std::string capture_id;  // unique across the dataset
  HandSide hand_side = HandSide::Right;
  std::string image_path;      // relative to the manifest's directory
  std::string keypoints_path;  // relative to the manifest's directory
  int age_months = 0;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  /// Unique capture ids, non-empty subject ids, age in [0, 1200].
  void validate() const;
};

/// JSON, one record per capture:
/// {"seed": u64, "captures": [{"subject_id", "capture_id", "hand_side",
///  "image", "keypoints", "age_months"}, ...]}
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

}  // namespace palmpipe

#endif
