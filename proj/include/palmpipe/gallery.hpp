// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_GALLERY_HPP
#define PALMPIPE_GALLERY_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "palmpipe/features.hpp"
#include "palmpipe/geometry.hpp"

namespace palmpipe {

struct GalleryEntry {
  std::string subject_id;
  std::string capture_id;
  HandSide hand_side = HandSide::Right;
  std::optional<int> age_months;  // [6, 48] when present
  std::array<Embedding, kNumPatches> embeddings;  // whole, q1..q4
  std::int64_t enrolled_at = 0;  // unix seconds; 0 = unset

  /// Shared extractor id, patch ids exactly (whole, q1..q4), unit norms,
  /// age range.
  void validate() const;
};

struct VerifyResult {
  bool match = false;
  double score = 0.0;
};

struct RankedMatch {
  std::string subject_id;
  double score = 0.0;
};

/// In-memory enrollment store. The first enrollment pins the extractor id;
/// later entries must match it. Scoring fuses the 5 per-patch cosine
/// scores by arithmetic mean and aggregates per subject by the maximum
/// over that subject's captures.
class Gallery {
 public:
  Gallery() = default;
  explicit Gallery(std::string extractor_id) : extractor_id_(std::move(extractor_id)) {}

  const std::string& extractor_id() const noexcept { return extractor_id_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<GalleryEntry>& entries() const noexcept { return entries_; }

  void enroll(GalleryEntry entry);

  /// Best fused score against the subject's enrolled captures;
  /// match when score ≥ threshold (ties match).
  VerifyResult verify(const std::string& subject_id,
                      const std::array<Embedding, kNumPatches>& probe, double threshold) const;

  /// Per-subject best fused score, descending, ties broken by subject_id;
  /// at most n rows.
  std::vector<RankedMatch> identify_topn(const std::array<Embedding, kNumPatches>& probe,
                                         int n) const;

 private:
  std::string extractor_id_;  // empty until the first enrollment
  std::vector<GalleryEntry> entries_;
  std::unordered_set<std::string> capture_ids_;
};

/// Binary store, little-endian: magic "PLMG", version u16, extractor-id
/// (u16 length + bytes), then one length-prefixed record per entry. A JSON
/// index sidecar (path + ".index.json") lists the entries for scripting.
/// Round trips bit-exactly.
void save_gallery(const Gallery& gallery, const std::string& path);
Gallery load_gallery(const std::string& path);

double fused_score(const std::array<Embedding, kNumPatches>& probe,
                   const std::array<Embedding, kNumPatches>& gallery);

}  // namespace palmpipe

#endif
