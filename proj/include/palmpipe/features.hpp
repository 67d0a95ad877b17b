// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_FEATURES_HPP
#define PALMPIPE_FEATURES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "palmpipe/image.hpp"

namespace palmpipe {

enum class PatchId : std::uint8_t { Whole = 0, Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };

constexpr int kNumPatches = 5;

const char* patch_id_name(PatchId id);
PatchId patch_id_from_name(const std::string& name);

/// Unit-norm feature vector tagged with the extractor that produced it and
/// the patch it describes.
struct Embedding {
  std::string extractor_id;
  PatchId patch_id = PatchId::Whole;
  std::vector<float> values;

  std::uint32_t dim() const noexcept { return static_cast<std::uint32_t>(values.size()); }
  /// Checks unit L2 norm (within 1e-6) and finiteness.
  void validate() const;
};

/// A 224x224 ROI with its exact half-size partition. Quadrant order is
/// top-left, top-right, bottom-left, bottom-right.
struct PatchSet {
  Image whole;
  std::array<Image, 4> quadrants;
};

struct DescriptorConfig {
  int block_size = 16;
  int orientation_bins = 8;
};

/// "bho" = block histogram of orientations; the id carries the block size
/// so stored embeddings from different configurations never mix silently.
std::string descriptor_extractor_id(const DescriptorConfig& cfg);

PatchSet split_quadrants(const Image& roi);

/// Per-block histogram of gradient orientations (mod 180°, magnitude
/// weighted, soft linear binning), blocks concatenated row-major, global
/// L2 normalization. A zero-gradient image maps to the uniform unit vector
/// so every output is valid for cosine scoring.
Embedding extract_descriptor(const Image& img, const DescriptorConfig& cfg = {});

/// s = (1 + <Zp, Zg>) / 2; cosine of unit vectors remapped into [0, 1].
double similarity(const Embedding& zp, const Embedding& zg);

/// All five patch embeddings of an ROI (whole plus 4 quadrants), in
/// PatchId order.
std::array<Embedding, kNumPatches> embed_patches(const Image& roi,
                                                 const DescriptorConfig& cfg = {});

/// Binary embedding container, little-endian: magic "PLME", version u16,
/// extractor-id (u16 length + bytes), patch id u8, dim u32, dim float32
/// values. Round trips bit-exactly.
void save_embedding(const Embedding& e, const std::string& path);
Embedding load_embedding(const std::string& path);

std::vector<std::uint8_t> embedding_to_bytes(const Embedding& e);
Embedding embedding_from_bytes(const std::vector<std::uint8_t>& bytes);

}  // namespace palmpipe

#endif
