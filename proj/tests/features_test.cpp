// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "palmpipe/augment.hpp"
#include "palmpipe/enhance.hpp"
#include "palmpipe/features.hpp"
#include "palmpipe/geometry.hpp"
#include "palmpipe/synth.hpp"
#include "testutil.hpp"

using namespace palmpipe;

namespace {

Image test_roi(std::uint64_t seed) {
  const RenderResult rr = testutil::render_test_palm(seed);
  return enhance_baseline(extract_roi(rr.image, rr.keypoints, CanonicalTemplate::standard()), 31);
}

Image rotate90(const Image& img) {
  std::vector<double> px(img.pixels().size());
  const int w = img.width(), h = img.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      px[static_cast<std::size_t>(x) * h + (h - 1 - y)] = img.at(x, y);
    }
  }
  return Image::from_pixels(h, w, std::move(px));
}

Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (double& v : px) v = clamp01(v + rng.normal(0.0, sigma));
  return Image::from_pixels(img.width(), img.height(), std::move(px));
}

}  // namespace

TEST_CASE("quadrant split partitions the roi exactly") {
  const Image roi = test_roi(70);
  const PatchSet ps = split_quadrants(roi);
  CHECK(ps.whole.width() == 224);
  for (const Image& q : ps.quadrants) {
    CHECK(q.width() == 112);
    CHECK(q.height() == 112);
  }
  // Reassembly reproduces the whole bit-exactly; order is top-left,
  // top-right, bottom-left, bottom-right.
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) {
      const Image& q = ps.quadrants[(y / 112) * 2 + (x / 112)];
      CHECK(q.at(x % 112, y % 112) == roi.at(x, y));
    }
  }
  CHECK(testutil::thrown_code([] { split_quadrants(Image(200, 200, 0.1)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("descriptor embeddings are unit norm with declared dimensions") {
  const Image roi = test_roi(71);
  const Embedding whole = extract_descriptor(roi);
  whole.validate();
  CHECK(whole.dim() == 14 * 14 * 8);
  double norm = 0.0;
  for (const float v : whole.values) norm += static_cast<double>(v) * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));

  const Embedding quad = extract_descriptor(split_quadrants(roi).quadrants[0]);
  CHECK(quad.dim() == 7 * 7 * 8);

  CHECK(whole.extractor_id == descriptor_extractor_id(DescriptorConfig{}));
  DescriptorConfig other;
  other.block_size = 28;
  CHECK(descriptor_extractor_id(other) != whole.extractor_id);

  // Dimensions not divisible by the block size are rejected.
  CHECK(testutil::thrown_code([] { extract_descriptor(Image(100, 100, 0.3)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("zero-gradient images map to the uniform unit vector") {
  const Embedding flat = extract_descriptor(Image(224, 224, 0.5));
  flat.validate();
  const float expected = flat.values[0];
  CHECK(expected > 0.0f);
  for (const float v : flat.values) CHECK(v == doctest::Approx(expected));
}

TEST_CASE("similarity of matching and opposing embeddings") {
  const Image roi = test_roi(72);
  const Embedding z = extract_descriptor(roi);
  CHECK(similarity(z, z) == doctest::Approx(1.0));

  Embedding neg = z;
  for (float& v : neg.values) v = -v;
  CHECK(similarity(z, neg) == doctest::Approx(0.0));

  // Orthogonal unit vectors score 0.5 (cosine 0 remapped).
  Embedding a = z, b = z;
  std::fill(a.values.begin(), a.values.end(), 0.0f);
  std::fill(b.values.begin(), b.values.end(), 0.0f);
  a.values[0] = 1.0f;
  b.values[1] = 1.0f;
  CHECK(similarity(a, b) == doctest::Approx(0.5));

  // Symmetry is exact.
  const Embedding z2 = extract_descriptor(test_roi(73));
  CHECK(similarity(z, z2) == similarity(z2, z));
}

TEST_CASE("similarity rejects mismatched embeddings") {
  const Image roi = test_roi(74);
  const Embedding whole = extract_descriptor(roi);
  const Embedding quad = extract_descriptor(split_quadrants(roi).quadrants[0]);
  CHECK(testutil::thrown_code([&] { similarity(whole, quad); }) != ErrorCode::None);

  DescriptorConfig other;
  other.block_size = 32;
  const Embedding alt = extract_descriptor(roi, other);
  CHECK(testutil::thrown_code([&] { similarity(whole, alt); }) == ErrorCode::ExtractorMismatch);
}

TEST_CASE("rotation separates images more than mild noise") {
  const Image roi = test_roi(75);
  const Embedding z = extract_descriptor(roi);
  const double rotated = similarity(z, extract_descriptor(rotate90(roi)));
  const double noised =
      similarity(extract_descriptor(add_noise(roi, 0.02, 1)), extract_descriptor(add_noise(roi, 0.02, 2)));
  CHECK(rotated < 1.0);
  CHECK(rotated < noised);
}

TEST_CASE("descriptor is invariant to affine intensity changes") {
  const RenderResult rr = testutil::render_test_palm(76);
  const Image roi = extract_roi(rr.image, rr.keypoints, CanonicalTemplate::standard());
  std::vector<double> px(roi.pixels().begin(), roi.pixels().end());
  for (double& v : px) v = 0.6 * v + 0.2;
  const Image scaled = Image::from_pixels(roi.width(), roi.height(), std::move(px));
  CHECK(similarity(extract_descriptor(roi), extract_descriptor(scaled)) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("self-similarity degrades monotonically with blur") {
  for (int trial = 0; trial < 20; ++trial) {
    const Image roi = test_roi(800 + trial);
    const Embedding z = extract_descriptor(roi);
    double last = 2.0;
    for (const double sigma : {0.0, 1.0, 2.0, 4.0}) {
      const double s = similarity(z, extract_descriptor(gaussian_blur(roi, sigma)));
      CHECK(s <= last + 1e-12);
      last = s;
    }
  }
}

TEST_CASE("patch embedding assembly covers all five patches") {
  const Image roi = test_roi(77);
  const auto embs = embed_patches(roi);
  CHECK(embs[0].patch_id == PatchId::Whole);
  CHECK(embs[1].patch_id == PatchId::Q1);
  CHECK(embs[4].patch_id == PatchId::Q4);
  CHECK(embs[0].dim() == 1568);
  for (int i = 1; i < kNumPatches; ++i) CHECK(embs[i].dim() == 392);
  // Whole-patch embedding equals a direct extraction.
  const Embedding direct = extract_descriptor(roi);
  for (std::size_t i = 0; i < direct.values.size(); ++i) {
    CHECK(embs[0].values[i] == direct.values[i]);
  }
  CHECK(std::string(patch_id_name(PatchId::Q2)) == "q2");
  CHECK(patch_id_from_name("whole") == PatchId::Whole);
  CHECK(testutil::thrown_code([] { patch_id_from_name("q9"); }) != ErrorCode::None);
}

TEST_CASE("embedding files round trip bit-exactly") {
  const testutil::TempDir tmp("features_io");
  const Image roi = test_roi(78);
  const Embedding z = extract_descriptor(roi);

  const std::string path = tmp.str("whole.plme");
  save_embedding(z, path);
  const Embedding back = load_embedding(path);
  CHECK(back.extractor_id == z.extractor_id);
  CHECK(back.patch_id == z.patch_id);
  REQUIRE(back.dim() == z.dim());
  for (std::size_t i = 0; i < z.values.size(); ++i) {
    // Bit equality, not approximate equality.
    CHECK(back.values[i] == z.values[i]);
  }

  // Byte-level round trip through the in-memory codec.
  const std::vector<std::uint8_t> bytes = embedding_to_bytes(z);
  const Embedding from_bytes = embedding_from_bytes(bytes);
  CHECK(embedding_to_bytes(from_bytes) == bytes);

  // Wrong magic and truncation are parse errors.
  std::vector<std::uint8_t> corrupt = bytes;
  corrupt[0] = 'X';
  CHECK(testutil::thrown_code([&] { embedding_from_bytes(corrupt); }) == ErrorCode::ParseError);
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
  CHECK(testutil::thrown_code([&] { embedding_from_bytes(truncated); }) == ErrorCode::ParseError);
}
