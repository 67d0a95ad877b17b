// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/features.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

#include "palmpipe/binio.hpp"
#include "palmpipe/error.hpp"

namespace palmpipe {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'M', 'E'};
constexpr std::uint16_t kFormatVersion = 1;

}  // namespace

const char* patch_id_name(PatchId id) {
  switch (id) {
    case PatchId::Whole: return "whole";
    case PatchId::Q1: return "q1";
    case PatchId::Q2: return "q2";
    case PatchId::Q3: return "q3";
    case PatchId::Q4: return "q4";
  }
  raise(ErrorCode::BadArgument, "invalid patch id");
}

PatchId patch_id_from_name(const std::string& name) {
  if (name == "whole") return PatchId::Whole;
  if (name == "q1") return PatchId::Q1;
  if (name == "q2") return PatchId::Q2;
  if (name == "q3") return PatchId::Q3;
  if (name == "q4") return PatchId::Q4;
  raise(ErrorCode::SchemaViolation, "unknown patch id \"" + name + "\"");
}

void Embedding::validate() const {
  if (values.empty()) raise(ErrorCode::BadArgument, "embedding has no values");
  double norm2 = 0.0;
  for (float v : values) {
    if (!std::isfinite(v)) raise(ErrorCode::BadArgument, "embedding values must be finite");
    norm2 += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(norm2);
  if (std::abs(norm - 1.0) > 1e-6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "embedding norm %.9f is not 1", norm);
    raise(ErrorCode::BadArgument, buf);
  }
}

std::string descriptor_extractor_id(const DescriptorConfig& cfg) {
  char buf[32];
  if (cfg.orientation_bins == 8) {
    std::snprintf(buf, sizeof(buf), "bho%d", cfg.block_size);
  } else {
    std::snprintf(buf, sizeof(buf), "bho%d-%d", cfg.block_size, cfg.orientation_bins);
  }
  return buf;
}

PatchSet split_quadrants(const Image& roi) {
  if (roi.width() != 224 || roi.height() != 224) {
    raise(ErrorCode::DimensionMismatch, "quadrant split expects a 224x224 ROI");
  }
  const int half = roi.width() / 2;
  PatchSet set{Image(roi.width(), roi.height()), {Image(half, half), Image(half, half),
                                                  Image(half, half), Image(half, half)}};
  set.whole = roi;
  const int ox[4] = {0, half, 0, half};
  const int oy[4] = {0, 0, half, half};
  for (int q = 0; q < 4; ++q) {
    for (int y = 0; y < half; ++y) {
      for (int x = 0; x < half; ++x) {
        set.quadrants[q].set(x, y, roi.at(ox[q] + x, oy[q] + y));
      }
    }
  }
  return set;
}

Embedding extract_descriptor(const Image& img, const DescriptorConfig& cfg) {
  if (cfg.block_size <= 0 || cfg.orientation_bins <= 0) {
    raise(ErrorCode::BadArgument, "block size and orientation bins must be positive");
  }
  if (img.width() % cfg.block_size != 0 || img.height() % cfg.block_size != 0) {
    raise(ErrorCode::DimensionMismatch, "image dimensions must be divisible by the block size");
  }
  const int bx = img.width() / cfg.block_size;
  const int by = img.height() / cfg.block_size;
  const int bins = cfg.orientation_bins;
  std::vector<double> hist(static_cast<std::size_t>(bx) * by * bins, 0.0);

  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, img.width() - 1);
    y = std::clamp(y, 0, img.height() - 1);
    return img.at(x, y);
  };

  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double gx = 0.5 * (px(x + 1, y) - px(x - 1, y));
      const double gy = 0.5 * (px(x, y + 1) - px(x, y - 1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag < 1e-12) continue;
      // Orientation folded to [0, pi); soft linear split between the two
      // nearest bins keeps the descriptor continuous in the gradient.
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += std::numbers::pi;
      if (theta >= std::numbers::pi) theta -= std::numbers::pi;
      const double pos = theta / std::numbers::pi * bins;
      int b0 = static_cast<int>(pos);
      if (b0 >= bins) b0 = bins - 1;
      const double frac = pos - b0;
      const int b1 = (b0 + 1) % bins;
      const std::size_t base =
          (static_cast<std::size_t>(y / cfg.block_size) * bx + x / cfg.block_size) * bins;
      hist[base + b0] += mag * (1.0 - frac);
      hist[base + b1] += mag * frac;
    }
  }

  double norm2 = 0.0;
  for (double v : hist) norm2 += v * v;
  Embedding e;
  e.extractor_id = descriptor_extractor_id(cfg);
  e.values.resize(hist.size());
  if (norm2 < 1e-24) {
    // Featureless input: fall back to the uniform unit vector so scoring
    // still has a valid operand.
    const float u = static_cast<float>(1.0 / std::sqrt(static_cast<double>(hist.size())));
    for (float& v : e.values) v = u;
  } else {
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < hist.size(); ++i) {
      e.values[i] = static_cast<float>(hist[i] * inv);
    }
  }
  return e;
}

double similarity(const Embedding& zp, const Embedding& zg) {
  if (zp.values.size() != zg.values.size()) {
    raise(ErrorCode::DimensionMismatch, "embedding dimensions differ");
  }
  if (zp.extractor_id != zg.extractor_id) {
    raise(ErrorCode::ExtractorMismatch,
          "extractor \"" + zp.extractor_id + "\" vs \"" + zg.extractor_id + "\"");
  }
  if (zp.patch_id != zg.patch_id) {
    raise(ErrorCode::ExtractorMismatch, "patch ids differ");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < zp.values.size(); ++i) {
    dot += static_cast<double>(zp.values[i]) * zg.values[i];
  }
  return std::clamp((1.0 + dot) / 2.0, 0.0, 1.0);
}

std::array<Embedding, kNumPatches> embed_patches(const Image& roi, const DescriptorConfig& cfg) {
  const PatchSet set = split_quadrants(roi);
  std::array<Embedding, kNumPatches> out;
  out[0] = extract_descriptor(set.whole, cfg);
  out[0].patch_id = PatchId::Whole;
  for (int q = 0; q < 4; ++q) {
    out[q + 1] = extract_descriptor(set.quadrants[q], cfg);
    out[q + 1].patch_id = static_cast<PatchId>(q + 1);
  }
  return out;
}

std::vector<std::uint8_t> embedding_to_bytes(const Embedding& e) {
  e.validate();
  if (e.extractor_id.size() > 0xffff) {
    raise(ErrorCode::BadArgument, "extractor id too long");
  }
  std::vector<std::uint8_t> out;
  out.reserve(13 + e.extractor_id.size() + 4 * e.values.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kFormatVersion);
  put_u16(out, static_cast<std::uint16_t>(e.extractor_id.size()));
  out.insert(out.end(), e.extractor_id.begin(), e.extractor_id.end());
  out.push_back(static_cast<std::uint8_t>(e.patch_id));
  put_u32(out, e.dim());
  for (float v : e.values) put_f32(out, v);
  return out;
}

Embedding embedding_from_bytes(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  const std::string magic = r.text(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    raise(ErrorCode::ParseError, "not an embedding file (bad magic)");
  }
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "unsupported embedding version %u", version);
    raise(ErrorCode::ParseError, buf);
  }
  Embedding e;
  e.extractor_id = r.text(r.u16());
  const std::uint8_t patch = r.u8();
  if (patch > 4) raise(ErrorCode::ParseError, "invalid patch id byte");
  e.patch_id = static_cast<PatchId>(patch);
  const std::uint32_t dim = r.u32();
  if (dim == 0 || dim > (1u << 24)) raise(ErrorCode::ParseError, "implausible embedding dim");
  e.values.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) e.values[i] = r.f32();
  if (!r.exhausted()) raise(ErrorCode::ParseError, "trailing bytes after embedding payload");
  e.validate();
  return e;
}

void save_embedding(const Embedding& e, const std::string& path) {
  write_binary_file(path, embedding_to_bytes(e));
}

Embedding load_embedding(const std::string& path) {
  return embedding_from_bytes(read_binary_file(path));
}

}  // namespace palmpipe
