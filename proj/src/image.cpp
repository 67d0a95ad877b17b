// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/image.hpp"

#include <cmath>

namespace palmpipe {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::None: return "None";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::BadSize: return "BadSize";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::CollinearPoints: return "CollinearPoints";
    case ErrorCode::DuplicateSourcePoints: return "DuplicateSourcePoints";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ExtractorMismatch: return "ExtractorMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::SegmentationFailed: return "SegmentationFailed";
    case ErrorCode::ValleysNotFound: return "ValleysNotFound";
    case ErrorCode::WrongArity: return "WrongArity";
    case ErrorCode::OutOfRangeScore: return "OutOfRangeScore";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::DuplicateCapture: return "DuplicateCapture";
    case ErrorCode::UnknownSubject: return "UnknownSubject";
    case ErrorCode::EmptyGallery: return "EmptyGallery";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Image::Image(int width, int height, double fill) {
  if (width < 1 || height < 1) {
    raise(ErrorCode::BadArgument, "image dimensions must be at least 1x1");
  }
  width_ = width;
  height_ = height;
  pixels_.assign(static_cast<size_t>(width) * height, fill);
}

Image Image::from_pixels(int width, int height, std::vector<double> pixels) {
  if (width < 1 || height < 1) {
    raise(ErrorCode::BadArgument, "image dimensions must be at least 1x1");
  }
  if (pixels.size() != static_cast<size_t>(width) * height) {
    raise(ErrorCode::BadArgument, "pixel buffer length does not match dimensions");
  }
  for (double v : pixels) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      raise(ErrorCode::BadArgument, "intensity outside [0,1]");
    }
  }
  Image img;
  img.width_ = width;
  img.height_ = height;
  img.pixels_ = std::move(pixels);
  return img;
}

Image Image::mirrored_horizontal() const {
  Image out(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      out.set(x, y, at(width_ - 1 - x, y));
    }
  }
  return out;
}

namespace {

// Interpolation weights within 1e-9 of a grid line are snapped so that
// sampling at (numerically) integer coordinates reproduces pixels exactly.
double snap_fraction(double f) {
  if (f < 1e-9) return 0.0;
  if (f > 1.0 - 1e-9) return 1.0;
  return f;
}

double bilinear_unchecked(const Image& img, double x, double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 >= img.width() - 1) x0 = img.width() - 2;
  if (y0 >= img.height() - 1) y0 = img.height() - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = snap_fraction(x - x0);
  const double fy = snap_fraction(y - y0);
  const int x1 = (img.width() == 1) ? x0 : x0 + 1;
  const int y1 = (img.height() == 1) ? y0 : y0 + 1;
  const double v00 = img.at(x0, y0);
  const double v10 = img.at(x1, y0);
  const double v01 = img.at(x0, y1);
  const double v11 = img.at(x1, y1);
  const double top = v00 + fx * (v10 - v00);
  const double bot = v01 + fx * (v11 - v01);
  return top + fy * (bot - top);
}

}  // namespace

double bilinear_sample(const Image& img, double x, double y) {
  if (img.empty()) {
    raise(ErrorCode::BadArgument, "empty image");
  }
  if (!(x >= 0.0) || !(y >= 0.0) || x > img.width() - 1 || y > img.height() - 1) {
    raise(ErrorCode::OutOfBounds, "sample coordinates outside image rectangle");
  }
  return bilinear_unchecked(img, x, y);
}

double bilinear_sample_or_zero(const Image& img, double x, double y) {
  if (img.empty()) return 0.0;
  if (!(x >= 0.0) || !(y >= 0.0) || x > img.width() - 1 || y > img.height() - 1) {
    return 0.0;
  }
  return bilinear_unchecked(img, x, y);
}

}  // namespace palmpipe
