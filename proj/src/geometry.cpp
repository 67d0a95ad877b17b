// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

#include "palmpipe/error.hpp"

namespace palmpipe {

const char* hand_side_name(HandSide side) {
  return side == HandSide::Left ? "left" : "right";
}

HandSide hand_side_from_name(const std::string& name) {
  if (name == "left") return HandSide::Left;
  if (name == "right") return HandSide::Right;
  raise(ErrorCode::SchemaViolation, "hand_side must be \"left\" or \"right\", got \"" + name + "\"");
}

KeypointSet::KeypointSet(const std::array<Vec2, kNumPoints>& points, HandSide side)
    : points_(points), side_(side) {}

void KeypointSet::validate(int image_width, int image_height) const {
  for (int i = 0; i < kNumPoints; ++i) {
    const Vec2& p = points_[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "keypoint %d is not finite", i);
      raise(ErrorCode::BadArgument, buf);
    }
  }
  if (image_width > 0 && image_height > 0) {
    const double mx = 0.1 * image_width;
    const double my = 0.1 * image_height;
    for (int i = 0; i < kNumPoints; ++i) {
      const Vec2& p = points_[i];
      if (p.x < -mx || p.x > image_width + mx || p.y < -my || p.y > image_height + my) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "keypoint %d (%.2f, %.2f) outside image margin", i, p.x,
                      p.y);
        raise(ErrorCode::OutOfBounds, buf);
      }
    }
  }
}

KeypointSet KeypointSet::mirrored_horizontal(int image_width) const {
  if (image_width <= 0) raise(ErrorCode::BadArgument, "image_width must be positive");
  std::array<Vec2, kNumPoints> out = points_;
  for (Vec2& p : out) p.x = (image_width - 1) - p.x;
  // Indices are anatomical (radial/ulnar), so mirroring flips coordinates
  // and the displayed side but never reorders points.
  return KeypointSet(out, side_ == HandSide::Left ? HandSide::Right : HandSide::Left);
}

Homography::Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography Homography::from_matrix(const std::array<double, 9>& row_major) {
  for (double v : row_major) {
    if (!std::isfinite(v)) raise(ErrorCode::BadArgument, "homography entries must be finite");
  }
  const double w = row_major[8];
  if (std::abs(w) <= 1e-12) {
    raise(ErrorCode::SingularHomography, "bottom-right entry is (near) zero");
  }
  Homography h;
  for (int i = 0; i < 9; ++i) h.m_[i] = row_major[i] / w;
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> m(h.m_.data());
  if (std::abs(m.determinant()) <= 1e-12) {
    raise(ErrorCode::SingularHomography, "determinant is (near) zero");
  }
  return h;
}

Vec2 Homography::apply(const Vec2& p) const {
  const double w = m_[6] * p.x + m_[7] * p.y + m_[8];
  if (std::abs(w) < 1e-15) raise(ErrorCode::SingularHomography, "point maps to infinity");
  return Vec2{(m_[0] * p.x + m_[1] * p.y + m_[2]) / w, (m_[3] * p.x + m_[4] * p.y + m_[5]) / w};
}

Homography Homography::inverse() const {
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> m(m_.data());
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> inv = m.inverse();
  std::array<double, 9> out;
  for (int i = 0; i < 9; ++i) out[i] = inv.data()[i];
  return from_matrix(out);
}

Homography Homography::compose_after(const Homography& first) const {
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> a(m_.data());
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> b(first.m_.data());
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> c = a * b;
  std::array<double, 9> out;
  for (int i = 0; i < 9; ++i) out[i] = c.data()[i];
  return from_matrix(out);
}

const CanonicalTemplate& CanonicalTemplate::standard() {
  // Right hand, fingers up, in the 320x320 frame. Valleys sit above the
  // crop window, wrist points below it, lateral extrema at its sides. The
  // palm center is the full-silhouette centroid of the reference hand, so
  // heuristic detection and these coordinates agree.
  static const CanonicalTemplate tmpl{{
      Vec2{125.0, 88.5},   // 0 index/middle valley
      Vec2{167.0, 84.5},   // 1 middle/ring valley
      Vec2{209.0, 88.5},   // 2 ring/little valley
      Vec2{69.0, 120.5},   // 3 thumb/index valley
      Vec2{119.0, 310.5},  // 4 wrist radial
      Vec2{215.0, 310.5},  // 5 wrist ulnar
      Vec2{63.0, 187.5},   // 6 lateral radial
      Vec2{271.0, 187.5},  // 7 lateral ulnar
      Vec2{160.0, 172.0},  // 8 palm center
  }};
  return tmpl;
}

namespace {

struct NormTransform {
  // x' = s * (x - cx), y' = s * (y - cy)
  double s = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

NormTransform normalizer(const std::array<Vec2, KeypointSet::kNumPoints>& pts) {
  NormTransform t;
  for (const Vec2& p : pts) {
    t.cx += p.x;
    t.cy += p.y;
  }
  t.cx /= KeypointSet::kNumPoints;
  t.cy /= KeypointSet::kNumPoints;
  double rms = 0.0;
  for (const Vec2& p : pts) {
    const double dx = p.x - t.cx;
    const double dy = p.y - t.cy;
    rms += dx * dx + dy * dy;
  }
  rms = std::sqrt(rms / KeypointSet::kNumPoints);
  t.s = rms > 1e-12 ? std::sqrt(2.0) / rms : 1.0;
  return t;
}

}  // namespace

Homography estimate_homography(const KeypointSet& keypoints, const CanonicalTemplate& tmpl) {
  keypoints.validate();
  constexpr int n = KeypointSet::kNumPoints;
  const auto& src = keypoints.points();
  const auto& dst = tmpl.destination_points;

  const NormTransform ts = normalizer(src);
  const NormTransform td = normalizer(dst);

  // Two DLT rows per correspondence; solve the homogeneous least-squares
  // problem through the normal equations (18x9 is small enough that the
  // squared conditioning is harmless after pre-normalization).
  Eigen::Matrix<double, 2 * n, 9> a;
  for (int i = 0; i < n; ++i) {
    const double x = ts.s * (src[i].x - ts.cx);
    const double y = ts.s * (src[i].y - ts.cy);
    const double u = td.s * (dst[i].x - td.cx);
    const double v = td.s * (dst[i].y - td.cy);
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y, -v;
  }

  const Eigen::Matrix<double, 9, 9> ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  if (eig.info() != Eigen::Success) {
    raise(ErrorCode::DegenerateConfiguration, "eigen decomposition failed");
  }
  const auto& evals = eig.eigenvalues();  // ascending
  const double lo = std::max(evals(0), 0.0);
  const double hi = std::max(evals(8), 1e-300);
  // evals(1) is the second-smallest eigenvalue of A^T A, i.e. the square of
  // the second-smallest singular value of A; a vanishing ratio means the
  // null space has dimension >= 2 and the solution is not unique.
  if (std::sqrt(std::max(evals(1), 0.0) / hi) < 1e-9) {
    raise(ErrorCode::DegenerateConfiguration, "correspondences do not determine a homography");
  }
  (void)lo;
  const Eigen::Matrix<double, 9, 1> hvec = eig.eigenvectors().col(0);

  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> hn(hvec.data());
  // Undo the normalization: H = Td^-1 * Hn * Ts.
  Eigen::Matrix3d tsm;
  tsm << ts.s, 0, -ts.s * ts.cx, 0, ts.s, -ts.s * ts.cy, 0, 0, 1;
  Eigen::Matrix3d tdinv;
  tdinv << 1.0 / td.s, 0, td.cx, 0, 1.0 / td.s, td.cy, 0, 0, 1;
  const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> h = tdinv * hn * tsm;

  std::array<double, 9> out;
  for (int i = 0; i < 9; ++i) out[i] = h.data()[i];
  if (std::abs(out[8]) <= 1e-12) {
    raise(ErrorCode::DegenerateConfiguration, "estimated homography is not affine-normalizable");
  }
  return Homography::from_matrix(out);
}

Image warp_image(const Image& img, const Homography& h, int out_size) {
  if (out_size <= 0) raise(ErrorCode::BadSize, "output size must be positive");
  const Homography inv = h.inverse();
  Image out(out_size, out_size);
  const auto& m = inv.matrix();
  for (int y = 0; y < out_size; ++y) {
    for (int x = 0; x < out_size; ++x) {
      const double w = m[6] * x + m[7] * y + m[8];
      if (std::abs(w) < 1e-15) continue;
      const double sx = (m[0] * x + m[1] * y + m[2]) / w;
      const double sy = (m[3] * x + m[4] * y + m[5]) / w;
      out.set(x, y, bilinear_sample_or_zero(img, sx, sy));
    }
  }
  return out;
}

Image extract_roi(const Image& img, const KeypointSet& keypoints, const CanonicalTemplate& tmpl) {
  const Homography h = estimate_homography(keypoints, tmpl);
  const Image frame = warp_image(img, h, CanonicalTemplate::kFrameSize);
  Image roi(CanonicalTemplate::kCropSize, CanonicalTemplate::kCropSize);
  for (int y = 0; y < CanonicalTemplate::kCropSize; ++y) {
    for (int x = 0; x < CanonicalTemplate::kCropSize; ++x) {
      roi.set(x, y, frame.at(x + CanonicalTemplate::kCropX, y + CanonicalTemplate::kCropY));
    }
  }
  return roi;
}

std::array<Vec2, 4> project_roi_polygon(const Homography& h, const CanonicalTemplate& tmpl) {
  (void)tmpl;
  const Homography inv = h.inverse();
  const double x0 = CanonicalTemplate::kCropX;
  const double y0 = CanonicalTemplate::kCropY;
  const double x1 = x0 + CanonicalTemplate::kCropSize - 1;
  const double y1 = y0 + CanonicalTemplate::kCropSize - 1;
  return {inv.apply(Vec2{x0, y0}), inv.apply(Vec2{x1, y0}), inv.apply(Vec2{x1, y1}),
          inv.apply(Vec2{x0, y1})};
}

}  // namespace palmpipe
