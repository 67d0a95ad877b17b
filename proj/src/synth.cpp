// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "palmpipe/augment.hpp"
#include "palmpipe/image_io.hpp"
#include "palmpipe/keypoints.hpp"

namespace palmpipe {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kCanvas = CanonicalTemplate::kFrameSize;  // canonical raster size
constexpr double kStandoff = 800.0;                     // px, camera distance to palm plane

// Seed stream tags. Arbitrary distinct constants; changing any of them
// changes every rendered dataset.
constexpr std::uint64_t kStreamIdentity = 0x69645f706172616dULL;
constexpr std::uint64_t kStreamCrease = 0x637265617365ULL;
constexpr std::uint64_t kStreamJitter = 0x6a69747465724aULL;
constexpr std::uint64_t kStreamNoise = 0x6e6f697365ULL;
constexpr std::uint64_t kStreamClutter = 0x636c7574746572ULL;
constexpr std::uint64_t kStreamMottleA = 0x6d6f74746c6531ULL;
constexpr std::uint64_t kStreamMottleB = 0x6d6f74746c6532ULL;
constexpr std::uint64_t kStreamMeta = 0x646174616d657461ULL;
constexpr std::uint64_t kStreamSubject = 0x7375626aULL;
constexpr std::uint64_t kStreamCapture = 0x63617074ULL;

// ---------------------------------------------------------------------------
// Deterministic value noise.

double hash01(std::uint64_t seed, std::int64_t gx, std::int64_t gy) {
  const std::uint64_t h =
      mix_seed(mix_seed(seed, static_cast<std::uint64_t>(gx) + 0x9e37ULL),
               static_cast<std::uint64_t>(gy) + 0x79b9ULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Bilinear value noise with smoothstep fade, range [0,1).
double smooth_noise(std::uint64_t seed, double x, double y, double cell) {
  const double u = x / cell;
  const double v = y / cell;
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const auto gx = static_cast<std::int64_t>(fu);
  const auto gy = static_cast<std::int64_t>(fv);
  const double ax = u - fu;
  const double ay = v - fv;
  const double sx = ax * ax * (3.0 - 2.0 * ax);
  const double sy = ay * ay * (3.0 - 2.0 * ay);
  const double n00 = hash01(seed, gx, gy);
  const double n10 = hash01(seed, gx + 1, gy);
  const double n01 = hash01(seed, gx, gy + 1);
  const double n11 = hash01(seed, gx + 1, gy + 1);
  const double top = n00 + (n10 - n00) * sx;
  const double bot = n01 + (n11 - n01) * sx;
  return top + (bot - top) * sy;
}

// ---------------------------------------------------------------------------
// Silhouette.

// Reference right-hand outline in the canonical 320x320 frame, clockwise
// from the thumb/index valley. The nine template landmarks are exact
// vertices (or, for the palm center, the silhouette centroid), so a render
// under pose H has ground truth exactly H(template). Edited together with
// CanonicalTemplate::standard().
struct OutlineVertex {
  Vec2 p;
  bool landmark;
};

const std::array<OutlineVertex, 21>& base_outline() {
  static const std::array<OutlineVertex, 21> verts{{
      {{69.0, 120.5}, true},   // 0  thumb/index valley      = landmark 3
      {{81.0, 48.5}, false},   // 1  index tip, radial corner
      {{105.0, 42.5}, false},  // 2  index tip, ulnar corner
      {{125.0, 88.5}, true},   // 3  index/middle valley     = landmark 0
      {{135.0, 30.5}, false},  // 4  middle tip, radial corner
      {{161.0, 26.5}, false},  // 5  middle tip, ulnar corner
      {{167.0, 84.5}, true},   // 6  middle/ring valley      = landmark 1
      {{179.0, 40.5}, false},  // 7  ring tip, radial corner
      {{203.0, 44.5}, false},  // 8  ring tip, ulnar corner
      {{209.0, 88.5}, true},   // 9  ring/little valley      = landmark 2
      {{223.0, 58.5}, false},  // 10 little tip, radial corner
      {{245.0, 64.5}, false},  // 11 little tip, ulnar corner
      {{247.0, 118.5}, false},  // 12 little-finger base bulge
      {{257.0, 164.5}, false},  // 13 ulnar edge bulge
      {{271.0, 187.5}, true},   // 14 lateral extremum, ulnar = landmark 7
      {{215.0, 310.5}, true},   // 15 wrist corner, ulnar     = landmark 5
      {{119.0, 310.5}, true},   // 16 wrist corner, radial    = landmark 4
      {{63.0, 187.5}, true},    // 17 lateral extremum, radial = landmark 6
      {{67.0, 151.5}, false},   // 18 thumb base, lower
      {{33.0, 123.5}, false},   // 19 thumb tip
      {{63.0, 103.5}, false},   // 20 thumb base, upper
  }};
  return verts;
}

Vec2 add(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
Vec2 sub(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
Vec2 mul(const Vec2& a, double s) { return {a.x * s, a.y * s}; }

Vec2 normalized(const Vec2& v) {
  const double n = std::hypot(v.x, v.y);
  return n > 0 ? Vec2{v.x / n, v.y / n} : Vec2{0.0, 0.0};
}

std::vector<Vec2> build_outline(const OutlineParams& params) {
  params.validate();
  const auto& base = base_outline();
  std::vector<Vec2> poly(base.size());
  for (size_t i = 0; i < base.size(); ++i) poly[i] = base[i].p;

  // Fingertip corner pairs and their valley anchors (midpoint of the two
  // neighbouring valleys, or valley + base bulge for the little finger).
  struct Finger {
    int tip_a, tip_b;
    int root_a, root_b;
  };
  static constexpr Finger fingers[4] = {
      {1, 2, 0, 3},     // index
      {4, 5, 3, 6},     // middle
      {7, 8, 6, 9},     // ring
      {10, 11, 9, 12},  // little
  };
  for (int f = 0; f < 4; ++f) {
    const Finger& fg = fingers[f];
    const Vec2 root = mul(add(base[fg.root_a].p, base[fg.root_b].p), 0.5);
    const Vec2 tip = mul(add(base[fg.tip_a].p, base[fg.tip_b].p), 0.5);
    const Vec2 axis = normalized(sub(tip, root));
    const Vec2 perp{-axis.y, axis.x};
    const Vec2 along = mul(axis, params.finger_length_delta[f]);
    const Vec2 widen = mul(perp, params.finger_width_delta[f]);
    poly[fg.tip_a] = add(add(poly[fg.tip_a], along), mul(widen, -1.0));
    poly[fg.tip_b] = add(add(poly[fg.tip_b], along), widen);
  }

  const Vec2 thumb_root = mul(add(base[18].p, base[20].p), 0.5);
  const Vec2 thumb_axis = normalized(sub(base[19].p, thumb_root));
  poly[19] = add(poly[19], mul(thumb_axis, params.thumb_length_delta));

  poly[12].x += params.ulnar_width_delta;
  poly[13].x += params.ulnar_width_delta;
  return poly;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    s += p.x * q.y - q.x * p.y;
  }
  return std::fabs(s) * 0.5;
}

/// Fingerless fist silhouette: an ellipse with shallow knuckle scallops
/// (below the detector's prominence gate) and one thumb-side bulge.
std::vector<Vec2> fist_outline() {
  std::vector<Vec2> poly;
  const Vec2 center{160.0, 190.0};
  const double rx = 100.0;
  const double ry = 118.0;
  const int n = 72;
  poly.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double phi = 2.0 * kPi * k / n;
    double factor = 1.0;
    if (std::sin(phi) < -0.3) factor += 0.025 * std::cos(4.0 * phi);
    const double dphi = std::atan2(std::sin(phi - kPi), std::cos(phi - kPi));
    factor += 0.10 * std::exp(-(dphi * dphi) / (0.35 * 0.35));
    poly.push_back({center.x + rx * std::cos(phi) * factor, center.y + ry * std::sin(phi) * factor});
  }
  return poly;
}

/// Even-odd scanline fill at 3x supersampling, box-filtered down to a
/// per-pixel coverage fraction.
Image rasterize_coverage(const std::vector<Vec2>& poly, int size) {
  constexpr int kSS = 3;
  const int n = size * kSS;
  std::vector<std::uint8_t> hits(static_cast<size_t>(n) * n, 0);
  std::vector<double> xs;
  for (int row = 0; row < n; ++row) {
    const double y = (row + 0.5) / kSS;
    xs.clear();
    for (size_t i = 0; i < poly.size(); ++i) {
      const Vec2& p = poly[i];
      const Vec2& q = poly[(i + 1) % poly.size()];
      if ((p.y <= y && q.y > y) || (q.y <= y && p.y > y)) {
        xs.push_back(p.x + (y - p.y) / (q.y - p.y) * (q.x - p.x));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (size_t k = 0; k + 1 < xs.size(); k += 2) {
      int c0 = static_cast<int>(std::ceil(xs[k] * kSS - 0.5));
      int c1 = static_cast<int>(std::ceil(xs[k + 1] * kSS - 0.5)) - 1;
      c0 = std::max(c0, 0);
      c1 = std::min(c1, n - 1);
      for (int c = c0; c <= c1; ++c) hits[static_cast<size_t>(row) * n + c] = 1;
    }
  }
  Image cover(size, size, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int acc = 0;
      for (int sy = 0; sy < kSS; ++sy) {
        const size_t base = static_cast<size_t>(y * kSS + sy) * n + static_cast<size_t>(x) * kSS;
        acc += hits[base] + hits[base + 1] + hits[base + 2];
      }
      cover.set(x, y, acc / 9.0);
    }
  }
  return cover;
}

// ---------------------------------------------------------------------------
// Texture.

/// Stamps a gaussian darkening profile along a point sequence into `buf`
/// (max-combined so self-overlap does not double-darken).
void splat_polyline(std::vector<double>& buf, int size, const std::vector<Vec2>& pts, double depth,
                    double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (const Vec2& p : pts) {
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x)) - r);
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(p.x)) + r);
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y)) - r);
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(p.y)) + r);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - p.x;
        const double dy = y - p.y;
        const double v = depth * std::exp(-(dx * dx + dy * dy) * inv);
        double& cell = buf[static_cast<size_t>(y) * size + x];
        if (v > cell) cell = v;
      }
    }
  }
}

Vec2 bezier_point(const std::array<Vec2, 4>& c, double t) {
  const double u = 1.0 - t;
  const double b0 = u * u * u;
  const double b1 = 3.0 * u * u * t;
  const double b2 = 3.0 * u * t * t;
  const double b3 = t * t * t;
  return {c[0].x * b0 + c[1].x * b1 + c[2].x * b2 + c[3].x * b3,
          c[0].y * b0 + c[1].y * b1 + c[2].y * b2 + c[3].y * b3};
}

void splat_bezier(std::vector<double>& buf, int size, const std::array<Vec2, 4>& ctrl, double depth,
                  double sigma) {
  double len = 0.0;
  Vec2 prev = ctrl[0];
  for (int k = 1; k <= 16; ++k) {
    const Vec2 p = bezier_point(ctrl, k / 16.0);
    len += std::hypot(p.x - prev.x, p.y - prev.y);
    prev = p;
  }
  const int samples = std::max(32, static_cast<int>(std::ceil(len * 2.0)));
  std::vector<Vec2> pts;
  pts.reserve(samples + 1);
  for (int k = 0; k <= samples; ++k) pts.push_back(bezier_point(ctrl, static_cast<double>(k) / samples));
  splat_polyline(buf, size, pts, depth, sigma);
}

void splat_segment(std::vector<double>& buf, int size, const Vec2& a, const Vec2& b, double depth,
                   double sigma) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int samples = std::max(4, static_cast<int>(std::ceil(len * 2.0)));
  std::vector<Vec2> pts;
  pts.reserve(samples + 1);
  for (int k = 0; k <= samples; ++k) {
    const double t = static_cast<double>(k) / samples;
    pts.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
  }
  splat_polyline(buf, size, pts, depth, sigma);
}

struct CanonicalPalm {
  Image texture;   // skin intensity, defined everywhere, meaningful inside
  Image coverage;  // silhouette coverage fraction in [0,1]
};

/// Canonical-frame raster of the identity: silhouette coverage plus a skin
/// texture of mottled base level, oriented ridge carrier with smooth phase
/// wobble, principal lines and minor creases.
CanonicalPalm render_canonical(const PalmIdentity& id, const std::vector<Vec2>& poly,
                               bool with_lines) {
  const int S = kCanvas;
  Image cover = rasterize_coverage(poly, S);

  std::vector<double> dark(static_cast<size_t>(S) * S, 0.0);
  if (with_lines) {
    for (int i = 0; i < 3; ++i) {
      splat_bezier(dark, S, id.principal_line_controls[i], id.principal_line_depth[i],
                   id.principal_line_sigma[i]);
    }
  }
  {
    Rng rng(mix_seed(id.seed, kStreamCrease));
    const double area = polygon_area(poly);
    const int count = static_cast<int>(std::lround(id.minor_crease_density * area / 100.0));
    for (int i = 0; i < count; ++i) {
      const Vec2 c{rng.uniform(84.0, 244.0), rng.uniform(130.0, 298.0)};
      const double ang = rng.uniform(0.0, kPi);
      const double half = rng.uniform(6.0, 17.0);
      const double depth = rng.uniform(0.05, 0.11);
      const double sigma = rng.uniform(1.1, 1.5);
      const Vec2 d{std::cos(ang) * half, std::sin(ang) * half};
      splat_segment(dark, S, sub(c, d), add(c, d), depth, sigma);
    }
  }

  const std::uint64_t mottle_a = mix_seed(id.seed, kStreamMottleA);
  const std::uint64_t mottle_b = mix_seed(id.seed, kStreamMottleB);
  const double ct = std::cos(id.ridge_orientation);
  const double st = std::sin(id.ridge_orientation);
  Image tex(S, S, 0.0);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double mot = 0.05 * ((smooth_noise(mottle_a, x, y, 48.0) - 0.5) +
                                 0.6 * (smooth_noise(mottle_b, x, y, 19.0) - 0.5));
      const double wob = id.ridge_phase_amplitude *
                         2.0 * (smooth_noise(id.ridge_phase_field_seed, x, y, 40.0) - 0.5);
      const double carrier =
          std::sin(2.0 * kPi * id.ridge_frequency * (x * ct + y * st) + wob);
      const double v =
          id.base_level + mot + 0.04 * carrier - dark[static_cast<size_t>(y) * S + x];
      tex.set(x, y, std::clamp(v, 0.30, 0.93));
    }
  }
  return {std::move(tex), std::move(cover)};
}

// ---------------------------------------------------------------------------
// Capture composition.

std::array<double, 9> mat_mul(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      c[i * 3 + j] = s;
    }
  }
  return c;
}

/// Builds the capture-frame jitter field: a TPS through a 4x4 node grid
/// with random displacements rescaled so the largest one equals
/// tps_jitter_px. Maps capture coordinates to displaced coordinates.
TpsWarp build_jitter(double jitter_px, std::uint64_t capture_seed, int size) {
  Rng rng(mix_seed(capture_seed, kStreamJitter));
  const double margin = 0.18 * size;
  Correspondences corr;
  std::vector<Vec2> disp;
  for (int gy = 0; gy < 4; ++gy) {
    for (int gx = 0; gx < 4; ++gx) {
      const Vec2 node{margin + gx * (size - 2.0 * margin) / 3.0,
                      margin + gy * (size - 2.0 * margin) / 3.0};
      disp.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
      corr.push_back({node, node, 1.0});
    }
  }
  double maxn = 0.0;
  for (const Vec2& d : disp) maxn = std::max(maxn, std::hypot(d.x, d.y));
  const double scale = maxn > 0.0 ? jitter_px / maxn : 0.0;
  for (size_t i = 0; i < corr.size(); ++i) corr[i].target = add(corr[i].source, mul(disp[i], scale));
  return fit_tps(corr, 0.0);
}

/// Fixed-point inverse of the jitter field; converges because the field's
/// gradient is small against identity.
Vec2 invert_jitter(const TpsWarp& warp, const Vec2& target) {
  Vec2 u = target;
  for (int it = 0; it < 80; ++it) {
    const Vec2 fwd = evaluate_tps(warp, u);
    const double ex = target.x - fwd.x;
    const double ey = target.y - fwd.y;
    u.x += ex;
    u.y += ey;
    if (std::fabs(ex) + std::fabs(ey) < 1e-11) break;
  }
  return u;
}

/// Background layer: near-black, optionally with a few bright elliptical
/// distractors kept clear of the hand's bounding box.
Image render_background(const CaptureParams& p, int size, double hand_min_x, double hand_min_y,
                        double hand_max_x, double hand_max_y) {
  Image bg(size, size, 0.06);
  if (p.background != Background::Cluttered) return bg;
  Rng rng(mix_seed(p.capture_seed, kStreamClutter));
  const int want = static_cast<int>(rng.uniform_int(4, 12));
  for (int i = 0; i < want; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
      const double rx = rng.uniform(5.0, 14.0);
      const double ry = rng.uniform(5.0, 14.0);
      const double cx = rng.uniform(rx, size - 1.0 - rx);
      const double cy = rng.uniform(ry, size - 1.0 - ry);
      const double pad = std::max(rx, ry) + 10.0;
      if (cx + pad > hand_min_x && cx - pad < hand_max_x && cy + pad > hand_min_y &&
          cy - pad < hand_max_y) {
        continue;
      }
      const double level = rng.uniform(0.35, 0.55);
      const int x0 = static_cast<int>(std::floor(cx - rx - 1));
      const int x1 = static_cast<int>(std::ceil(cx + rx + 1));
      const int y0 = static_cast<int>(std::floor(cy - ry - 1));
      const int y1 = static_cast<int>(std::ceil(cy + ry + 1));
      for (int y = std::max(0, y0); y <= std::min(size - 1, y1); ++y) {
        for (int x = std::max(0, x0); x <= std::min(size - 1, x1); ++x) {
          const double q = ((x - cx) / rx) * ((x - cx) / rx) + ((y - cy) / ry) * ((y - cy) / ry);
          if (q <= 1.0) {
            bg.set(x, y, level);
          } else if (q < 1.2) {
            const double t = (1.2 - q) / 0.2;
            bg.set(x, y, bg.at(x, y) + (level - bg.at(x, y)) * t);
          }
        }
      }
      placed = true;
    }
  }
  return bg;
}

Image compose_capture(const CanonicalPalm& palm, const std::vector<Vec2>& poly,
                      const CaptureParams& params, int size, TpsWarp* jitter_out) {
  const bool has_jitter = params.tps_jitter_px > 0.0;
  TpsWarp jitter = has_jitter ? build_jitter(params.tps_jitter_px, params.capture_seed, size)
                              : TpsWarp::identity();
  if (jitter_out != nullptr) *jitter_out = jitter;

  const Homography inv_pose = params.pose.inverse();

  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  for (const Vec2& v : poly) {
    const Vec2 w = params.pose.apply(v);
    min_x = std::min(min_x, w.x);
    min_y = std::min(min_y, w.y);
    max_x = std::max(max_x, w.x);
    max_y = std::max(max_y, w.y);
  }
  const double pad = params.tps_jitter_px + 2.0;
  Image bg = render_background(params, size, min_x - pad, min_y - pad, max_x + pad, max_y + pad);

  const double half = (size - 1) / 2.0;
  const double gx = params.illumination_gradient.x;
  const double gy = params.illumination_gradient.y;
  Image out(size, size, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Vec2 q{static_cast<double>(x), static_cast<double>(y)};
      if (has_jitter) q = evaluate_tps(jitter, q);
      const Vec2 c = inv_pose.apply(q);
      double v = bg.at(x, y);
      if (c.x > -1.0 && c.x < kCanvas && c.y > -1.0 && c.y < kCanvas) {
        const double cov = bilinear_sample_or_zero(palm.coverage, c.x, c.y);
        if (cov > 0.0) {
          const double t = bilinear_sample_or_zero(palm.texture, c.x, c.y);
          v = cov * t + (1.0 - cov) * v;
        }
      }
      v *= 1.0 + gx * (x - half) + gy * (y - half);
      out.set(x, y, clamp01(v));
    }
  }

  if (params.blur_sigma > 0.0) out = gaussian_blur(out, params.blur_sigma);
  if (params.noise_sigma > 0.0) {
    Rng rng(mix_seed(params.capture_seed, kStreamNoise));
    auto px = out.mutable_pixels();
    for (double& v : px) v = clamp01(v + rng.normal(0.0, params.noise_sigma));
  }
  return out;
}

void check_size(int size) {
  if (size < 256) raise(ErrorCode::BadSize, "capture size must be at least 256");
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter types.

void OutlineParams::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(finger_length_delta[i]) || std::fabs(finger_length_delta[i]) > 8.0) {
      raise(ErrorCode::BadArgument, "finger length delta outside [-8, 8]");
    }
    if (!std::isfinite(finger_width_delta[i]) || std::fabs(finger_width_delta[i]) > 3.0) {
      raise(ErrorCode::BadArgument, "finger width delta outside [-3, 3]");
    }
  }
  if (!std::isfinite(thumb_length_delta) || std::fabs(thumb_length_delta) > 6.0) {
    raise(ErrorCode::BadArgument, "thumb length delta outside [-6, 6]");
  }
  if (!std::isfinite(ulnar_width_delta) || std::fabs(ulnar_width_delta) > 3.0) {
    raise(ErrorCode::BadArgument, "ulnar width delta outside [-3, 3]");
  }
}

PalmIdentity PalmIdentity::from_seed(std::uint64_t seed) {
  Rng rng(mix_seed(seed, kStreamIdentity));
  PalmIdentity id;
  id.seed = seed;

  // Principal line layouts: transverse distal (heart), transverse proximal
  // (head) and the curved radial (life) line, each jittered per identity.
  static constexpr std::array<std::array<Vec2, 4>, 3> kLineBase{{
      {{{92.0, 168.0}, {134.0, 146.0}, {188.0, 140.0}, {244.0, 156.0}}},
      {{{84.0, 200.0}, {138.0, 190.0}, {192.0, 196.0}, {250.0, 214.0}}},
      {{{100.0, 158.0}, {92.0, 203.0}, {100.0, 250.0}, {134.0, 290.0}}},
  }};
  static constexpr std::array<std::array<Vec2, 4>, 3> kLineSpread{{
      {{{8.0, 8.0}, {10.0, 8.0}, {10.0, 8.0}, {8.0, 8.0}}},
      {{{8.0, 8.0}, {10.0, 10.0}, {10.0, 10.0}, {8.0, 8.0}}},
      {{{6.0, 6.0}, {8.0, 10.0}, {8.0, 10.0}, {10.0, 8.0}}},
  }};
  for (int li = 0; li < 3; ++li) {
    for (int ci = 0; ci < 4; ++ci) {
      id.principal_line_controls[li][ci] = {
          kLineBase[li][ci].x + rng.uniform(-kLineSpread[li][ci].x, kLineSpread[li][ci].x),
          kLineBase[li][ci].y + rng.uniform(-kLineSpread[li][ci].y, kLineSpread[li][ci].y)};
    }
    id.principal_line_depth[li] = rng.uniform(0.17, 0.27);
    id.principal_line_sigma[li] = rng.uniform(2.0, 3.0);
  }

  id.minor_crease_density = rng.uniform(0.02, 0.06);
  id.ridge_frequency = rng.uniform(0.055, 0.09);
  id.ridge_orientation = rng.uniform(0.0, kPi);
  id.ridge_phase_amplitude = rng.uniform(1.6, 2.6);
  id.ridge_phase_field_seed = rng.next_u64();
  id.base_level = rng.uniform(0.60, 0.66);

  for (int f = 0; f < 4; ++f) {
    id.outline.finger_length_delta[f] = rng.uniform(-6.0, 6.0);
    id.outline.finger_width_delta[f] = rng.uniform(-2.0, 2.0);
  }
  id.outline.thumb_length_delta = rng.uniform(-5.0, 5.0);
  id.outline.ulnar_width_delta = rng.uniform(-3.0, 3.0);
  id.validate();
  return id;
}

void PalmIdentity::validate() const {
  for (const auto& line : principal_line_controls) {
    for (const Vec2& c : line) {
      if (!std::isfinite(c.x) || !std::isfinite(c.y) || c.x < 0 || c.x >= kCanvas || c.y < 0 ||
          c.y >= kCanvas) {
        raise(ErrorCode::BadArgument, "principal line control outside the canonical frame");
      }
    }
  }
  for (double d : principal_line_depth) {
    if (!(d >= 0.0 && d <= 0.5)) raise(ErrorCode::BadArgument, "line depth outside [0, 0.5]");
  }
  for (double s : principal_line_sigma) {
    if (!(s >= 0.5 && s <= 6.0)) raise(ErrorCode::BadArgument, "line sigma outside [0.5, 6]");
  }
  if (!(minor_crease_density >= 0.0 && minor_crease_density <= 0.2)) {
    raise(ErrorCode::BadArgument, "crease density outside [0, 0.2]");
  }
  if (!(ridge_frequency > 0.0 && ridge_frequency <= 0.2)) {
    raise(ErrorCode::BadArgument, "ridge frequency outside (0, 0.2]");
  }
  if (!(ridge_orientation >= 0.0 && ridge_orientation < kPi)) {
    raise(ErrorCode::BadArgument, "ridge orientation outside [0, pi)");
  }
  if (!(ridge_phase_amplitude >= 0.0 && ridge_phase_amplitude <= 6.0)) {
    raise(ErrorCode::BadArgument, "ridge phase amplitude outside [0, 6]");
  }
  if (!(base_level >= 0.4 && base_level <= 0.8)) {
    raise(ErrorCode::BadArgument, "base level outside [0.4, 0.8]");
  }
  outline.validate();
}

const char* background_name(Background bg) {
  return bg == Background::Dark ? "dark" : "cluttered";
}

Background background_from_name(const std::string& name) {
  if (name == "dark") return Background::Dark;
  if (name == "cluttered") return Background::Cluttered;
  raise(ErrorCode::BadArgument, "unknown background '" + name + "'");
}

void CaptureParams::validate() const {
  if (!(tps_jitter_px >= 0.0 && tps_jitter_px <= 20.0)) {
    raise(ErrorCode::BadArgument, "tps jitter outside [0, 20] px");
  }
  if (!(blur_sigma >= 0.0 && blur_sigma <= 8.0)) {
    raise(ErrorCode::BadArgument, "blur sigma outside [0, 8]");
  }
  if (!(noise_sigma >= 0.0 && noise_sigma <= 0.25)) {
    raise(ErrorCode::BadArgument, "noise sigma outside [0, 0.25]");
  }
  if (!std::isfinite(illumination_gradient.x) || !std::isfinite(illumination_gradient.y) ||
      std::fabs(illumination_gradient.x) > 5e-3 || std::fabs(illumination_gradient.y) > 5e-3) {
    raise(ErrorCode::BadArgument, "illumination gradient outside [-5e-3, 5e-3] per px");
  }
  // Geometric conditioning: across the canonical frame the projective
  // denominator stays positive (no horizon fold-over) and the local area
  // scale, det(H) / w^3, stays within a factor 25 of unity.
  const auto& a = pose.matrix();
  const double det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
                     a[2] * (a[3] * a[7] - a[4] * a[6]);
  const double edge = kCanvas - 1;
  const Vec2 probes[5] = {{0, 0}, {edge, 0}, {0, edge}, {edge, edge}, {edge / 2, edge / 2}};
  for (const Vec2& p : probes) {
    const double w = a[6] * p.x + a[7] * p.y + a[8];
    if (!(w > 1e-6)) raise(ErrorCode::BadArgument, "pose folds the canonical frame");
    const double area_scale = det / (w * w * w);
    if (!(area_scale > 0.04 && area_scale < 25.0)) {
      raise(ErrorCode::BadArgument, "pose scale leaves [0.2, 5] across the canonical frame");
    }
  }
}

Homography make_pose(const PoseAngles& a, int capture_size) {
  if (capture_size < 1) raise(ErrorCode::BadSize, "capture size must be positive");
  if (!(a.scale > 0.05 && a.scale < 20.0)) {
    raise(ErrorCode::BadArgument, "pose scale outside (0.05, 20)");
  }
  const double roll = a.roll_deg * kPi / 180.0;
  const double pitch = a.pitch_deg * kPi / 180.0;
  const double yaw = a.yaw_deg * kPi / 180.0;

  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  // R = Rz(roll) * Rx(pitch) * Ry(yaw); the palm plane spans columns 0, 1.
  const std::array<double, 9> rz{cr, -sr, 0, sr, cr, 0, 0, 0, 1};
  const std::array<double, 9> rx{1, 0, 0, 0, cp, -sp, 0, sp, cp};
  const std::array<double, 9> ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  const std::array<double, 9> r = mat_mul(mat_mul(rz, rx), ry);

  const double f = kStandoff * a.scale;
  const std::array<double, 9> proj{f * r[0], f * r[1], 0.0, f * r[3], f * r[4], 0.0,
                                   r[6],     r[7],     kStandoff};

  const double c_in = (kCanvas - 1) / 2.0;
  const double c_out = (capture_size - 1) / 2.0;
  const std::array<double, 9> pre{1, 0, -c_in, 0, 1, -c_in, 0, 0, 1};
  const std::array<double, 9> post{1, 0, c_out + a.translate_x, 0, 1, c_out + a.translate_y,
                                   0, 0, 1};
  return Homography::from_matrix(mat_mul(post, mat_mul(proj, pre)));
}

CaptureParams sample_capture_params(Rng& rng, const CaptureRanges& ranges, int capture_size) {
  PoseAngles a;
  a.roll_deg = rng.uniform(-ranges.roll_deg, ranges.roll_deg);
  a.pitch_deg = rng.uniform(-ranges.pitch_deg, ranges.pitch_deg);
  a.yaw_deg = rng.uniform(-ranges.yaw_deg, ranges.yaw_deg);
  a.scale = rng.uniform(ranges.scale_min, ranges.scale_max);
  a.translate_x = rng.uniform(-ranges.translate_px, ranges.translate_px);
  a.translate_y = rng.uniform(-ranges.translate_px, ranges.translate_px);

  CaptureParams p;
  p.pose = make_pose(a, capture_size);
  p.tps_jitter_px = ranges.tps_jitter_px;
  p.blur_sigma = rng.uniform(ranges.blur_sigma_min, ranges.blur_sigma_max);
  p.noise_sigma = rng.uniform(0.0, ranges.noise_sigma_max);
  p.illumination_gradient = {rng.uniform(-ranges.illumination_max, ranges.illumination_max),
                             rng.uniform(-ranges.illumination_max, ranges.illumination_max)};
  p.background = ranges.background;
  p.capture_seed = rng.next_u64();
  p.validate();
  return p;
}

RenderResult render_palm(const PalmIdentity& identity, const CaptureParams& params, int size) {
  check_size(size);
  identity.validate();
  params.validate();

  const std::vector<Vec2> poly = build_outline(identity.outline);
  const CanonicalPalm palm = render_canonical(identity, poly, true);

  RenderResult res;
  res.image = compose_capture(palm, poly, params, size, &res.jitter);
  res.pose = params.pose;

  const bool has_jitter = params.tps_jitter_px > 0.0;
  const auto& tmpl = CanonicalTemplate::standard();
  std::array<Vec2, KeypointSet::kNumPoints> pts;
  for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
    const Vec2 target = params.pose.apply(tmpl.destination_points[i]);
    pts[i] = has_jitter ? invert_jitter(res.jitter, target) : target;
  }
  res.keypoints = KeypointSet(pts, HandSide::Right);

  const Vec2 crop_center{CanonicalTemplate::kCropX + (CanonicalTemplate::kCropSize - 1) / 2.0,
                         CanonicalTemplate::kCropY + (CanonicalTemplate::kCropSize - 1) / 2.0};
  const Vec2 marker = params.pose.apply(crop_center);
  res.roi_center_marker = has_jitter ? invert_jitter(res.jitter, marker) : marker;
  return res;
}

Image render_closed_fist(const PalmIdentity& identity, const CaptureParams& params, int size) {
  check_size(size);
  identity.validate();
  params.validate();
  const std::vector<Vec2> poly = fist_outline();
  const CanonicalPalm palm = render_canonical(identity, poly, false);
  return compose_capture(palm, poly, params, size, nullptr);
}

Manifest generate_dataset(int n_subjects, int captures_per_subject, std::uint64_t seed,
                          const std::string& out_dir, const DatasetOptions& options) {
  if (n_subjects < 1 || captures_per_subject < 1) {
    raise(ErrorCode::BadArgument, "subject and capture counts must be positive");
  }
  check_size(options.image_size);
  if (!(options.left_hand_fraction >= 0.0 && options.left_hand_fraction <= 1.0)) {
    raise(ErrorCode::BadArgument, "left hand fraction outside [0, 1]");
  }
  if (options.age_months_min < 0 || options.age_months_max < options.age_months_min) {
    raise(ErrorCode::BadArgument, "bad age range");
  }

  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "keypoints");

  Manifest manifest;
  manifest.seed = seed;
  Rng meta(mix_seed(seed, kStreamMeta));

  char buf[64];
  for (int s = 0; s < n_subjects; ++s) {
    const std::uint64_t identity_seed = mix_seed(seed, kStreamSubject + static_cast<std::uint64_t>(s));
    const PalmIdentity identity = PalmIdentity::from_seed(identity_seed);
    const std::vector<Vec2> poly = build_outline(identity.outline);
    const CanonicalPalm palm = render_canonical(identity, poly, true);

    const HandSide side =
        meta.uniform() < options.left_hand_fraction ? HandSide::Left : HandSide::Right;
    const int age =
        static_cast<int>(meta.uniform_int(options.age_months_min, options.age_months_max));

    std::snprintf(buf, sizeof buf, "S%04d", s + 1);
    const std::string subject_id(buf);

    for (int c = 0; c < captures_per_subject; ++c) {
      Rng crng(mix_seed(identity_seed, kStreamCapture + static_cast<std::uint64_t>(c)));
      const CaptureParams params = sample_capture_params(crng, options.ranges, options.image_size);

      RenderResult r;
      {
        // Same path as render_palm, reusing the per-subject canonical raster.
        r.image = compose_capture(palm, poly, params, options.image_size, &r.jitter);
        r.pose = params.pose;
        const bool has_jitter = params.tps_jitter_px > 0.0;
        const auto& tmpl = CanonicalTemplate::standard();
        std::array<Vec2, KeypointSet::kNumPoints> pts;
        for (int i = 0; i < KeypointSet::kNumPoints; ++i) {
          const Vec2 target = params.pose.apply(tmpl.destination_points[i]);
          pts[i] = has_jitter ? invert_jitter(r.jitter, target) : target;
        }
        r.keypoints = KeypointSet(pts, HandSide::Right);
      }

      Image img = std::move(r.image);
      KeypointSet kps = r.keypoints;
      if (side == HandSide::Left) {
        img = img.mirrored_horizontal();
        kps = kps.mirrored_horizontal(options.image_size);
      }

      std::snprintf(buf, sizeof buf, "%s_C%02d", subject_id.c_str(), c + 1);
      const std::string capture_id(buf);
      const std::string image_rel = "images/" + capture_id + ".png";
      const std::string kp_rel = "keypoints/" + capture_id + ".json";
      write_png(img, (root / image_rel).string());
      save_keypoints(kps, capture_id, (root / kp_rel).string());

      manifest.entries.push_back(
          {subject_id, capture_id, side, image_rel, kp_rel, age});
    }
  }
  manifest.validate();
  save_manifest(manifest, (root / "manifest.json").string());
  return manifest;
}

}  // namespace palmpipe
