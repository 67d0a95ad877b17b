// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "palmpipe/error.hpp"

namespace palmpipe {

void KeypointProviderConfig::validate() const {
  if (binarization_threshold < 0.0 || binarization_threshold > 1.0 ||
      !std::isfinite(binarization_threshold)) {
    raise(ErrorCode::BadArgument, "binarization threshold must lie in [0, 1]");
  }
  if (!(min_hand_area > 0.0) || !(min_hand_area < 1.0)) {
    raise(ErrorCode::BadArgument, "min_hand_area must lie in (0, 1)");
  }
}

KeypointRecord load_keypoints(const std::string& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorCode::IoError, "cannot open: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("image_id") || !j.contains("hand_side") ||
      !j.contains("points")) {
    raise(ErrorCode::SchemaViolation, path + ": expected image_id, hand_side, points");
  }
  KeypointRecord rec;
  std::array<Vec2, KeypointSet::kNumPoints> pts;
  try {
    rec.image_id = j.at("image_id").get<std::string>();
    const HandSide side = hand_side_from_name(j.at("hand_side").get<std::string>());
    const auto& arr = j.at("points");
    if (!arr.is_array() || arr.size() != KeypointSet::kNumPoints) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "expected 9 points, got %zu", arr.size());
      raise(ErrorCode::SchemaViolation, path + ": " + buf);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!arr[i].is_array() || arr[i].size() != 2) {
        raise(ErrorCode::SchemaViolation, path + ": each point must be [x, y]");
      }
      pts[i] = Vec2{arr[i].at(0).get<double>(), arr[i].at(1).get<double>()};
      if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
        raise(ErrorCode::ParseError, path + ": non-finite coordinate");
      }
    }
    rec.keypoints = KeypointSet(pts, side);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::SchemaViolation, path + ": " + e.what());
  }
  return rec;
}

void save_keypoints(const KeypointSet& keypoints, const std::string& image_id,
                    const std::string& path) {
  keypoints.validate();
  nlohmann::ordered_json j;
  j["image_id"] = image_id;
  j["hand_side"] = hand_side_name(keypoints.hand_side());
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Vec2& p : keypoints.points()) arr.push_back({p.x, p.y});
  j["points"] = std::move(arr);
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorCode::IoError, "cannot open for write: " + path);
  f << j.dump(2) << "\n";
  if (!f) raise(ErrorCode::IoError, "write failed: " + path);
}

namespace {

struct PixelPos {
  int x = 0;
  int y = 0;
};

// Outer boundary of the component in mask, traced with the Moore
// neighborhood from the topmost-leftmost pixel. mask holds 1 for the
// selected component only.
std::vector<PixelPos> trace_boundary(const std::vector<std::uint8_t>& mask, int w, int h) {
  int sx = -1, sy = -1;
  for (int y = 0; y < h && sx < 0; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask[static_cast<std::size_t>(y) * w + x]) {
        sx = x;
        sy = y;
        break;
      }
    }
  }
  if (sx < 0) return {};

  auto at = [&](int x, int y) -> bool {
    return x >= 0 && x < w && y >= 0 && y < h && mask[static_cast<std::size_t>(y) * w + x] != 0;
  };

  // Moore neighborhood in clockwise order (y grows downward).
  static const int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static const int dy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};

  std::vector<PixelPos> boundary;
  int cx = sx, cy = sy;
  // Clockwise sweep start: one past the last examined background neighbor.
  // The scan reached the start pixel from the west, so begin at northwest.
  int probe = 5;
  const std::size_t limit = 4 * static_cast<std::size_t>(w) * h + 16;
  int first_leave_dir = -1;
  while (boundary.size() < limit) {
    boundary.push_back(PixelPos{cx, cy});
    int found = -1;
    for (int k = 0; k < 8; ++k) {
      const int d = (probe + k) % 8;
      if (at(cx + dx8[d], cy + dy8[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    if (cx == sx && cy == sy) {
      if (first_leave_dir < 0) {
        first_leave_dir = found;
      } else if (found == first_leave_dir && boundary.size() > 1) {
        boundary.pop_back();  // closed the loop on the same exit
        break;
      }
    }
    cx += dx8[found];
    cy += dy8[found];
    // After moving in direction d, the neighbor just before d in the sweep
    // around the previous pixel was background and is adjacent to the new
    // pixel; resume the clockwise sweep right after it.
    probe = ((found | 1) + 6) % 8;
  }
  // Remove a duplicated trailing start pixel if the loop closed on it.
  while (boundary.size() > 1 && boundary.back().x == sx && boundary.back().y == sy &&
         boundary.front().x == sx && boundary.front().y == sy) {
    boundary.pop_back();
  }
  return boundary;
}

struct Peak {
  int index = 0;
  double height = 0.0;
  double prominence = 0.0;
  double flank_drop = 0.0;
};

// Circular topographic prominence: walk both directions until strictly
// higher ground, taking the deepest point passed on each side.
double circular_prominence(const std::vector<double>& d, int peak) {
  const int n = static_cast<int>(d.size());
  double best_side = -1.0;
  for (int step : {1, -1}) {
    double low = d[peak];
    bool found_higher = false;
    for (int k = 1; k < n; ++k) {
      const int i = ((peak + step * k) % n + n) % n;
      if (d[i] > d[peak]) {
        found_higher = true;
        break;
      }
      low = std::min(low, d[i]);
    }
    const double side = found_higher ? d[peak] - low : d[peak] - low;
    best_side = best_side < 0.0 ? side : std::min(best_side, side);
    (void)found_higher;
  }
  return best_side;
}

int circular_distance(int from, int to, int n) { return ((to - from) % n + n) % n; }

}  // namespace

KeypointSet detect_valleys(const Image& img, const KeypointProviderConfig& cfg) {
  cfg.validate();
  const int w = img.width();
  const int h = img.height();

  std::vector<std::uint8_t> fg(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      fg[static_cast<std::size_t>(y) * w + x] = img.at(x, y) > cfg.binarization_threshold ? 1 : 0;
    }
  }

  // Largest 8-connected foreground component.
  std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
  std::int32_t best_label = -1;
  std::size_t best_size = 0;
  std::int32_t next_label = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < fg.size(); ++start) {
    if (!fg[start] || label[start] >= 0) continue;
    std::size_t size = 0;
    stack.clear();
    stack.push_back(start);
    label[start] = next_label;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
          if (fg[ni] && label[ni] < 0) {
            label[ni] = next_label;
            stack.push_back(ni);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next_label;
    }
    ++next_label;
  }

  const double min_area = cfg.min_hand_area * static_cast<double>(w) * h;
  if (best_label < 0 || static_cast<double>(best_size) < min_area) {
    raise(ErrorCode::SegmentationFailed, "no foreground component covers the minimum hand area");
  }

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (label[i] == best_label) {
      mask[i] = 1;
      cx += static_cast<double>(i % w);
      cy += static_cast<double>(i / w);
    }
  }
  cx /= static_cast<double>(best_size);
  cy /= static_cast<double>(best_size);

  const std::vector<PixelPos> boundary = trace_boundary(mask, w, h);
  const int n = static_cast<int>(boundary.size());
  if (n < 32) raise(ErrorCode::SegmentationFailed, "hand boundary too short to analyze");

  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    const double dx = boundary[i].x - cx;
    const double dy = boundary[i].y - cy;
    dist[i] = std::sqrt(dx * dx + dy * dy);
  }
  // Circular moving average; radius 4 keeps pixel-level corners while
  // flattening single-pixel staircase noise.
  std::vector<double> smooth(n);
  constexpr int kSmoothRadius = 4;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = -kSmoothRadius; k <= kSmoothRadius; ++k) {
      s += dist[((i + k) % n + n) % n];
    }
    smooth[i] = s / (2 * kSmoothRadius + 1);
  }

  // Local maxima with plateau handling: strictly above the previous
  // differing value and at least the next differing value.
  std::vector<Peak> peaks;
  for (int i = 0; i < n; ++i) {
    const double v = smooth[i];
    int prev = (i - 1 + n) % n;
    while (smooth[prev] == v && prev != i) prev = (prev - 1 + n) % n;
    int next = (i + 1) % n;
    while (smooth[next] == v && next != i) next = (next + 1) % n;
    if (prev == i) break;  // constant profile, no peaks
    if (smooth[prev] < v && smooth[next] < v) {
      // Midpoint of the plateau starting at i.
      int end = i;
      while (smooth[(end + 1) % n] == v) end = (end + 1) % n;
      const int mid = (i + circular_distance(i, end, n) / 2) % n;
      peaks.push_back(Peak{mid, v, 0.0});
      if (end >= i) {
        i = end;  // skip the plateau (non-wrapping case)
      }
    }
  }
  const double hand_scale = std::sqrt(static_cast<double>(best_size));
  const double min_prominence = 0.05 * hand_scale;
  // A fingertip drops into a deep inter-finger valley on both sides within a
  // short stretch of boundary. Wrist corners reach just as far from the
  // centroid, but one of their flanks is the wrist edge, which stays nearly
  // as far out, so their weaker flank drop is shallow.
  const int flank_window = std::max(8, n / 10);
  auto flank_drop = [&](int idx, int step) {
    double low = smooth[idx];
    for (int k = 1; k <= flank_window; ++k) {
      low = std::min(low, smooth[((idx + step * k) % n + n) % n]);
    }
    return smooth[idx] - low;
  };
  const double min_flank = 0.08 * hand_scale;
  std::vector<Peak> strong;
  for (Peak& p : peaks) {
    p.prominence = circular_prominence(smooth, p.index);
    if (p.prominence < min_prominence) continue;
    p.flank_drop = std::min(flank_drop(p.index, +1), flank_drop(p.index, -1));
    if (p.flank_drop < min_flank) continue;
    strong.push_back(p);
  }
  if (strong.size() < 5) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "found %zu fingertip candidates, need 5 extended fingers",
                  strong.size());
    raise(ErrorCode::ValleysNotFound, buf);
  }
  std::sort(strong.begin(), strong.end(),
            [](const Peak& a, const Peak& b) { return a.flank_drop > b.flank_drop; });
  strong.resize(5);
  std::sort(strong.begin(), strong.end(),
            [](const Peak& a, const Peak& b) { return a.index < b.index; });

  // The non-finger arc (through the wrist) is the longest gap between
  // consecutive fingertips; rotate the tip list to start right after it.
  int gap_at = 0;
  int gap_len = -1;
  for (int k = 0; k < 5; ++k) {
    const int len = circular_distance(strong[k].index, strong[(k + 1) % 5].index, n);
    if (len > gap_len) {
      gap_len = len;
      gap_at = k;
    }
  }
  std::array<int, 5> tips;  // boundary indices, walking away from the wrist
  for (int k = 0; k < 5; ++k) tips[k] = strong[(gap_at + 1 + k) % 5].index;

  auto bpoint = [&](int i) {
    return Vec2{static_cast<double>(boundary[i].x), static_cast<double>(boundary[i].y)};
  };
  auto angle_from_center = [&](int i) {
    return std::atan2(boundary[i].y - cy, boundary[i].x - cx);
  };
  auto angular_gap = [](double a, double b) {
    double d = std::abs(a - b);
    while (d > 2.0 * std::acos(-1.0)) d -= 2.0 * std::acos(-1.0);
    return d > std::acos(-1.0) ? 2.0 * std::acos(-1.0) - d : d;
  };

  // tips[2] is the middle finger; the thumb is whichever end tip points
  // farthest away from it.
  const double mid_angle = angle_from_center(tips[2]);
  const bool thumb_first =
      angular_gap(angle_from_center(tips[0]), mid_angle) >=
      angular_gap(angle_from_center(tips[4]), mid_angle);

  // Minimum of the smoothed profile strictly between two boundary indices,
  // walking forward from a to b.
  auto arc_min = [&](int a, int b) {
    const int len = circular_distance(a, b, n);
    int best = a;
    double best_v = smooth[a] + 1e9;
    for (int k = 1; k < len; ++k) {
      const int i = (a + k) % n;
      if (smooth[i] < best_v) {
        best_v = smooth[i];
        best = i;
      }
    }
    return best;
  };

  const int v01 = arc_min(tips[0], tips[1]);
  const int v12 = arc_min(tips[1], tips[2]);
  const int v23 = arc_min(tips[2], tips[3]);
  const int v34 = arc_min(tips[3], tips[4]);

  const int thumb_tip = thumb_first ? tips[0] : tips[4];
  const int little_tip = thumb_first ? tips[4] : tips[0];
  const int kp_thumb_index = thumb_first ? v01 : v34;
  const int kp_index_middle = thumb_first ? v12 : v23;
  const int kp_middle_ring = thumb_first ? v23 : v12;
  const int kp_ring_little = thumb_first ? v34 : v01;

  // Hand-axis coordinates: u points from the palm center toward the middle
  // fingertip, r toward the thumb (radial) side.
  const Vec2 center{cx, cy};
  Vec2 u{bpoint(tips[2]).x - cx, bpoint(tips[2]).y - cy};
  const double ulen = std::sqrt(u.x * u.x + u.y * u.y);
  if (ulen < 1e-9) raise(ErrorCode::ValleysNotFound, "degenerate hand axis");
  u.x /= ulen;
  u.y /= ulen;
  Vec2 r{bpoint(thumb_tip).x - cx, bpoint(thumb_tip).y - cy};
  const double along = r.x * u.x + r.y * u.y;
  r.x -= along * u.x;
  r.y -= along * u.y;
  const double rlen = std::sqrt(r.x * r.x + r.y * r.y);
  if (rlen < 1e-9) raise(ErrorCode::ValleysNotFound, "thumb lies on the hand axis");
  r.x /= rlen;
  r.y /= rlen;

  auto axis_u = [&](int i) {
    return (bpoint(i).x - center.x) * u.x + (bpoint(i).y - center.y) * u.y;
  };
  auto axis_r = [&](int i) {
    return (bpoint(i).x - center.x) * r.x + (bpoint(i).y - center.y) * r.y;
  };

  // The wrist arc runs from the last tip back around to the first.
  const int wrist_from = tips[4];
  const int wrist_to = tips[0];
  auto arc_argmax = [&](int a, int b, auto&& score) {
    const int len = circular_distance(a, b, n);
    int best = -1;
    double best_v = 0.0;
    for (int k = 1; k < len; ++k) {
      const int i = (a + k) % n;
      const double v = score(i);
      if (best < 0 || v > best_v) {
        best_v = v;
        best = i;
      }
    }
    return best;
  };

  const int wrist_radial =
      arc_argmax(wrist_from, wrist_to, [&](int i) { return -axis_u(i) + axis_r(i); });
  const int wrist_ulnar =
      arc_argmax(wrist_from, wrist_to, [&](int i) { return -axis_u(i) - axis_r(i); });
  if (wrist_radial < 0 || wrist_ulnar < 0) {
    raise(ErrorCode::ValleysNotFound, "wrist arc is empty");
  }

  // Lateral extrema: widest points in a band of axis height near the palm
  // center, searched between the wrist corner and the adjacent fingertip.
  // The palm is widest a little below the center height while the thumb
  // joins well above it, so the band reaches further down than up; that
  // keeps the search on the palm edge even when a long thumb juts out
  // sideways past it.
  const double band_lo = -0.12 * hand_scale;
  const double band_hi = 0.03 * hand_scale;
  auto lateral = [&](int arc_a, int arc_b, double sign) {
    auto banded = [&](int i) {
      const double off = axis_u(i);
      const double excess = off < band_lo ? band_lo - off : (off > band_hi ? off - band_hi : 0.0);
      const double penalty = excess > 0.0 ? 1e6 + excess : 0.0;
      return sign * axis_r(i) - penalty;
    };
    const int idx = arc_argmax(arc_a, arc_b, banded);
    return idx;
  };
  // Walk order inside the wrist arc depends on which end the thumb is on.
  int lateral_radial, lateral_ulnar;
  if (thumb_first) {
    // wrist arc: little -> ulnar corner -> radial corner -> thumb
    lateral_ulnar = lateral(wrist_from, wrist_ulnar, -1.0);
    lateral_radial = lateral(wrist_radial, wrist_to, +1.0);
  } else {
    // wrist arc: thumb -> radial corner -> ulnar corner -> little
    lateral_radial = lateral(wrist_from, wrist_radial, +1.0);
    lateral_ulnar = lateral(wrist_ulnar, wrist_to, -1.0);
  }
  if (lateral_radial < 0) lateral_radial = wrist_radial;
  if (lateral_ulnar < 0) lateral_ulnar = wrist_ulnar;

  // Right hand layout (fingers up, palm toward camera) has the thumb
  // clockwise from the middle finger in image coordinates (y down), which
  // makes the z component of middle x thumb negative.
  const Vec2 mid_dir{bpoint(tips[2]).x - cx, bpoint(tips[2]).y - cy};
  const Vec2 thumb_dir{bpoint(thumb_tip).x - cx, bpoint(thumb_tip).y - cy};
  const double cross = mid_dir.x * thumb_dir.y - mid_dir.y * thumb_dir.x;
  const HandSide side = cross < 0.0 ? HandSide::Right : HandSide::Left;

  (void)little_tip;
  std::array<Vec2, KeypointSet::kNumPoints> pts = {
      bpoint(kp_index_middle), bpoint(kp_middle_ring), bpoint(kp_ring_little),
      bpoint(kp_thumb_index),  bpoint(wrist_radial),   bpoint(wrist_ulnar),
      bpoint(lateral_radial),  bpoint(lateral_ulnar),  center,
  };
  KeypointSet out(pts, side);
  out.validate(w, h);
  return out;
}

}  // namespace palmpipe
