// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/tps.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "palmpipe/error.hpp"

namespace palmpipe {

namespace {

constexpr int kPatchHalf = 10;  // 21x21 matching patches

// U(r) = r^2 log r, evaluated from the squared distance to avoid a sqrt:
// r^2 log r = 0.5 * d2 * log(d2).
inline double kernel_u(double d2) {
  return d2 > 0.0 ? 0.5 * d2 * std::log(d2) : 0.0;
}

inline double squared_distance(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

void check_not_degenerate(const std::vector<Vec2>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) raise(ErrorCode::InsufficientPoints, "need at least 3 source points");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (squared_distance(pts[i], pts[j]) < 1e-18) {
        raise(ErrorCode::DuplicateSourcePoints, "coincident source points");
      }
    }
  }
  double cx = 0.0, cy = 0.0;
  for (const Vec2& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const Vec2& p : pts) {
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  // Smallest eigenvalue of the 2x2 scatter matrix; zero means all points
  // share a line.
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  const double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
  const double lmin = tr / 2.0 - disc;
  if (lmin < 1e-9) raise(ErrorCode::CollinearPoints, "source points are (near) collinear");
}

TpsWarp fit_tps_exact_pairs(const std::vector<Vec2>& src, const std::vector<Vec2>& dst,
                            double lambda) {
  check_not_degenerate(src);
  const int n = static_cast<int>(src.size());

  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + 3, n + 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      sys(i, j) = kernel_u(squared_distance(src[i], src[j]));
    }
    sys(i, i) += lambda;
    sys(i, n) = 1.0;
    sys(i, n + 1) = src[i].x;
    sys(i, n + 2) = src[i].y;
    sys(n, i) = 1.0;
    sys(n + 1, i) = src[i].x;
    sys(n + 2, i) = src[i].y;
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (int i = 0; i < n; ++i) {
    rhs(i, 0) = dst[i].x;
    rhs(i, 1) = dst[i].y;
  }

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible()) {
    raise(ErrorCode::DegenerateConfiguration, "TPS system is singular");
  }
  const Eigen::MatrixXd sol = lu.solve(rhs);

  TpsWarp warp;
  warp.lambda = lambda;
  warp.source_points = src;
  warp.weights.resize(src.size());
  for (int i = 0; i < n; ++i) {
    warp.weights[i] = Vec2{sol(i, 0), sol(i, 1)};
  }
  warp.affine_x = {sol(n, 0), sol(n + 1, 0), sol(n + 2, 0)};
  warp.affine_y = {sol(n, 1), sol(n + 1, 1), sol(n + 2, 1)};
  return warp;
}

}  // namespace

TpsWarp TpsWarp::identity() { return TpsWarp{}; }

void TpsWarp::validate() const {
  if (source_points.size() != weights.size()) {
    raise(ErrorCode::DimensionMismatch, "weights count must match source points");
  }
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    raise(ErrorCode::BadArgument, "lambda must be finite and >= 0");
  }
  for (const Vec2& p : source_points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      raise(ErrorCode::BadArgument, "source points must be finite");
    }
  }
  double sw_x = 0.0, sw_y = 0.0, swx_x = 0.0, swx_y = 0.0, swy_x = 0.0, swy_y = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i].x) || !std::isfinite(weights[i].y)) {
      raise(ErrorCode::BadArgument, "weights must be finite");
    }
    sw_x += weights[i].x;
    sw_y += weights[i].y;
    swx_x += weights[i].x * source_points[i].x;
    swx_y += weights[i].y * source_points[i].x;
    swy_x += weights[i].x * source_points[i].y;
    swy_y += weights[i].y * source_points[i].y;
  }
  const double worst = std::max({std::abs(sw_x), std::abs(sw_y), std::abs(swx_x), std::abs(swx_y),
                                 std::abs(swy_x), std::abs(swy_y)});
  if (!source_points.empty() && worst > 1e-8) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "side conditions violated (max residual %.3g)", worst);
    raise(ErrorCode::BadArgument, buf);
  }
}

TpsWarp fit_tps(const Correspondences& corr, double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    raise(ErrorCode::BadArgument, "lambda must be finite and >= 0");
  }
  std::vector<Vec2> src;
  std::vector<Vec2> dst;
  src.reserve(corr.size());
  dst.reserve(corr.size());
  for (const Correspondence& c : corr) {
    if (c.confidence < 0.0 || c.confidence > 1.0 || !std::isfinite(c.confidence)) {
      raise(ErrorCode::BadArgument, "confidence must lie in [0, 1]");
    }
    if (c.confidence < 0.5) continue;
    src.push_back(c.source);
    dst.push_back(c.target);
  }
  return fit_tps_exact_pairs(src, dst, lambda);
}

Vec2 evaluate_tps(const TpsWarp& warp, const Vec2& p) {
  double x = warp.affine_x[0] + warp.affine_x[1] * p.x + warp.affine_x[2] * p.y;
  double y = warp.affine_y[0] + warp.affine_y[1] * p.x + warp.affine_y[2] * p.y;
  for (std::size_t i = 0; i < warp.source_points.size(); ++i) {
    const double u = kernel_u(squared_distance(warp.source_points[i], p));
    x += warp.weights[i].x * u;
    y += warp.weights[i].y * u;
  }
  return Vec2{x, y};
}

Image apply_tps(const Image& img, const TpsWarp& warp) {
  warp.validate();
  TpsWarp reverse;
  if (warp.source_points.empty()) {
    // Pure affine map; invert it directly.
    Eigen::Matrix3d a;
    a << warp.affine_x[1], warp.affine_x[2], warp.affine_x[0], warp.affine_y[1], warp.affine_y[2],
        warp.affine_y[0], 0, 0, 1;
    if (std::abs(a.determinant()) <= 1e-12) {
      raise(ErrorCode::SingularHomography, "affine part is not invertible");
    }
    const Eigen::Matrix3d inv = a.inverse();
    reverse.affine_x = {inv(0, 2), inv(0, 0), inv(0, 1)};
    reverse.affine_y = {inv(1, 2), inv(1, 0), inv(1, 1)};
  } else {
    // Approximate field inversion: the warp's own source points map to
    // fitted targets; interpolating the swapped pairs gives a reverse field
    // that is exact at those anchors and smooth in between.
    std::vector<Vec2> fwd(warp.source_points.size());
    for (std::size_t i = 0; i < warp.source_points.size(); ++i) {
      fwd[i] = evaluate_tps(warp, warp.source_points[i]);
    }
    reverse = fit_tps_exact_pairs(fwd, warp.source_points, 0.0);
  }

  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Vec2 src = evaluate_tps(reverse, Vec2{static_cast<double>(x), static_cast<double>(y)});
      out.set(x, y, bilinear_sample_or_zero(img, src.x, src.y));
    }
  }
  return out;
}

Correspondences find_correspondences(const Image& probe, const Image& reference, int grid_n,
                                     int radius) {
  if (probe.width() != reference.width() || probe.height() != reference.height()) {
    raise(ErrorCode::DimensionMismatch, "probe and reference dimensions differ");
  }
  if (grid_n < 3) raise(ErrorCode::BadArgument, "grid_n must be >= 3");
  if (radius < 1) raise(ErrorCode::BadArgument, "radius must be >= 1");
  const int margin = kPatchHalf + radius;
  const int w = probe.width();
  const int h = probe.height();
  if (w <= 2 * margin + 1 || h <= 2 * margin + 1) {
    raise(ErrorCode::DimensionMismatch, "images too small for the matching grid");
  }

  auto grid_pos = [&](int i, int extent) {
    const double span = static_cast<double>(extent - 1 - 2 * margin);
    return margin + static_cast<int>(std::lround(span * i / (grid_n - 1)));
  };

  const int patch_n = (2 * kPatchHalf + 1) * (2 * kPatchHalf + 1);
  std::vector<double> pa(patch_n);

  Correspondences out;
  out.reserve(static_cast<std::size_t>(grid_n) * grid_n);
  for (int gy = 0; gy < grid_n; ++gy) {
    const int ny = grid_pos(gy, h);
    for (int gx = 0; gx < grid_n; ++gx) {
      const int nx = grid_pos(gx, w);
      const Vec2 node{static_cast<double>(nx), static_cast<double>(ny)};

      double a_sum = 0.0;
      int k = 0;
      for (int dy = -kPatchHalf; dy <= kPatchHalf; ++dy) {
        for (int dx = -kPatchHalf; dx <= kPatchHalf; ++dx) {
          const double v = probe.at(nx + dx, ny + dy);
          pa[k++] = v;
          a_sum += v;
        }
      }
      const double a_mean = a_sum / patch_n;
      double a_var = 0.0;
      for (double& v : pa) {
        v -= a_mean;
        a_var += v * v;
      }
      if (a_var < 1e-12) {
        out.push_back(Correspondence{node, node, 0.0});
        continue;
      }

      const int side = 2 * radius + 1;
      std::vector<double> surface(static_cast<std::size_t>(side) * side, -2.0);
      double best_ncc = -2.0;
      int best_dx = 0, best_dy = 0, best_d2 = 0;
      for (int oy = -radius; oy <= radius; ++oy) {
        for (int ox = -radius; ox <= radius; ++ox) {
          double b_sum = 0.0;
          for (int dy = -kPatchHalf; dy <= kPatchHalf; ++dy) {
            for (int dx = -kPatchHalf; dx <= kPatchHalf; ++dx) {
              b_sum += reference.at(nx + ox + dx, ny + oy + dy);
            }
          }
          const double b_mean = b_sum / patch_n;
          double cross = 0.0, b_var = 0.0;
          k = 0;
          for (int dy = -kPatchHalf; dy <= kPatchHalf; ++dy) {
            for (int dx = -kPatchHalf; dx <= kPatchHalf; ++dx) {
              const double b = reference.at(nx + ox + dx, ny + oy + dy) - b_mean;
              cross += pa[k++] * b;
              b_var += b * b;
            }
          }
          if (b_var < 1e-12) continue;
          const double ncc = cross / std::sqrt(a_var * b_var);
          surface[static_cast<std::size_t>(oy + radius) * side + (ox + radius)] = ncc;
          const int d2 = ox * ox + oy * oy;
          // Nearest offset wins exact ties so a self-match stays at (0,0).
          if (ncc > best_ncc || (ncc == best_ncc && d2 < best_d2)) {
            best_ncc = ncc;
            best_dx = ox;
            best_dy = oy;
            best_d2 = d2;
          }
        }
      }
      if (best_ncc < -1.5) {
        out.push_back(Correspondence{node, node, 0.0});
        continue;
      }
      // Sub-pixel peak: separable parabola through the integer peak and its
      // axis neighbors. Skipped on the search border, at exact matches
      // (already at the true optimum) and when the vertex leaves the unit
      // cell around the peak.
      auto refine = [&](int pdx, int pdy, bool along_x) {
        const int cx = pdx + radius, cy = pdy + radius;
        const int at = (along_x ? pdx : pdy);
        if (std::abs(at) == radius) return 0.0;
        const double c0 = surface[static_cast<std::size_t>(cy) * side + cx];
        const double cm = along_x ? surface[static_cast<std::size_t>(cy) * side + cx - 1]
                                  : surface[static_cast<std::size_t>(cy - 1) * side + cx];
        const double cp = along_x ? surface[static_cast<std::size_t>(cy) * side + cx + 1]
                                  : surface[static_cast<std::size_t>(cy + 1) * side + cx];
        if (cm < -1.5 || cp < -1.5) return 0.0;
        const double denom = cm - 2.0 * c0 + cp;
        if (denom >= -1e-12) return 0.0;
        const double delta = 0.5 * (cm - cp) / denom;
        return std::clamp(delta, -0.5, 0.5);
      };
      double sub_dx = 0.0, sub_dy = 0.0;
      if (best_ncc < 1.0 - 1e-9) {
        sub_dx = refine(best_dx, best_dy, true);
        sub_dy = refine(best_dx, best_dy, false);
      }
      const double confidence = std::clamp((1.0 + best_ncc) / 2.0, 0.0, 1.0);
      out.push_back(
          Correspondence{node, Vec2{nx + best_dx + sub_dx, ny + best_dy + sub_dy}, confidence});
    }
  }
  return out;
}

double bending_energy(const TpsWarp& warp) {
  const std::size_t n = warp.source_points.size();
  if (warp.weights.size() != n) {
    raise(ErrorCode::DimensionMismatch, "weights count must match source points");
  }
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double u = kernel_u(squared_distance(warp.source_points[i], warp.source_points[j]));
      e += u * (warp.weights[i].x * warp.weights[j].x + warp.weights[i].y * warp.weights[j].y);
    }
  }
  return std::max(e, 0.0);
}

namespace {

// Confidence filter, fit, then one trimmed refit: residual outliers against
// the first fit (border patches overlapping resample fill match confidently
// but wrongly) are dropped when enough nodes remain.
std::optional<TpsWarp> fit_trimmed(const Correspondences& all, const RealignParams& params) {
  Correspondences corr;
  for (const Correspondence& c : all) {
    if (c.confidence >= params.min_confidence) corr.push_back(c);
  }
  if (static_cast<int>(corr.size()) < params.min_nodes) return std::nullopt;

  TpsWarp warp = fit_tps(corr, params.lambda);

  std::vector<double> residuals(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec2 f = evaluate_tps(warp, corr[i].source);
    residuals[i] = std::hypot(f.x - corr[i].target.x, f.y - corr[i].target.y);
  }
  std::vector<double> sorted = residuals;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double cutoff = std::max(3.0 * sorted[sorted.size() / 2], 1.0);

  Correspondences kept;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (residuals[i] <= cutoff) kept.push_back(corr[i]);
  }
  if (kept.size() < corr.size() && static_cast<int>(kept.size()) >= params.min_nodes) {
    warp = fit_tps(kept, params.lambda);
  }
  return warp;
}

}  // namespace

std::optional<TpsWarp> realign_fit(const Image& probe, const Image& reference,
                                   const RealignParams& params) {
  if (params.passes < 1) raise(ErrorCode::BadArgument, "passes must be >= 1");
  std::optional<TpsWarp> warp =
      fit_trimmed(find_correspondences(probe, reference, params.grid_n, params.radius), params);
  if (!warp.has_value()) return std::nullopt;

  // Refinement passes re-match the once-aligned probe at a small radius.
  // Block matching under a large smooth warp sees distorted patch content
  // and lands 1-2 px off; with the bulk of the field removed the residual
  // match is far more accurate.
  for (int pass = 1; pass < params.passes; ++pass) {
    const Image aligned = apply_tps(probe, *warp);
    const int radius2 = std::max(3, params.radius / 3);
    const Correspondences c2 = find_correspondences(aligned, reference, params.grid_n, radius2);

    // Map the new anchors back to probe coordinates through the same
    // reverse field apply_tps resampled with, then fit the composite in one
    // go so the final warp resamples the original probe exactly once.
    Correspondences swapped(warp->source_points.size());
    for (std::size_t i = 0; i < warp->source_points.size(); ++i) {
      swapped[i] =
          Correspondence{evaluate_tps(*warp, warp->source_points[i]), warp->source_points[i], 1.0};
    }
    const TpsWarp reverse = fit_tps(swapped, 0.0);

    Correspondences composite;
    composite.reserve(c2.size());
    for (const Correspondence& c : c2) {
      if (c.confidence < params.min_confidence) continue;
      composite.push_back(Correspondence{evaluate_tps(reverse, c.source), c.target, c.confidence});
    }
    if (static_cast<int>(composite.size()) < params.min_nodes) break;

    const std::optional<TpsWarp> refined = fit_trimmed(composite, params);
    if (!refined.has_value()) break;
    warp = refined;
  }
  return warp;
}

Image realign(const Image& probe, const Image& reference, const RealignParams& params) {
  const std::optional<TpsWarp> warp = realign_fit(probe, reference, params);
  if (!warp.has_value()) return probe;
  return apply_tps(probe, *warp);
}

std::string tps_warp_to_json(const TpsWarp& warp) {
  nlohmann::ordered_json j;
  j["lambda"] = warp.lambda;
  j["affine_x"] = warp.affine_x;
  j["affine_y"] = warp.affine_y;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  nlohmann::ordered_json wts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < warp.source_points.size(); ++i) {
    pts.push_back({warp.source_points[i].x, warp.source_points[i].y});
    wts.push_back({warp.weights[i].x, warp.weights[i].y});
  }
  j["source_points"] = std::move(pts);
  j["weights"] = std::move(wts);
  return j.dump(2) + "\n";
}

TpsWarp tps_warp_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("invalid warp JSON: ") + e.what());
  }
  TpsWarp warp;
  try {
    warp.lambda = j.at("lambda").get<double>();
    warp.affine_x = j.at("affine_x").get<std::array<double, 3>>();
    warp.affine_y = j.at("affine_y").get<std::array<double, 3>>();
    const auto& pts = j.at("source_points");
    const auto& wts = j.at("weights");
    if (pts.size() != wts.size()) {
      raise(ErrorCode::SchemaViolation, "source_points and weights lengths differ");
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      warp.source_points.push_back(Vec2{pts[i].at(0).get<double>(), pts[i].at(1).get<double>()});
      warp.weights.push_back(Vec2{wts[i].at(0).get<double>(), wts[i].at(1).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::SchemaViolation, std::string("warp JSON schema: ") + e.what());
  }
  warp.validate();
  return warp;
}

}  // namespace palmpipe
