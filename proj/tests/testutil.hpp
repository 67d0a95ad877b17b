// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_TESTS_TESTUTIL_HPP
#define PALMPIPE_TESTS_TESTUTIL_HPP

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "palmpipe/error.hpp"
#include "palmpipe/image.hpp"
#include "palmpipe/rng.hpp"
#include "palmpipe/synth.hpp"

namespace testutil {

/// Scratch directory under the system temp root, wiped on construction so
/// every test run starts from the same state.
class TempDir {
 public:
  explicit TempDir(const std::string& label)
      : path_(std::filesystem::temp_directory_path() / "palmpipe_tests" / label) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }

  const std::filesystem::path& path() const noexcept { return path_; }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path_.string() : (path_ / leaf).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

inline bool files_equal(const std::string& a, const std::string& b) {
  return slurp(a) == slurp(b);
}

/// Renders one clean right-hand capture for tests that need palm texture.
inline palmpipe::RenderResult render_test_palm(std::uint64_t identity_seed,
                                               double roll_deg = 0.0, double scale = 1.0,
                                               int size = 416) {
  const palmpipe::PalmIdentity id = palmpipe::PalmIdentity::from_seed(identity_seed);
  palmpipe::CaptureParams cp;
  palmpipe::PoseAngles angles;
  angles.roll_deg = roll_deg;
  angles.scale = scale;
  cp.pose = palmpipe::make_pose(angles, size);
  cp.capture_seed = palmpipe::mix_seed(identity_seed, 77);
  return palmpipe::render_palm(id, cp, size);
}

/// Uniform-noise texture, deterministic in seed; useful when a test needs
/// dense gradients without the cost of a palm render.
inline palmpipe::Image noise_image(int width, int height, std::uint64_t seed) {
  palmpipe::Rng rng(seed);
  std::vector<double> px(static_cast<std::size_t>(width) * height);
  for (double& v : px) v = rng.uniform();
  return palmpipe::Image::from_pixels(width, height, std::move(px));
}

/// Error-code matcher: REQUIRE_THROWS_WITH_AS needs exact strings, this
/// checks only the code.
template <typename Fn>
palmpipe::ErrorCode thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const palmpipe::Error& e) {
    return e.code();
  }
  return palmpipe::ErrorCode::None;
}

}  // namespace testutil

#endif
