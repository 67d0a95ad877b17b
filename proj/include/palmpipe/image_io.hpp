// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_IMAGE_IO_HPP
#define PALMPIPE_IMAGE_IO_HPP

#include <string>

#include "palmpipe/image.hpp"

namespace palmpipe {

/// 8-bit grayscale PNG. Color inputs are converted to luma on read.
Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

/// Binary PGM (P5), maxval up to 255.
Image read_pgm(const std::string& path);
void write_pgm(const Image& img, const std::string& path);

/// Dispatches on file extension (.png, .pgm).
Image read_image(const std::string& path);
void write_image(const Image& img, const std::string& path);

}  // namespace palmpipe

#endif
