// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#include "palmpipe/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace palmpipe {

namespace {

uint8_t to_byte(double v) {
  return static_cast<uint8_t>(std::lround(clamp01(v) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) raise(ErrorCode::IoError, "cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(ErrorCode::IoError, "png_create_info_struct failed");
  }
  std::vector<uint8_t> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::ParseError, "corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1.0, -1.0);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  data.resize(static_cast<size_t>(w) * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + static_cast<size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<double> px(data.size());
  for (size_t i = 0; i < data.size(); ++i) px[i] = data[i] / 255.0;
  return Image::from_pixels(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

void write_png(const Image& img, const std::string& path) {
  if (img.empty()) raise(ErrorCode::BadArgument, "empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) raise(ErrorCode::IoError, "cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    raise(ErrorCode::IoError, "png_create_info_struct failed");
  }
  std::vector<uint8_t> data(static_cast<size_t>(img.width()) * img.height());
  std::vector<png_bytep> rows(img.height());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  auto px = img.pixels();
  for (size_t i = 0; i < px.size(); ++i) data[i] = to_byte(px[i]);
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = data.data() + static_cast<size_t>(y) * img.width();
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) return -1;
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return 0;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::string tok;
  if (pgm_next_token(in, tok) != 0 || tok != "P5") {
    raise(ErrorCode::ParseError, "not a binary PGM (P5): " + path);
  }
  long w = 0, h = 0, maxval = 0;
  try {
    if (pgm_next_token(in, tok) != 0) throw std::invalid_argument("eof");
    w = std::stol(tok);
    if (pgm_next_token(in, tok) != 0) throw std::invalid_argument("eof");
    h = std::stol(tok);
    if (pgm_next_token(in, tok) != 0) throw std::invalid_argument("eof");
    maxval = std::stol(tok);
  } catch (const std::exception&) {
    raise(ErrorCode::ParseError, "malformed PGM header: " + path);
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    raise(ErrorCode::ParseError, "unsupported PGM geometry or maxval: " + path);
  }
  std::vector<uint8_t> data(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    raise(ErrorCode::ParseError, "truncated PGM payload: " + path);
  }
  std::vector<double> px(data.size());
  for (size_t i = 0; i < data.size(); ++i) px[i] = data[i] / static_cast<double>(maxval);
  return Image::from_pixels(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

void write_pgm(const Image& img, const std::string& path) {
  if (img.empty()) raise(ErrorCode::BadArgument, "empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  auto px = img.pixels();
  std::vector<uint8_t> data(px.size());
  for (size_t i = 0; i < px.size(); ++i) data[i] = to_byte(px[i]);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) raise(ErrorCode::IoError, "short write: " + path);
}

Image read_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") return read_png(path);
  if (ext == "pgm") return read_pgm(path);
  raise(ErrorCode::BadArgument, "unsupported image extension: " + path);
}

void write_image(const Image& img, const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") {
    write_png(img, path);
  } else if (ext == "pgm") {
    write_pgm(img, path);
  } else {
    raise(ErrorCode::BadArgument, "unsupported image extension: " + path);
  }
}

}  // namespace palmpipe
