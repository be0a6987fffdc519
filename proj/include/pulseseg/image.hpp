#pragma once

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pulseseg/tensor.hpp"

namespace pulseseg {

constexpr int kIgnoreLabel = 255;

// Single-channel label image. Values are class indices (0 = background,
// k = class k) plus kIgnoreLabel.
struct IndexMask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  IndexMask() = default;
  IndexMask(int h_, int w_, std::uint8_t fill = 0) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  bool empty() const { return v.empty(); }
};

// --- geometry ---------------------------------------------------------

// Bilinear resize of a (c,h,w) tensor. Uses pixel-center alignment, so a
// resize to the same size is an exact copy.
inline Tensor resize_bilinear(const Tensor& img, int oh, int ow) {
  const int c = img.dim(0), ih = img.dim(1), iw = img.dim(2);
  Tensor out({c, oh, ow});
  const double sy = static_cast<double>(ih) / oh;
  const double sx = static_cast<double>(iw) / ow;
  for (int y = 0; y < oh; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, ih - 1);
    int y1c = std::clamp(y0 + 1, 0, ih - 1);
    for (int x = 0; x < ow; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, iw - 1);
      int x1c = std::clamp(x0 + 1, 0, iw - 1);
      for (int k = 0; k < c; ++k) {
        double top = img.at(k, y0c, x0c) * (1 - wx) + img.at(k, y0c, x1c) * wx;
        double bot = img.at(k, y1c, x0c) * (1 - wx) + img.at(k, y1c, x1c) * wx;
        out.at(k, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

inline IndexMask resize_nearest(const IndexMask& m, int oh, int ow) {
  IndexMask out(oh, ow);
  const double sy = static_cast<double>(m.h) / oh;
  const double sx = static_cast<double>(m.w) / ow;
  for (int y = 0; y < oh; ++y) {
    int iy = std::clamp(static_cast<int>((y + 0.5) * sy), 0, m.h - 1);
    for (int x = 0; x < ow; ++x) {
      int ix = std::clamp(static_cast<int>((x + 0.5) * sx), 0, m.w - 1);
      out.at(y, x) = m.at(iy, ix);
    }
  }
  return out;
}

inline Tensor hflip(const Tensor& img) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out({c, h, w});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(k, y, x) = img.at(k, y, w - 1 - x);
  return out;
}

inline IndexMask hflip(const IndexMask& m) {
  IndexMask out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
  return out;
}

// --- png i/o ----------------------------------------------------------

namespace detail {

struct PngCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, PngCloser>;

}  // namespace detail

// Writes an 8-bit image. channels() of the tensor decides gray vs RGB.
inline void write_png(const std::string& path, const std::vector<std::uint8_t>& rows, int h, int w, int channels) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("write_png: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: libpng error on " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    row_ptrs[static_cast<size_t>(y)] = const_cast<png_bytep>(rows.data() + static_cast<size_t>(y) * w * channels);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// img is (3,h,w) in [0,1].
inline void write_png_rgb(const std::string& path, const Tensor& img) {
  const int h = img.dim(1), w = img.dim(2);
  std::vector<std::uint8_t> rows(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k) {
        double v = std::clamp(img.at(k, y, x), 0.0, 1.0);
        rows[(static_cast<size_t>(y) * w + x) * 3 + k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  write_png(path, rows, h, w, 3);
}

inline void write_png_gray(const std::string& path, const IndexMask& m) { write_png(path, m.v, m.h, m.w, 1); }

// Reads an 8-bit PNG; any color type is expanded to RGB by libpng.
inline Tensor read_png_rgb(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png_rgb: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("read_png_rgb: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_rgb: libpng error on " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  std::vector<std::uint8_t> rows(static_cast<size_t>(h) * w * 3);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) row_ptrs[static_cast<size_t>(y)] = rows.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  Tensor img({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k) img.at(k, y, x) = rows[(static_cast<size_t>(y) * w + x) * 3 + k] / 255.0;
  return img;
}

inline IndexMask read_png_gray(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png_gray: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("read_png_gray: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_gray: libpng error on " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_gray: " + path + " is not an 8-bit single-channel png");
  }
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  IndexMask m(h, w);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) row_ptrs[static_cast<size_t>(y)] = m.v.data() + static_cast<size_t>(y) * w;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return m;
}

}  // namespace pulseseg
