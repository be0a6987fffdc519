#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "pulseseg/errors.hpp"
#include "pulseseg/image.hpp"
#include "pulseseg/manifest.hpp"
#include "pulseseg/rng.hpp"

namespace pulseseg {

// Shape archetypes the generator can draw. Adding more requires shapes
// that stay visually distinct at 64x64, hence the hard cap.
constexpr int kMaxShapeClasses = 6;

inline const std::array<std::string, kMaxShapeClasses>& shape_class_names() {
  static const std::array<std::string, kMaxShapeClasses> names = {"circle",  "rectangle", "triangle",
                                                                  "diamond", "ring",      "cross"};
  return names;
}

namespace detail {

// Two-octave value noise on a coarse lattice, bilinearly interpolated.
// Cheap stand-in for Perlin noise; good enough for cluttered backgrounds.
inline Tensor value_noise(int h, int w, Rng& rng, int base_cell = 8, int octaves = 3) {
  Tensor noise({1, h, w});
  double amp = 1.0, total_amp = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const int cell = base_cell << o;
    const int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(static_cast<size_t>(gh) * gw);
    for (auto& g : grid) g = rng.uniform();
    for (int y = 0; y < h; ++y) {
      double fy = static_cast<double>(y) / cell;
      int y0 = static_cast<int>(fy);
      double ty = fy - y0;
      for (int x = 0; x < w; ++x) {
        double fx = static_cast<double>(x) / cell;
        int x0 = static_cast<int>(fx);
        double tx = fx - x0;
        auto g = [&](int yy, int xx) { return grid[static_cast<size_t>(yy) * gw + xx]; };
        double top = g(y0, x0) * (1 - tx) + g(y0, x0 + 1) * tx;
        double bot = g(y0 + 1, x0) * (1 - tx) + g(y0 + 1, x0 + 1) * tx;
        noise.at(0, y, x) += amp * (top * (1 - ty) + bot * ty);
      }
    }
    total_amp += amp;
    amp *= 0.5;
  }
  for (std::int64_t i = 0; i < noise.size(); ++i) noise[i] /= total_amp;
  return noise;
}

inline bool inside_shape(int archetype, double x, double y, double cx, double cy, double r) {
  const double dx = x - cx, dy = y - cy;
  switch (archetype) {
    case 0:  // circle
      return dx * dx + dy * dy <= r * r;
    case 1:  // rectangle (slightly rectangular on purpose)
      return std::abs(dx) <= r && std::abs(dy) <= 0.72 * r;
    case 2: {  // upward triangle
      if (dy < -r || dy > r) return false;
      double half = (dy + r) / (2.0 * r) * r;
      return std::abs(dx) <= half;
    }
    case 3:  // diamond
      return std::abs(dx) + std::abs(dy) <= r;
    case 4: {  // ring
      double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.45 * 0.45 * r * r;
    }
    case 5:  // cross
      return (std::abs(dx) <= 0.34 * r && std::abs(dy) <= r) || (std::abs(dy) <= 0.34 * r && std::abs(dx) <= r);
    default:
      return false;
  }
}

inline std::array<double, 3> class_base_color(int c) {
  static const std::array<std::array<double, 3>, kMaxShapeClasses> base = {{
      {0.78, 0.22, 0.20},  // circle: red
      {0.22, 0.66, 0.28},  // rectangle: green
      {0.22, 0.32, 0.78},  // triangle: blue
      {0.80, 0.72, 0.20},  // diamond: yellow
      {0.72, 0.24, 0.70},  // ring: magenta
      {0.20, 0.70, 0.68},  // cross: cyan
  }};
  return base[static_cast<size_t>(c)];
}

}  // namespace detail

// Renders one image: 1-3 shape instances with class-correlated colors on
// a textured background. first_class pins the class of the first
// instance (used to balance tag frequencies across the dataset).
inline ImageSample render_shapes_sample(int classes, int image_size, Rng& rng, int first_class,
                                        const std::string& id) {
  const int hw = image_size;
  ImageSample s;
  s.id = id;
  s.image = Tensor({3, hw, hw});
  s.gt_mask = IndexMask(hw, hw, 0);
  s.tags.assign(static_cast<size_t>(classes), 0);

  // background: two tones mixed by low-frequency noise
  Tensor noise = detail::value_noise(hw, hw, rng);
  const double tint = rng.uniform(-0.06, 0.06);
  const std::array<double, 3> tone_a = {0.32 + tint, 0.30 + tint, 0.27 + tint};
  const std::array<double, 3> tone_b = {0.58 + tint, 0.55 + tint, 0.50 + tint};
  for (int y = 0; y < hw; ++y)
    for (int x = 0; x < hw; ++x) {
      double t = noise.at(0, y, x);
      for (int k = 0; k < 3; ++k) s.image.at(k, y, x) = tone_a[static_cast<size_t>(k)] * (1 - t) + tone_b[static_cast<size_t>(k)] * t;
    }

  const int n_shapes = 1 + rng.uniform_int(3);
  Tensor shade = detail::value_noise(hw, hw, rng, 4, 2);
  for (int inst = 0; inst < n_shapes; ++inst) {
    const int cls = (inst == 0) ? first_class : rng.uniform_int(classes);
    const double r = rng.uniform(0.14, 0.30) * hw;
    auto color = detail::class_base_color(cls);
    for (auto& ch : color) ch = std::clamp(ch + rng.uniform(-0.12, 0.12), 0.05, 0.95);

    // keep new instances from burying earlier ones completely
    double cx = 0, cy = 0;
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      cx = rng.uniform(r * 0.7, hw - r * 0.7);
      cy = rng.uniform(r * 0.7, hw - r * 0.7);
      int cover = 0, area = 0;
      for (int y = std::max(0, static_cast<int>(cy - r)); y < std::min(hw, static_cast<int>(cy + r) + 1); ++y)
        for (int x = std::max(0, static_cast<int>(cx - r)); x < std::min(hw, static_cast<int>(cx + r) + 1); ++x)
          if (detail::inside_shape(cls, x, y, cx, cy, r)) {
            ++area;
            if (s.gt_mask.at(y, x) != 0) ++cover;
          }
      placed = area > 0 && cover <= area / 3;
    }
    if (!placed && inst > 0) continue;

    for (int y = std::max(0, static_cast<int>(cy - r)); y < std::min(hw, static_cast<int>(cy + r) + 1); ++y)
      for (int x = std::max(0, static_cast<int>(cx - r)); x < std::min(hw, static_cast<int>(cx + r) + 1); ++x)
        if (detail::inside_shape(cls, x, y, cx, cy, r)) {
          double m = 0.82 + 0.36 * shade.at(0, y, x);
          for (int k = 0; k < 3; ++k)
            s.image.at(k, y, x) = std::clamp(color[static_cast<size_t>(k)] * m, 0.0, 1.0);
          s.gt_mask.at(y, x) = static_cast<std::uint8_t>(cls + 1);
        }
  }

  // sensor-style pixel noise
  for (std::int64_t i = 0; i < s.image.size(); ++i)
    s.image[i] = std::clamp(s.image[i] + rng.normal(0.0, 0.02), 0.0, 1.0);

  // weak labels come from what actually remained visible
  for (int y = 0; y < hw; ++y)
    for (int x = 0; x < hw; ++x) {
      std::uint8_t m = s.gt_mask.at(y, x);
      if (m >= 1 && m <= classes) s.tags[static_cast<size_t>(m - 1)] = 1;
    }
  return s;
}

// Generates the dataset on disk (images/, masks/, manifest.txt under
// out_dir) and returns the manifest. Deterministic for a fixed seed.
inline DatasetManifest generate_shapes_dataset(int n_images, int classes, int image_size, std::uint64_t seed,
                                               const std::filesystem::path& out_dir) {
  if (classes < 2) throw ConfigError("generate_shapes_dataset: need at least 2 classes");
  if (classes > kMaxShapeClasses)
    throw ConfigError("generate_shapes_dataset: at most " + std::to_string(kMaxShapeClasses) +
                      " shape classes are supported, got " + std::to_string(classes));
  if (image_size < 32) throw ConfigError("generate_shapes_dataset: image_size must be >= 32");
  if (n_images < 1) throw ConfigError("generate_shapes_dataset: n_images must be >= 1");

  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "masks");

  DatasetManifest mf;
  mf.base_dir = out_dir;
  mf.class_names.assign(shape_class_names().begin(), shape_class_names().begin() + classes);
  for (int i = 0; i < n_images; ++i) {
    Rng rng(mix_seed(seed, 0x5147, static_cast<std::uint64_t>(i)));
    char id[32];
    std::snprintf(id, sizeof(id), "img_%05d", i);
    ImageSample s = render_shapes_sample(classes, image_size, rng, i % classes, id);
    ManifestRecord rec;
    rec.image_path = "images/" + std::string(id) + ".png";
    rec.mask_path = "masks/" + std::string(id) + ".png";
    for (int c = 0; c < classes; ++c)
      if (s.tags[static_cast<size_t>(c)]) rec.tag_names.push_back(mf.class_names[static_cast<size_t>(c)]);
    write_png_rgb((out_dir / rec.image_path).string(), s.image);
    write_png_gray((out_dir / rec.mask_path).string(), s.gt_mask);
    mf.records.push_back(std::move(rec));
  }
  save_manifest(mf, out_dir / "manifest.txt");
  return mf;
}

// --- augmentation -----------------------------------------------------

struct AugmentConfig {
  double scale_min = 0.7;
  double scale_max = 1.3;
  double flip_prob = 0.5;
  int crop = 64;
  double mean = 0.5;    // per-channel normalization
  double stddev = 0.25;
};

struct AugmentParams {
  double scale = 1.0;
  bool flip = false;
  double crop_fy = 0.5;  // fractional crop origin within the valid range
  double crop_fx = 0.5;
};

inline AugmentParams draw_augment_params(Rng& rng, const AugmentConfig& cfg) {
  AugmentParams p;
  p.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  p.flip = rng.bernoulli(cfg.flip_prob);
  p.crop_fy = rng.uniform();
  p.crop_fx = rng.uniform();
  return p;
}

// Resize -> flip -> normalize -> crop (pad with zeros / IGNORE when the
// resized image is smaller than the crop). The tag vector is never
// touched: weak labels are image-level annotations, not crop contents.
inline ImageSample augment_with(const ImageSample& s, const AugmentParams& p, const AugmentConfig& cfg) {
  const int ih = s.image.dim(1), iw = s.image.dim(2);
  const int nh = std::max(1, static_cast<int>(std::lround(ih * p.scale)));
  const int nw = std::max(1, static_cast<int>(std::lround(iw * p.scale)));

  Tensor img = resize_bilinear(s.image, nh, nw);
  IndexMask mask = s.gt_mask.empty() ? IndexMask() : resize_nearest(s.gt_mask, nh, nw);
  if (p.flip) {
    img = hflip(img);
    if (!mask.empty()) mask = hflip(mask);
  }
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = (img[i] - cfg.mean) / cfg.stddev;

  const int crop = cfg.crop;
  ImageSample out;
  out.id = s.id;
  out.tags = s.tags;
  out.image = Tensor({3, crop, crop});
  out.gt_mask = mask.empty() ? IndexMask() : IndexMask(crop, crop, kIgnoreLabel);

  // source origin when cropping, destination origin when padding
  const int sy = nh > crop ? static_cast<int>(std::lround(p.crop_fy * (nh - crop))) : 0;
  const int sx = nw > crop ? static_cast<int>(std::lround(p.crop_fx * (nw - crop))) : 0;
  const int dy = nh < crop ? (crop - nh) / 2 : 0;
  const int dx = nw < crop ? (crop - nw) / 2 : 0;
  const int copy_h = std::min(crop, nh), copy_w = std::min(crop, nw);
  for (int y = 0; y < copy_h; ++y)
    for (int x = 0; x < copy_w; ++x) {
      for (int k = 0; k < 3; ++k) out.image.at(k, dy + y, dx + x) = img.at(k, sy + y, sx + x);
      if (!mask.empty()) out.gt_mask.at(dy + y, dx + x) = mask.at(sy + y, sx + x);
    }
  return out;
}

inline ImageSample augment(const ImageSample& s, std::uint64_t seed, const AugmentConfig& cfg) {
  Rng rng(seed);
  return augment_with(s, draw_augment_params(rng, cfg), cfg);
}

}  // namespace pulseseg
