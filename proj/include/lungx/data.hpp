#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lungx/rng.hpp"

namespace lungx {

[[noreturn]] inline void data_fail(const std::string& msg) { throw std::runtime_error(msg); }

// ---------------------------------------------------------------------------
// manifest (CSV, header `path,label,source`, UTF-8, LF)
// ---------------------------------------------------------------------------

struct ManifestRecord {
  std::string path;  // as written in the CSV; relative paths resolve against the CSV's directory
  int label = 0;     // 0 normal, 1 pneumonia
  std::string source;  // rsna | chexpert | synthetic
};

struct Manifest {
  std::string dir;  // directory of the CSV, used to resolve relative paths
  std::vector<ManifestRecord> records;

  std::string resolve(const ManifestRecord& r) const {
    std::filesystem::path p(r.path);
    if (p.is_absolute()) return r.path;
    return (std::filesystem::path(dir) / p).string();
  }
};

inline Manifest load_manifest(const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) data_fail("manifest: cannot open " + csv_path);
  Manifest m;
  m.dir = std::filesystem::path(csv_path).parent_path().string();
  if (m.dir.empty()) m.dir = ".";
  std::string line;
  if (!std::getline(in, line)) data_fail("manifest: " + csv_path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label,source")
    data_fail("manifest: " + csv_path + " has header '" + line + "', expected 'path,label,source'");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      data_fail("manifest: row " + std::to_string(row) + " of " + csv_path +
                " does not have exactly 3 fields");
    ManifestRecord r;
    r.path = line.substr(0, c1);
    std::string label = line.substr(c1 + 1, c2 - c1 - 1);
    r.source = line.substr(c2 + 1);
    if (label == "0")
      r.label = 0;
    else if (label == "1")
      r.label = 1;
    else
      data_fail("manifest: row " + std::to_string(row) + " has label '" + label +
                "', expected 0 or 1");
    if (r.source != "rsna" && r.source != "chexpert" && r.source != "synthetic")
      data_fail("manifest: row " + std::to_string(row) + " has unknown source '" + r.source + "'");
    if (r.path.empty()) data_fail("manifest: row " + std::to_string(row) + " has an empty path");
    if (!std::filesystem::exists(m.resolve(r)))
      data_fail("manifest: row " + std::to_string(row) + " path does not resolve: " + m.resolve(r));
    m.records.push_back(std::move(r));
  }
  return m;
}

inline void write_manifest(const Manifest& m, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) data_fail("manifest: cannot write " + csv_path);
  out << "path,label,source\n";
  for (const auto& r : m.records) out << r.path << ',' << r.label << ',' << r.source << '\n';
}

// ---------------------------------------------------------------------------
// PGM codec (P5 binary / P2 ASCII, maxval up to 65535)
// ---------------------------------------------------------------------------

struct ImageSample {
  std::size_t h = 0, w = 0;
  std::vector<float> pixels;  // row-major, [0,1] before normalization
  int label = 0;
};

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return 0;
  do {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  } while (c != EOF && !std::isspace(c) && c != '#');
  if (c == '#') in.unget();
  return 1;
}

}  // namespace detail

inline ImageSample decode_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_fail("pgm: cannot open " + path);
  std::string tok;
  if (!detail::pgm_next_token(in, tok) || (tok != "P5" && tok != "P2"))
    data_fail("pgm: " + path + " is not a P5/P2 grayscale image");
  bool binary = tok == "P5";
  auto read_num = [&](const char* what) -> long {
    if (!detail::pgm_next_token(in, tok)) data_fail("pgm: " + path + " truncated before " + what);
    try {
      return std::stol(tok);
    } catch (...) {
      data_fail("pgm: " + path + " has malformed " + std::string(what) + " '" + tok + "'");
    }
  };
  long w = read_num("width"), h = read_num("height"), maxval = read_num("maxval");
  if (w <= 0 || h <= 0) data_fail("pgm: " + path + " has non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) data_fail("pgm: " + path + " has unsupported maxval");
  ImageSample img;
  img.w = static_cast<std::size_t>(w);
  img.h = static_cast<std::size_t>(h);
  img.pixels.resize(img.w * img.h);
  float inv = 1.0f / static_cast<float>(maxval);
  std::size_t n = img.pixels.size();
  if (binary) {
    // exactly one whitespace byte separates the header from the raster
    bool wide = maxval > 255;
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      data_fail("pgm: " + path + " raster is truncated");
    if (wide) {
      for (std::size_t i = 0; i < n; ++i)
        img.pixels[i] = static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]) * inv;  // big-endian
    } else {
      for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<float>(raw[i]) * inv;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      long v = read_num("pixel");
      if (v < 0 || v > maxval) data_fail("pgm: " + path + " pixel out of range");
      img.pixels[i] = static_cast<float>(v) * inv;
    }
  }
  return img;
}

/// Writes binary P5 with maxval 255; values are clamped to [0,1] and rounded.
inline void write_pgm(const std::string& path, std::size_t h, std::size_t w,
                      const std::vector<float>& pixels) {
  if (pixels.size() != h * w) data_fail("pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) data_fail("pgm: cannot write " + path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> raw(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    float v = std::min(std::max(pixels[i], 0.0f), 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline ImageSample decode_image(const Manifest& m, const ManifestRecord& r) {
  ImageSample img = decode_pgm(m.resolve(r));
  img.label = r.label;
  return img;
}

// ---------------------------------------------------------------------------
// resampling helpers (shared by augmentation and eval preprocessing)
// ---------------------------------------------------------------------------

namespace detail {

inline float bilinear_at(const std::vector<float>& px, std::size_t h, std::size_t w, double y,
                         double x) {
  y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
  x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
  std::size_t y0 = static_cast<std::size_t>(y), x0 = static_cast<std::size_t>(x);
  std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  float fy = static_cast<float>(y - static_cast<double>(y0));
  float fx = static_cast<float>(x - static_cast<double>(x0));
  float a = px[y0 * w + x0], b = px[y0 * w + x1], c = px[y1 * w + x0], d = px[y1 * w + x1];
  float top = a + (b - a) * fx;
  float bot = c + (d - c) * fx;
  return top + (bot - top) * fy;
}

// half-pixel-center resize, same convention as the tensor op
inline std::vector<float> resize_image(const std::vector<float>& px, std::size_t h, std::size_t w,
                                       std::size_t oh, std::size_t ow) {
  std::vector<float> out(oh * ow);
  double sh = static_cast<double>(h) / static_cast<double>(oh);
  double sw = static_cast<double>(w) / static_cast<double>(ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      out[y * ow + x] = bilinear_at(px, h, w, (static_cast<double>(y) + 0.5) * sh - 0.5,
                                    (static_cast<double>(x) + 0.5) * sw - 0.5);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// training augmentation / eval preprocessing
// ---------------------------------------------------------------------------

struct AugmentConfig {
  double crop_scale_min = 0.7;
  double crop_scale_max = 1.0;
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  double rotation_deg = 10.0;
  double jitter = 0.2;  // brightness/contrast factor range +-jitter
  double erase_prob = 0.25;
  double erase_min = 0.02;  // erased area fraction range
  double erase_max = 0.1;
  std::size_t target = 64;

  void validate() const {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(hflip_prob) || !prob_ok(vflip_prob) || !prob_ok(erase_prob))
      data_fail("augment: probabilities must lie in [0,1]");
    if (crop_scale_min > crop_scale_max || crop_scale_min <= 0.0 || crop_scale_max > 1.0)
      data_fail("augment: crop scale range is empty or out of (0,1]");
    if (erase_min > erase_max || erase_min <= 0.0) data_fail("augment: erase range is empty");
    if (rotation_deg < 0.0 || jitter < 0.0) data_fail("augment: negative range");
    if (target == 0) data_fail("augment: target size must be positive");
  }
};

namespace detail {

// rectangle extents for random erasing with the given area fraction
inline std::pair<std::size_t, std::size_t> erase_rect_dims(std::size_t h, std::size_t w,
                                                           double frac, double aspect) {
  double area = frac * static_cast<double>(h) * static_cast<double>(w);
  std::size_t rh = static_cast<std::size_t>(std::lround(std::sqrt(area * aspect)));
  rh = std::min(std::max<std::size_t>(rh, 1), h);
  std::size_t rw = static_cast<std::size_t>(std::lround(area / static_cast<double>(rh)));
  rw = std::min(std::max<std::size_t>(rw, 1), w);
  return {rh, rw};
}

}  // namespace detail

/// Training-path augmentation, applied in order: random resized crop,
/// horizontal flip, vertical flip, small-angle rotation (edge-clamp fill),
/// brightness/contrast jitter, clamp to [0,1], random erasing with
/// uniform-noise fill. The label is unchanged. Hue/saturation jitter is a
/// no-op on single-channel radiographs and is intentionally absent.
inline ImageSample augment_train(const ImageSample& in, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (in.h < 8 || in.w < 8) data_fail("augment: input must be at least 8x8");

  // random resized crop: area scale, aspect preserved
  double s = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
  double side = std::sqrt(s);
  std::size_t ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(side * static_cast<double>(in.h))));
  std::size_t cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(side * static_cast<double>(in.w))));
  ch = std::min(ch, in.h);
  cw = std::min(cw, in.w);
  std::size_t top = rng.uniform_index(in.h - ch + 1);
  std::size_t left = rng.uniform_index(in.w - cw + 1);
  std::vector<float> crop(ch * cw);
  for (std::size_t y = 0; y < ch; ++y)
    std::copy(in.pixels.begin() + static_cast<std::ptrdiff_t>((top + y) * in.w + left),
              in.pixels.begin() + static_cast<std::ptrdiff_t>((top + y) * in.w + left + cw),
              crop.begin() + static_cast<std::ptrdiff_t>(y * cw));

  ImageSample out;
  out.label = in.label;
  out.h = out.w = cfg.target;
  out.pixels = detail::resize_image(crop, ch, cw, cfg.target, cfg.target);
  std::size_t t = cfg.target;

  if (rng.bernoulli(cfg.hflip_prob)) {
    for (std::size_t y = 0; y < t; ++y)
      std::reverse(out.pixels.begin() + static_cast<std::ptrdiff_t>(y * t),
                   out.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * t));
  }
  if (rng.bernoulli(cfg.vflip_prob)) {
    for (std::size_t y = 0; y < t / 2; ++y)
      std::swap_ranges(out.pixels.begin() + static_cast<std::ptrdiff_t>(y * t),
                       out.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * t),
                       out.pixels.begin() + static_cast<std::ptrdiff_t>((t - 1 - y) * t));
  }

  double angle = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * 3.14159265358979323846 / 180.0;
  if (angle != 0.0) {
    double cy = (static_cast<double>(t) - 1.0) / 2.0, cx = cy;
    double ca = std::cos(angle), sa = std::sin(angle);
    std::vector<float> rotated(t * t);
    for (std::size_t y = 0; y < t; ++y)
      for (std::size_t x = 0; x < t; ++x) {
        double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        rotated[y * t + x] =
            detail::bilinear_at(out.pixels, t, t, cy + dy * ca - dx * sa, cx + dy * sa + dx * ca);
      }
    out.pixels = std::move(rotated);
  }

  double bf = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter);
  if (bf != 1.0)
    for (auto& v : out.pixels) v = static_cast<float>(v * bf);
  double cf = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter);
  if (cf != 1.0) {
    double mean = 0.0;
    for (float v : out.pixels) mean += v;
    mean /= static_cast<double>(out.pixels.size());
    for (auto& v : out.pixels) v = static_cast<float>(mean + (v - mean) * cf);
  }
  for (auto& v : out.pixels) v = std::min(std::max(v, 0.0f), 1.0f);

  if (rng.bernoulli(cfg.erase_prob)) {
    double frac = rng.uniform(cfg.erase_min, cfg.erase_max);
    double aspect = rng.uniform(0.5, 2.0);
    auto [rh, rw] = detail::erase_rect_dims(t, t, frac, aspect);
    std::size_t ry = rng.uniform_index(t - rh + 1);
    std::size_t rx = rng.uniform_index(t - rw + 1);
    for (std::size_t y = ry; y < ry + rh; ++y)
      for (std::size_t x = rx; x < rx + rw; ++x)
        out.pixels[y * t + x] = static_cast<float>(rng.uniform());
  }
  return out;
}

/// Deterministic eval path: bilinear resize so the short side becomes
/// ceil(target * resize_ratio), center crop to target, then (x - mean)/std.
inline ImageSample preprocess_eval(const ImageSample& in, std::size_t target, float mean,
                                   float stddev, double resize_ratio = 1.14) {
  if (resize_ratio < 1.0) data_fail("preprocess: resize ratio must be >= 1");
  if (stddev == 0.0f) data_fail("preprocess: std must be nonzero");
  std::size_t short_side = std::min(in.h, in.w);
  std::size_t scaled_short = static_cast<std::size_t>(
      std::ceil(static_cast<double>(target) * resize_ratio - 1e-9));
  double f = static_cast<double>(scaled_short) / static_cast<double>(short_side);
  std::size_t oh, ow;
  if (in.h <= in.w) {
    oh = scaled_short;
    ow = std::max(scaled_short,
                  static_cast<std::size_t>(std::lround(static_cast<double>(in.w) * f)));
  } else {
    ow = scaled_short;
    oh = std::max(scaled_short,
                  static_cast<std::size_t>(std::lround(static_cast<double>(in.h) * f)));
  }
  auto resized = detail::resize_image(in.pixels, in.h, in.w, oh, ow);
  std::size_t top = (oh - target) / 2, left = (ow - target) / 2;
  ImageSample out;
  out.h = out.w = target;
  out.label = in.label;
  out.pixels.resize(target * target);
  for (std::size_t y = 0; y < target; ++y)
    for (std::size_t x = 0; x < target; ++x)
      out.pixels[y * target + x] = (resized[(top + y) * ow + left + x] - mean) / stddev;
  return out;
}

inline void normalize_inplace(ImageSample& img, float mean, float stddev) {
  for (auto& v : img.pixels) v = (v - mean) / stddev;
}

// ---------------------------------------------------------------------------
// class-balanced sampler
// ---------------------------------------------------------------------------

/// With-replacement sampler: draw a class with probability 1/2, then a
/// uniform member of that class. Deterministic under its seed.
class WeightedSampler {
 public:
  WeightedSampler(const std::vector<int>& labels, std::uint64_t seed) : rng_(seed) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == 1)
        pos_.push_back(i);
      else if (labels[i] == 0)
        neg_.push_back(i);
      else
        data_fail("sampler: labels must be 0 or 1");
    }
    if (pos_.empty() || neg_.empty())
      data_fail("sampler: needs both classes, got " + std::to_string(pos_.size()) +
                " positives and " + std::to_string(neg_.size()) + " negatives");
  }

  std::size_t next() {
    const auto& side = rng_.bernoulli(0.5) ? pos_ : neg_;
    return side[rng_.uniform_index(side.size())];
  }

 private:
  std::vector<std::size_t> pos_, neg_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// synthetic desk-scale dataset
// ---------------------------------------------------------------------------

struct SyntheticBlob {
  double cy = 0, cx = 0;   // center, pixels
  double ry = 0, rx = 0;   // radii, pixels
  double theta = 0;        // rotation
  double amp = 0;          // added intensity at the center
};

struct SyntheticSpec {
  std::size_t image_size = 64;
  std::size_t count_per_class = 50;
  std::size_t blob_min = 1, blob_max = 3;
  double radius_min = 0.10, radius_max = 0.22;  // fraction of image size
  double intensity_min = 0.35, intensity_max = 0.60;
  double noise = 0.03;
  std::uint64_t seed = 1;
};

struct SynthImage {
  ImageSample sample;
  std::vector<SyntheticBlob> blobs;  // empty for negatives
};

namespace detail {

inline std::vector<float> synth_background(std::size_t n, Rng& rng, double noise) {
  // low-frequency field: coarse random grid upsampled, plus pixel noise
  const std::size_t g = 4;
  std::vector<float> coarse(g * g);
  for (auto& v : coarse) v = static_cast<float>(rng.uniform(0.20, 0.45));
  auto field = resize_image(coarse, g, g, n, n);
  for (auto& v : field) {
    v += static_cast<float>(rng.normal(0.0, noise));
    v = std::min(std::max(v, 0.0f), 1.0f);
  }
  return field;
}

inline void render_blob(std::vector<float>& px, std::size_t n, const SyntheticBlob& b) {
  double ca = std::cos(b.theta), sa = std::sin(b.theta);
  double reach = 1.6 * std::max(b.ry, b.rx);
  std::size_t y0 = static_cast<std::size_t>(std::max(0.0, b.cy - reach));
  std::size_t y1 = std::min(n - 1, static_cast<std::size_t>(b.cy + reach));
  std::size_t x0 = static_cast<std::size_t>(std::max(0.0, b.cx - reach));
  std::size_t x1 = std::min(n - 1, static_cast<std::size_t>(b.cx + reach));
  for (std::size_t y = y0; y <= y1; ++y)
    for (std::size_t x = x0; x <= x1; ++x) {
      double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
      double u = (dy * ca + dx * sa) / b.ry;
      double v = (-dy * sa + dx * ca) / b.rx;
      double d2 = u * u + v * v;
      if (d2 > 2.56) continue;  // beyond 1.6 radii
      float& p = px[y * n + x];
      p = std::min(1.0f, p + static_cast<float>(b.amp * std::exp(-2.0 * d2)));
    }
}

}  // namespace detail

/// Deterministic in-memory generator: negatives are smooth low-frequency
/// background plus noise; positives add 1..k soft-edged elliptical bright
/// blobs whose geometry is returned for localization checks.
inline std::vector<SynthImage> synth_generate(const SyntheticSpec& spec) {
  if (spec.image_size < 8) data_fail("synth: image size too small");
  if (spec.blob_min < 1 || spec.blob_min > spec.blob_max)
    data_fail("synth: blob count range is empty or zero");
  if (spec.radius_min > spec.radius_max || spec.radius_min <= 0.0)
    data_fail("synth: radius range is empty");
  Rng rng(spec.seed);
  std::size_t n = spec.image_size;
  std::vector<SynthImage> images;
  images.reserve(2 * spec.count_per_class);
  for (int label = 0; label <= 1; ++label) {
    for (std::size_t i = 0; i < spec.count_per_class; ++i) {
      SynthImage img;
      img.sample.h = img.sample.w = n;
      img.sample.label = label;
      img.sample.pixels = detail::synth_background(n, rng, spec.noise);
      if (label == 1) {
        std::size_t k = spec.blob_min + rng.uniform_index(spec.blob_max - spec.blob_min + 1);
        for (std::size_t bi = 0; bi < k; ++bi) {
          SyntheticBlob b;
          b.ry = rng.uniform(spec.radius_min, spec.radius_max) * static_cast<double>(n);
          b.rx = rng.uniform(spec.radius_min, spec.radius_max) * static_cast<double>(n);
          double m = std::max(b.ry, b.rx);
          b.cy = rng.uniform(m, static_cast<double>(n) - m);
          b.cx = rng.uniform(m, static_cast<double>(n) - m);
          b.theta = rng.uniform(0.0, 3.14159265358979323846);
          b.amp = rng.uniform(spec.intensity_min, spec.intensity_max);
          detail::render_blob(img.sample.pixels, n, b);
          img.blobs.push_back(b);
        }
      }
      images.push_back(std::move(img));
    }
  }
  return images;
}

/// 1 inside any generating blob (elliptical distance <= 1), else 0.
inline std::vector<std::uint8_t> blob_mask(const SynthImage& img) {
  std::size_t n = img.sample.h;
  std::vector<std::uint8_t> mask(n * n, 0);
  for (const auto& b : img.blobs) {
    double ca = std::cos(b.theta), sa = std::sin(b.theta);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
        double u = (dy * ca + dx * sa) / b.ry;
        double v = (-dy * sa + dx * ca) / b.rx;
        if (u * u + v * v <= 1.0) mask[y * n + x] = 1;
      }
  }
  return mask;
}

/// Renders the dataset to out_dir as 8-bit PGMs plus manifest.csv; returns
/// the manifest path. Byte-identical across runs with the same spec.
inline std::string synth_write(const SyntheticSpec& spec, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) data_fail("synth: cannot create " + out_dir + ": " + ec.message());
  auto images = synth_generate(spec);
  Manifest m;
  m.dir = out_dir;
  char name[32];
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::snprintf(name, sizeof(name), "img_%05zu.pgm", i);
    write_pgm((std::filesystem::path(out_dir) / name).string(), images[i].sample.h,
              images[i].sample.w, images[i].sample.pixels);
    m.records.push_back({name, images[i].sample.label, "synthetic"});
  }
  std::string csv = (std::filesystem::path(out_dir) / "manifest.csv").string();
  write_manifest(m, csv);
  return csv;
}

}  // namespace lungx
