#include "spo2/roi.hpp"

#include <algorithm>
#include <cmath>

#include "spo2/io_util.hpp"

namespace spo2::roi {

namespace {

Rect effective_rect(const RoiConfig& cfg, int width, int height) {
  Rect r = cfg.rect.value_or(Rect{0, 0, width, height});
  if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > width ||
      r.y + r.h > height)
    throw Error(Errc::invalid_geometry, "ROI rectangle outside frame");
  return r;
}

// Disk-structuring-element erosion/dilation restricted to the rectangle.
// Pixels outside the rectangle count as background.
std::vector<std::uint8_t> morph(const std::vector<std::uint8_t>& in, int width,
                                const Rect& r, int radius, bool erode) {
  if (radius <= 0) return in;
  std::vector<std::pair<int, int>> disk;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) disk.emplace_back(dx, dy);

  std::vector<std::uint8_t> out(in.size(), 0);
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      bool acc = erode;
      for (const auto& [dx, dy] : disk) {
        const int nx = x + dx, ny = y + dy;
        bool v = false;
        if (nx >= r.x && nx < r.x + r.w && ny >= r.y && ny < r.y + r.h)
          v = in[static_cast<std::size_t>(ny) * width + nx] != 0;
        if (erode)
          acc = acc && v;
        else
          acc = acc || v;
        if (acc != erode) break;
      }
      out[static_cast<std::size_t>(y) * width + x] = acc ? 1 : 0;
    }
  }
  return out;
}

// Majority filter over the in-rect part of a w x w window.
std::vector<std::uint8_t> median_binary(const std::vector<std::uint8_t>& in,
                                        int width, const Rect& r, int window) {
  if (window <= 1) return in;
  const int half = window / 2;
  std::vector<std::uint8_t> out(in.size(), 0);
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      int ones = 0, total = 0;
      for (int dy = -half; dy <= half; ++dy) {
        const int ny = y + dy;
        if (ny < r.y || ny >= r.y + r.h) continue;
        for (int dx = -half; dx <= half; ++dx) {
          const int nx = x + dx;
          if (nx < r.x || nx >= r.x + r.w) continue;
          ++total;
          ones += in[static_cast<std::size_t>(ny) * width + nx];
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = (2 * ones > total) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

std::vector<double> rgb_to_cr(const std::vector<std::uint8_t>& frame,
                              int width, int height) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> cr(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = frame[3 * i];
    const double g = frame[3 * i + 1];
    const double b = frame[3 * i + 2];
    // algebraically 128 + 0.5R - 0.418688G - 0.081312B, arranged so that
    // R=G=B yields 128 exactly
    const double v = 128.0 + 0.5 * (r - g) + 0.081312 * (g - b);
    cr[i] = std::clamp(v, 0.0, 255.0);
  }
  return cr;
}

int otsu_threshold(const std::array<std::uint64_t, 256>& histogram) {
  std::uint64_t total = 0;
  double total_sum = 0.0;
  int distinct = 0;
  for (int v = 0; v < 256; ++v) {
    total += histogram[v];
    total_sum += static_cast<double>(histogram[v]) * v;
    if (histogram[v] > 0) ++distinct;
  }
  if (total == 0) throw Error(Errc::degenerate_histogram, "empty histogram");
  if (distinct < 2)
    throw Error(Errc::degenerate_histogram,
                "single-valued histogram has no separating threshold");

  int best_t = 0;
  double best_var = -1.0;
  std::uint64_t w0 = 0;
  double sum0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    w0 += histogram[t];
    sum0 += static_cast<double>(histogram[t]) * t;
    const std::uint64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = sum0 / static_cast<double>(w0);
    const double mu1 = (total_sum - sum0) / static_cast<double>(w1);
    const double var = static_cast<double>(w0) * static_cast<double>(w1) *
                       (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

SkinMask skin_mask(const std::vector<std::uint8_t>& frame, int width,
                   int height, const RoiConfig& cfg) {
  const Rect r = effective_rect(cfg, width, height);
  if (cfg.median_window < 1 || cfg.median_window % 2 == 0)
    throw Error(Errc::invalid_config, "median window must be odd and >= 1");
  if (cfg.morph_radius < 0)
    throw Error(Errc::invalid_config, "morphology radius must be >= 0");

  const auto cr = rgb_to_cr(frame, width, height);
  std::array<std::uint64_t, 256> hist{};
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x)
      ++hist[static_cast<int>(
          std::lround(cr[static_cast<std::size_t>(y) * width + x]))];

  int thr = 0;
  try {
    thr = otsu_threshold(hist);
  } catch (const Error& e) {
    if (e.code() == Errc::degenerate_histogram)
      throw Error(Errc::insufficient_skin,
                  "no skin/background contrast in Cr channel");
    throw;
  }

  std::vector<std::uint8_t> m(cr.size(), 0);
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      const double v = cr[static_cast<std::size_t>(y) * width + x];
      const bool skin = cfg.skin_above_threshold ? v > thr : v <= thr;
      m[static_cast<std::size_t>(y) * width + x] = skin ? 1 : 0;
    }
  }
  m = morph(m, width, r, cfg.morph_radius, /*erode=*/true);
  m = morph(m, width, r, cfg.morph_radius, /*erode=*/false);
  m = median_binary(m, width, r, cfg.median_window);

  SkinMask out;
  out.width = width;
  out.height = height;
  out.mask = std::move(m);
  std::size_t ones = 0;
  for (auto v : out.mask) ones += v;
  out.coverage =
      static_cast<double>(ones) / (static_cast<double>(width) * height);
  if (out.coverage < cfg.min_coverage)
    throw Error(Errc::insufficient_skin,
                "mask coverage " + format_double(out.coverage) +
                    " below minimum " + format_double(cfg.min_coverage));
  return out;
}

std::vector<SkinMask> compute_masks(const FrameSequence& seq,
                                    const RoiConfig& cfg) {
  const std::size_t n = seq.frames.size();
  std::vector<SkinMask> masks(n);
  if (cfg.static_mask && n > 0) {
    const SkinMask first = skin_mask(seq.frames[0], seq.width, seq.height, cfg);
    for (auto& m : masks) m = first;
    return masks;
  }
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      masks[i] = skin_mask(seq.frames[i], seq.width, seq.height, cfg);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return masks;
}

RgbTrace spatial_average(const FrameSequence& seq,
                         const std::vector<SkinMask>& masks) {
  const std::size_t n = seq.frames.size();
  if (masks.size() != n)
    throw Error(Errc::shape_mismatch, "mask count differs from frame count");
  RgbTrace trace;
  trace.fps = seq.fps;
  trace.r.resize(n);
  trace.g.resize(n);
  trace.b.resize(n);
  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(n); ++f) {
    try {
      const auto& frame = seq.frames[f];
      const auto& mask = masks[f].mask;
      double sum[3] = {0, 0, 0};
      std::size_t count = 0;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++count;
        sum[0] += frame[3 * i];
        sum[1] += frame[3 * i + 1];
        sum[2] += frame[3 * i + 2];
      }
      if (count == 0)
        throw Error(Errc::insufficient_skin,
                    "empty mask at frame " + std::to_string(f));
      trace.r[f] = sum[0] / static_cast<double>(count);
      trace.g[f] = sum[1] / static_cast<double>(count);
      trace.b[f] = sum[2] / static_cast<double>(count);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return trace;
}

RgbTrace extract_trace(const FrameSequence& seq, const RoiConfig& cfg) {
  return spatial_average(seq, compute_masks(seq, cfg));
}

void write_mask_pgm(const SkinMask& mask, const std::string& path) {
  std::string header = "P5\n" + std::to_string(mask.width) + " " +
                       std::to_string(mask.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + mask.mask.size());
  for (auto v : mask.mask) out.push_back(v ? 255 : 0);
  atomic_write_binary(path, out);
}

}  // namespace spo2::roi
