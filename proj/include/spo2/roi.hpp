#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spo2/types.hpp"

namespace spo2::roi {

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct SkinMask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> mask;  // 1 = skin
  double coverage = 0.0;           // fraction of true pixels over the frame

  bool at(int x, int y) const {
    return mask[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

struct RoiConfig {
  std::optional<Rect> rect;       // defaults to the full frame
  int morph_radius = 2;           // disk radius for erosion and dilation
  int median_window = 7;          // odd
  double min_coverage = 0.01;
  bool skin_above_threshold = true;
  bool static_mask = false;       // reuse frame 0's mask for all frames
};

// Cr channel per the ITU-R BT.601 full-range convention, clamped to
// [0,255]. Gray pixels map to exactly 128.
std::vector<double> rgb_to_cr(const std::vector<std::uint8_t>& frame,
                              int width, int height);

// Threshold maximizing between-class variance over the class split
// {v <= t} vs {v > t}; ties resolve to the smallest t.
int otsu_threshold(const std::array<std::uint64_t, 256>& histogram);

SkinMask skin_mask(const std::vector<std::uint8_t>& frame, int width,
                   int height, const RoiConfig& cfg);

// Per-frame masks, data-parallel over frames.
std::vector<SkinMask> compute_masks(const FrameSequence& seq,
                                    const RoiConfig& cfg);

RgbTrace spatial_average(const FrameSequence& seq,
                         const std::vector<SkinMask>& masks);

// compute_masks + spatial_average, honoring cfg.static_mask.
RgbTrace extract_trace(const FrameSequence& seq, const RoiConfig& cfg);

// Binary PGM, maxval 255, skin = 255.
void write_mask_pgm(const SkinMask& mask, const std::string& path);

}  // namespace spo2::roi
