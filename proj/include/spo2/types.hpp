#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spo2/error.hpp"

namespace spo2 {

// One video as decoded RGB8 frames, row-major, interleaved R,G,B.
struct FrameSequence {
  int width = 0;
  int height = 0;
  double fps = 0.0;
  std::vector<std::vector<std::uint8_t>> frames;

  std::size_t frame_bytes() const {
    return static_cast<std::size_t>(width) * height * 3;
  }
  std::uint8_t at(std::size_t f, int x, int y, int c) const {
    return frames[f][(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double duration_s() const {
    return fps > 0 ? static_cast<double>(frames.size()) / fps : 0.0;
  }
};

// Spatially averaged R/G/B means per frame.
struct RgbTrace {
  double fps = 0.0;
  std::vector<double> r, g, b;

  std::size_t size() const { return r.size(); }
  double duration_s() const {
    return fps > 0 ? static_cast<double>(r.size()) / fps : 0.0;
  }
  const std::vector<double>& channel(int c) const {
    return c == 0 ? r : (c == 1 ? g : b);
  }
  std::vector<double>& channel(int c) { return c == 0 ? r : (c == 1 ? g : b); }

  void validate() const {
    if (r.size() != g.size() || r.size() != b.size())
      throw Error(Errc::invalid_trace, "channel lengths differ");
    if (r.empty()) throw Error(Errc::invalid_trace, "empty trace");
    if (fps <= 0) throw Error(Errc::invalid_trace, "fps must be positive");
  }
};

// Oximeter reference, uniformly sampled from t=0 at sample_rate.
struct ReferenceTrace {
  double sample_rate = 1.0;
  std::vector<double> spo2;
  std::optional<std::vector<double>> hr;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(spo2.size()) / sample_rate
                           : 0.0;
  }

  void validate() const {
    if (sample_rate <= 0)
      throw Error(Errc::invalid_trace, "reference sample_rate must be positive");
    for (double v : spo2)
      if (!(v >= 0.0 && v <= 100.0))
        throw Error(Errc::invalid_trace, "spo2 value outside [0,100]");
    if (hr && hr->size() != spo2.size())
      throw Error(Errc::invalid_trace, "hr/spo2 length mismatch");
  }
};

// Video trace and reference on a common time axis starting at 0.
struct AlignedSession {
  RgbTrace trace;
  ReferenceTrace reference;
  double duration_s = 0.0;
};

}  // namespace spo2
