#pragma once

#include <string>

#include "spo2/types.hpp"

namespace spo2::ingest {

inline constexpr double kDefaultOximeterDelayS = 1.8;

// Raw frame container: a JSON header ("width, height, fps, count,
// pixel_format, data") next to one binary file of concatenated
// row-major RGB8 frames. `header_path` names the JSON file; the binary
// defaults to the same stem with extension .rgb8.
FrameSequence load_frames(const std::string& header_path);
void write_frames(const std::string& header_path, const FrameSequence& seq);

// CSV with header t,r,g,b; t strictly increasing and uniform within 1%.
RgbTrace load_trace(const std::string& path);
void save_trace(const std::string& path, const RgbTrace& trace);

// CSV with header t,spo2[,hr], uniformly sampled.
ReferenceTrace load_reference(const std::string& path);
void save_reference(const std::string& path, const ReferenceTrace& ref);

// Discards the first video_lead seconds of the trace, shifts the
// reference earlier by oximeter_delay (the oximeter reports late), and
// truncates both to the overlapping span.
AlignedSession align(const RgbTrace& trace, const ReferenceTrace& ref,
                     double video_lead_s,
                     double oximeter_delay_s = kDefaultOximeterDelayS);

// Nearest-neighbor resampling of the reference to the given rate.
ReferenceTrace resample_nearest(const ReferenceTrace& ref, double rate_hz);

}  // namespace spo2::ingest
