#pragma once

#include <string>
#include <vector>

#include "spo2/dsp.hpp"
#include "spo2/types.hpp"

namespace spo2::pulse {

struct RppgSignal {
  double fps = 0.0;
  std::vector<double> samples;
};

enum class TrackerMethod { peak, weighted, dp };

const char* tracker_name(TrackerMethod m);
TrackerMethod tracker_from_name(const std::string& name);

struct HrTrack {
  std::vector<double> times_s;
  std::vector<double> bpm;
  TrackerMethod method = TrackerMethod::dp;

  std::size_t size() const { return bpm.size(); }
};

// Plane-orthogonal-to-skin rPPG with window-mean temporal normalization
// and overlap-add; output has the trace's length and is zero-mean.
RppgSignal pos_rppg(const RgbTrace& trace, double window_s = 1.6);

// Per-column argmax of the squared magnitude.
HrTrack hr_peak(const dsp::Spectrogram& spec);

// Per-column energy-weighted centroid frequency.
HrTrack hr_weighted(const dsp::Spectrogram& spec);

struct DpOptions {
  double jump_penalty = 0.05;  // per bin of frequency change
  int max_jump = 10;          // bins per column step
};

// Single best trace through the spectrogram maximizing
// sum_t log(M+eps) - penalty * sum_t |f_t - f_{t-1}| by exact dynamic
// programming; eps floors zero magnitudes.
HrTrack hr_dp(const dsp::Spectrogram& spec, const DpOptions& opt = {});

// Value at the nearest track time; clamps beyond the ends. An exact
// midpoint resolves to the earlier entry.
double hr_at(const HrTrack& track, double t_s);

void save_hr_csv(const HrTrack& track, const std::string& path);

}  // namespace spo2::pulse
