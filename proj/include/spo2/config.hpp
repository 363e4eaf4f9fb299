#pragma once

#include <string>
#include <vector>

#include "spo2/features.hpp"
#include "spo2/pulse.hpp"
#include "spo2/roi.hpp"

namespace spo2 {

// Every pipeline default in one declarative tree. Config files must
// spell out the full schema; CLI flags override individual values.
struct PipelineParams {
  double window_s = 10.0;
  double step_s = 1.0;

  roi::RoiConfig roi;

  double pos_window_s = 1.6;

  double stft_win_s = 10.0;
  double stft_hop_s = 1.0;
  double band_lo_hz = 0.7;   // 42 bpm
  double band_hi_hz = 3.0;   // 180 bpm
  double max_bin_hz = 0.01;

  pulse::TrackerMethod tracker = pulse::TrackerMethod::dp;
  double dp_jump_penalty = 0.05;
  int dp_max_jump = 10;

  features::AcExtractorConfig ac;
  double dc_cutoff_hz = 0.1;
  int dc_order = 2;

  std::vector<double> ridge_lambda_grid;
  std::vector<double> svr_c_grid;
  std::vector<double> svr_gamma_grid;
  double svr_epsilon = 0.1;
  double svr_tol = 1e-3;
  long svr_max_iter = 2000000;

  int smooth_windows = 10;

  double video_lead_s = 0.0;
  double oximeter_delay_s = 1.8;

  PipelineParams();

  void validate() const;  // throws invalid-config naming the field
};

PipelineParams load_config(const std::string& path);
void save_config(const std::string& path, const PipelineParams& p);

}  // namespace spo2
