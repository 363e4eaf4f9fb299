#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spo2/pulse.hpp"
#include "spo2/types.hpp"

namespace spo2::features {

struct WindowPlan {
  double window_s = 10.0;
  double step_s = 1.0;
  double fps = 0.0;
  std::size_t length = 0;           // samples per window
  std::vector<std::size_t> start;   // start sample per window

  std::size_t count() const { return start.size(); }
  double center_s(std::size_t i) const {
    return (static_cast<double>(start[i]) + static_cast<double>(length) / 2.0) /
           fps;
  }
};

WindowPlan plan_windows(double duration_s, double fps, double window_s = 10.0,
                        double step_s = 1.0);

enum class AcMode { narrow_abp, wide_abp, fixed_band, none };
enum class AcEstimator { peak_to_valley_mean, peak_to_valley_median, stddev };

AcMode ac_mode_from_name(const std::string& name);
const char* ac_mode_name(AcMode m);

struct AcExtractorConfig {
  AcMode mode = AcMode::narrow_abp;
  double half_bw_hz = 0.1;       // 0.1 narrow, 0.5 wide
  double fixed_lo_hz = 1.0;
  double fixed_hi_hz = 2.0;
  AcEstimator estimator = AcEstimator::peak_to_valley_mean;
  double context_pad_s = 5.0;    // filter settling context around a window
  int filter_order = 8;
};

// Whole-channel 2nd-order 0.1 Hz lowpass (zero phase), then the median
// of the filtered samples inside each window.
std::vector<double> dc_component(std::span<const double> x, double fps,
                                 const WindowPlan& plan,
                                 double cutoff_hz = 0.1, int order = 2);

// Per-window AC magnitude from the bandpass-filtered signal; throws
// undefined-ac naming the first failing window.
std::vector<double> ac_component(std::span<const double> x, double fps,
                                 const WindowPlan& plan,
                                 const pulse::HrTrack& hr,
                                 const AcExtractorConfig& cfg);

struct FeatureRow {
  std::size_t index = 0;
  double t_center_s = 0.0;
  double r_norm[3] = {0, 0, 0};  // R(i,c) = AC/DC per channel
  double ratio_rg = 0.0, ratio_rb = 0.0, ratio_gb = 0.0;
  double hr_used_bpm = 0.0;
  std::optional<double> label;

  std::vector<double> values() const {
    return {r_norm[0], r_norm[1], r_norm[2], ratio_rg, ratio_rb, ratio_gb};
  }
};

struct SkippedWindow {
  std::size_t index;
  std::string reason;
};

struct FeatureSet {
  std::vector<FeatureRow> rows;
  std::vector<SkippedWindow> skipped;
  WindowPlan plan;
};

// Full 6-dim multi-channel RoR feature extraction; windows with an
// undefined AC or DC are skipped and recorded, not imputed.
FeatureSet feature_rows(const RgbTrace& trace, const pulse::HrTrack& hr,
                        const ReferenceTrace* reference,
                        const AcExtractorConfig& cfg, const WindowPlan& plan);

// Method-I baseline: the red/blue ratio-of-ratios as a single feature.
std::vector<double> two_channel_ror(const FeatureSet& set);

enum class ContactVariant { scully, lu };

// Contact-mode baseline features on raw windows: scully uses
// mean/stddev for DC/AC, lu uses the median peak-to-valley amplitude.
std::vector<double> baseline_contact_features(const RgbTrace& trace,
                                              const WindowPlan& plan,
                                              ContactVariant variant);

void save_features_csv(const FeatureSet& set, const std::string& path);
FeatureSet load_features_csv(const std::string& path);

}  // namespace spo2::features
