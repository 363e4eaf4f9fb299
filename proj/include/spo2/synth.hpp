#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spo2/types.hpp"

namespace spo2::synth {

// Beer-Lambert scene: light spectrum, camera responsivities, extinction
// curves and the pulsatile path-length model
//   l(t) = path_base + path_delta * (1 + sin(phase(t))) / 2.
struct OptoScene {
  std::vector<double> wavelength_nm;           // strictly increasing grid
  std::vector<double> light;                   // I(lambda), relative
  std::array<std::vector<double>, 3> responsivity;  // r, g, b
  std::vector<double> eps_hb;                  // 1/(mol*cm)
  std::vector<double> eps_hbo2;
  std::vector<double> eps_tissue;
  double conc_tissue = 1.0;                    // mol
  double conc_hb_total = 2.3e-3;               // mol, Hb + HbO2
  double path_tissue_cm = 0.1;
  double path_base_cm = 0.02;
  double path_delta_cm = 5e-4;
  double pulse_phase = 0.0;

  void validate() const;
};

// Stylized hemoglobin-like extinction curves over 400-700 nm with the
// red/blue contrast flip of oxy vs deoxy hemoglobin, plus Gaussian RGB
// responsivities centered at 620/540/460 nm (60 nm FWHM).
OptoScene default_scene();

// Near-delta responsivities at the given wavelengths; used to compare
// the pipeline against the narrowband closed form.
OptoScene narrowband_scene(double red_nm = 620.0, double green_nm = 540.0,
                           double blue_nm = 460.0);

OptoScene load_scene(const std::string& path);
void save_scene(const std::string& path, const OptoScene& scene);

struct GroundTruth {
  double fps = 30.0;
  std::vector<double> spo2;  // percent, per frame
  std::vector<double> hr;    // bpm, per frame

  double duration_s() const {
    return fps > 0 ? static_cast<double>(spo2.size()) / fps : 0.0;
  }
};

struct BreathHoldParams {
  double duration_s = 110.0;
  double fps = 30.0;
  int dips = 3;
  double spo2_high = 98.5;
  double spo2_low = 90.0;
  double hr_base_bpm = 72.0;
  double hr_rise_bpm = 12.0;   // transient rise during each hold
  double hr_drift_bpm = 0.0;   // linear drift over the whole session
  bool hr_covary = true;
};

// Piecewise-smooth SpO2 dips (cosine ramps) with HR either co-varying
// with the holds or following only the linear drift.
GroundTruth breath_hold_truth(const BreathHoldParams& p);

GroundTruth load_truth(const std::string& path);
void save_truth(const std::string& path, const GroundTruth& truth);
ReferenceTrace truth_to_reference(const GroundTruth& truth,
                                  double rate_hz = 1.0);

// Channel responses at one instant by trapezoidal quadrature of
// I * exp(-mu_d) * r_c over the wavelength grid.
std::array<double, 3> camera_response(const OptoScene& scene, double spo2_pct,
                                      double path_cm);

// Additive sinusoid at a frequency offset from the instantaneous HR,
// injected into the channels with fixed weights relative to each
// channel's pulsatile amplitude. Phases are per-channel random.
struct Interference {
  double offset_hz = 0.3;
  double amplitude_rel = 0.5;
  std::array<double, 3> weights{1.0, 1.0, 1.0};
};

struct TraceOptions {
  std::optional<double> noise_snr_db;  // SNR vs the pulsatile component
  std::optional<Interference> interference;
  bool quantize_8bit = false;
  std::uint64_t seed = 1;
};

RgbTrace generate_trace(const OptoScene& scene, const GroundTruth& truth,
                        const TraceOptions& opt = {});

struct HandGeometry {
  double cx = 0.0, cy = 0.0;  // ellipse center, pixels
  double rx = 0.0, ry = 0.0;  // ellipse radii, pixels
};

// Dark background with an elliptical "hand" filled with the trace color
// plus per-pixel Gaussian texture noise.
FrameSequence render_frames(const RgbTrace& trace, int width, int height,
                            const HandGeometry& hand,
                            double texture_sigma = 2.0,
                            std::uint64_t seed = 1);

struct BlurKernel {
  double sigma = 0.0;
  int support = 0;
  std::vector<double> weights;  // support x support, sums to 1

  double at(int dx, int dy) const {
    const int half = support / 2;
    return weights[static_cast<std::size_t>(dy + half) * support +
                   (dx + half)];
  }
};

BlurKernel make_gaussian_kernel(double sigma, int support);

// Per-frame convolution with the truncated normalized Gaussian kernel,
// replicate padding at borders.
FrameSequence gaussian_blur(const FrameSequence& seq, double sigma,
                            int support);

// Narrowband closed form: log-ratio of the diastole/systole responses,
// evaluated at the channel's peak-responsivity wavelength.
double analytic_log_ratio(const OptoScene& scene, double spo2_pct,
                          int channel);
double analytic_ror(const OptoScene& scene, double spo2_pct, int channel_a,
                    int channel_b);

}  // namespace spo2::synth
