#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "spo2/error.hpp"

namespace spo2::dsp {

enum class FilterKind { lowpass, bandpass };

struct Biquad {
  double b0, b1, b2;  // numerator
  double a1, a2;      // denominator, a0 normalized to 1
};

// IIR filter designed by design_butterworth. Filtering runs on the
// second-order sections; the expanded b/a pair is kept for inspection
// and fixture comparison.
struct IirFilter {
  std::vector<double> b, a;
  std::vector<Biquad> sos;
  std::vector<std::complex<double>> poles;
  FilterKind kind = FilterKind::lowpass;
  int order = 0;
  double lo_hz = 0.0, hi_hz = 0.0, fs_hz = 0.0;

  std::complex<double> response(double f_hz) const;
  double gain(double f_hz) const { return std::abs(response(f_hz)); }
};

// Analog Butterworth prototype mapped by the bilinear transform with
// frequency pre-warping. For bandpass, `order` is the final digital
// order (order/2 analog prototype poles) and must be even; cutoff is
// [lo_hz, hi_hz]. For lowpass, lo_hz is the cutoff and hi_hz is ignored.
IirFilter design_butterworth(FilterKind kind, int order, double lo_hz,
                             double hi_hz, double fs_hz);

// Zero-phase forward-backward filtering with odd-reflection edge padding
// of length 3*order and steady-state initial conditions per pass.
std::vector<double> filtfilt(const IirFilter& f, std::span<const double> x);

struct Spectrogram {
  std::vector<std::vector<double>> mag;  // [freq][time]
  std::vector<double> freqs_hz;
  std::vector<double> times_s;
  double win_s = 0.0, hop_s = 0.0;

  std::size_t cols() const { return times_s.size(); }
  std::size_t rows() const { return freqs_hz.size(); }
};

// Hann-windowed, per-segment mean-removed STFT magnitudes. The FFT is
// zero-padded until bin spacing <= max_bin_hz and rows are restricted
// to [band_lo_hz, band_hi_hz].
Spectrogram stft(std::span<const double> x, double fs_hz, double win_s,
                 double hop_s, double band_lo_hz = 0.7,
                 double band_hi_hz = 3.0, double max_bin_hz = 0.01);

void save_spectrogram_csv(const Spectrogram& s, const std::string& path);

// Centered moving mean with shrinking windows at the edges; output
// length equals input length.
std::vector<double> moving_average(std::span<const double> x, int window);

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a);

}  // namespace spo2::dsp
