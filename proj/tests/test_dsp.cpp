#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "reference.hpp"
#include "test_util.hpp"
#include "spo2/dsp.hpp"

using namespace spo2;
using doctest::Approx;

namespace {

std::vector<double> sine(double freq_hz, double fs, double duration_s,
                         double amplitude = 1.0, double phase = 0.0) {
  const std::size_t n = static_cast<std::size_t>(std::lround(duration_s * fs));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amplitude *
           std::sin(2.0 * std::numbers::pi * freq_hz * i / fs + phase);
  return x;
}

// least-squares a*sin + b*cos fit at a known frequency; `offset` is the
// sample index of x[0] on the original time base
std::pair<double, double> fit_sinusoid(std::span<const double> x, double freq,
                                       double fs, std::size_t offset = 0) {
  double ss = 0, sc = 0, cc = 0, xs = 0, xc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double arg = 2.0 * std::numbers::pi * freq * (i + offset) / fs;
    const double s = std::sin(arg);
    const double c = std::cos(arg);
    ss += s * s;
    sc += s * c;
    cc += c * c;
    xs += x[i] * s;
    xc += x[i] * c;
  }
  const double det = ss * cc - sc * sc;
  return {(xs * cc - xc * sc) / det, (xc * ss - xs * sc) / det};
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("lowpass butterworth has unit DC gain and -3dB at cutoff") {
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::lowpass, 2, 0.1, 0.0, 30.0);
  CHECK(f.gain(0.0) == Approx(1.0).epsilon(1e-9));
  CHECK(f.gain(0.1) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("lowpass coefficients match the reference fixture") {
  // scipy.signal.butter(2, 0.1, btype='low', fs=30)
  const double b_ref[] = {1.08058081546787661e-04, 2.16116163093575323e-04,
                          1.08058081546787661e-04};
  const double a_ref[] = {1.0, -1.97038289837419889e+00,
                          9.70815130700386053e-01};
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::lowpass, 2, 0.1, 0.0, 30.0);
  REQUIRE(f.b.size() == 3);
  REQUIRE(f.a.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(near(f.b[i], b_ref[i], 0.0, 1e-8));
    CHECK(near(f.a[i], a_ref[i], 0.0, 1e-8));
  }
}

TEST_CASE("8th-order bandpass coefficients match the reference fixture") {
  // scipy.signal.butter(4, [1.1, 1.3], btype='band', fs=30)
  const double b_ref[] = {1.82271121890452141e-07,  0.0,
                          -7.29084487561808564e-07, 0.0,
                          1.09362673134271279e-06,  0.0,
                          -7.29084487561808564e-07, 0.0,
                          1.82271121890452141e-07};
  const double a_ref[] = {1.0,
                          -7.64432604747336253e+00,
                          2.58053090059921040e+01,
                          -5.02323356907683518e+01,
                          6.16622570578418632e+01,
                          -4.88762187883230226e+01,
                          2.44307997785249142e+01,
                          -7.04178203290313220e+00,
                          8.96311078973195952e-01};
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::bandpass, 8, 1.1, 1.3, 30.0);
  REQUIRE(f.b.size() == 9);
  REQUIRE(f.a.size() == 9);
  for (int i = 0; i < 9; ++i) {
    CHECK(near(f.b[i], b_ref[i], 0.0, 1e-8));
    CHECK(near(f.a[i], a_ref[i], 0.0, 1e-8));
  }
}

TEST_CASE("invalid designs are rejected") {
  CHECK_THROWS_WITH_AS(
      dsp::design_butterworth(dsp::FilterKind::lowpass, 2, 15.0, 0.0, 30.0),
      doctest::Contains("invalid-design"), Error);
  CHECK_THROWS_AS(
      dsp::design_butterworth(dsp::FilterKind::bandpass, 7, 1.0, 2.0, 30.0),
      Error);
  CHECK_THROWS_AS(
      dsp::design_butterworth(dsp::FilterKind::bandpass, 8, 2.0, 1.0, 30.0),
      Error);
  CHECK_THROWS_AS(
      dsp::design_butterworth(dsp::FilterKind::lowpass, 0, 1.0, 0.0, 30.0),
      Error);
}

TEST_CASE("every randomized valid design is stable") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ufs(10.0, 120.0);
  std::uniform_int_distribution<int> uorder(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const double fs = ufs(rng);
    dsp::IirFilter f;
    if (trial % 2 == 0) {
      std::uniform_real_distribution<double> ufc(0.002, 0.45);
      f = dsp::design_butterworth(dsp::FilterKind::lowpass, uorder(rng) * 2,
                                  ufc(rng) * fs, 0.0, fs);
    } else {
      std::uniform_real_distribution<double> ulo(0.01, 0.35);
      std::uniform_real_distribution<double> ubw(0.005, 0.1);
      const double lo = ulo(rng) * fs;
      const double hi = lo + ubw(rng) * fs;
      if (hi >= 0.49 * fs) continue;
      f = dsp::design_butterworth(dsp::FilterKind::bandpass, uorder(rng) * 2,
                                  lo, hi, fs);
    }
    for (const auto& p : f.poles) CHECK(std::abs(p) < 1.0 - 1e-9);
  }
}

TEST_CASE("narrow bandpass passes the center and kills the far stopband") {
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::bandpass, 8, 1.1, 1.3, 30.0);
  CHECK(f.gain(1.2) >= 0.99);
  CHECK(f.gain(1.2 + 5 * 0.2) <= 0.01);  // center +- 5x bandwidth
  CHECK(f.gain(1.2 - 5 * 0.2) <= 0.01);
}

TEST_CASE("filtfilt preserves a passband sinusoid with zero lag") {
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::bandpass, 4, 1.0, 1.4, 30.0);
  const auto x = sine(1.2, 30.0, 60.0);
  const auto y = dsp::filtfilt(f, x);
  const auto [a, b] = fit_sinusoid(
      std::span<const double>(y.data() + 450, y.size() - 900), 1.2, 30.0, 450);
  CHECK(std::hypot(a, b) == Approx(1.0).epsilon(0.01));
  CHECK(std::abs(std::atan2(b, a)) < 0.01);  // zero phase
}

TEST_CASE("filtfilt maps a constant to itself through a lowpass") {
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::lowpass, 2, 0.1, 0.0, 30.0);
  std::vector<double> x(300, 3.7);
  const auto y = dsp::filtfilt(f, x);
  for (double v : y) CHECK(v == Approx(3.7).epsilon(1e-6));
}

TEST_CASE("filtfilt attenuates the far stopband by at least 40 dB") {
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::bandpass, 8, 1.1, 1.3, 30.0);
  const double f_stop = 3.9;  // 3x upper cutoff
  const auto x = sine(f_stop, 30.0, 60.0);
  const auto y = dsp::filtfilt(f, x);
  const auto [a, b] = fit_sinusoid(
      std::span<const double>(y.data() + 300, y.size() - 600), f_stop, 30.0,
      300);
  const double measured = std::hypot(a, b);
  CHECK(measured <= 1e-2);            // >= 40 dB down end to end
  CHECK(f.gain(f_stop) <= 1e-4);      // the design alone already gives 80 dB
}

TEST_CASE("filtfilt rejects too-short inputs") {
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::bandpass, 8, 1.1, 1.3, 30.0);
  std::vector<double> x(24, 1.0);  // needs > 3*order = 24
  CHECK_THROWS_WITH_AS(dsp::filtfilt(f, x),
                       doctest::Contains("insufficient-samples"), Error);
}

TEST_CASE("filtfilt is linear and keeps palindromes palindromic") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  const auto f =
      dsp::design_butterworth(dsp::FilterKind::lowpass, 2, 1.0, 0.0, 30.0);
  std::vector<double> x(200), y(200);
  for (auto& v : x) v = gauss(rng);
  for (auto& v : y) v = gauss(rng);
  std::vector<double> mix(200);
  for (int i = 0; i < 200; ++i) mix[i] = 2.5 * x[i] - 1.25 * y[i];
  const auto fx = dsp::filtfilt(f, x);
  const auto fy = dsp::filtfilt(f, y);
  const auto fmix = dsp::filtfilt(f, mix);
  for (int i = 0; i < 200; ++i)
    CHECK(near(fmix[i], 2.5 * fx[i] - 1.25 * fy[i], 1e-9, 1e-9));

  // palindromic input maps to a palindromic output away from the edge
  // transients of the two passes
  std::vector<double> sym(x.begin(), x.end());
  sym.insert(sym.end(), x.rbegin(), x.rend());
  const auto fast =
      dsp::design_butterworth(dsp::FilterKind::lowpass, 2, 3.0, 0.0, 30.0);
  const auto fsym = dsp::filtfilt(fast, sym);
  for (std::size_t i = 80; i + 80 < fsym.size(); ++i)
    CHECK(near(fsym[i], fsym[fsym.size() - 1 - i], 1e-9, 1e-9));
}

TEST_CASE("stft finds a pure tone within one bin") {
  const auto x = sine(1.2, 30.0, 40.0);
  const auto s = dsp::stft(x, 30.0, 10.0, 1.0);
  REQUIRE(s.cols() > 0);
  CHECK(s.freqs_hz[1] - s.freqs_hz[0] <= 0.01);
  for (std::size_t t = 0; t < s.cols(); ++t) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < s.rows(); ++r)
      if (s.mag[r][t] > s.mag[best][t]) best = r;
    CHECK(std::abs(s.freqs_hz[best] - 1.2) <= 0.01);
  }
}

TEST_CASE("stft of the zero signal is all zeros") {
  std::vector<double> x(600, 0.0);
  const auto s = dsp::stft(x, 30.0, 10.0, 1.0);
  for (const auto& row : s.mag)
    for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("stft column satisfies Parseval against time-domain energy") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  std::vector<double> x(400);
  for (auto& v : x) v = gauss(rng);
  // full one-sided band so the column carries the whole spectrum
  const auto s = dsp::stft(x, 30.0, 10.0, 1.0, 0.0, 15.0);
  const std::size_t wlen = 300;
  double mean = 0.0;
  for (std::size_t i = 0; i < wlen; ++i) mean += x[i];
  mean /= static_cast<double>(wlen);
  double energy = 0.0;
  for (std::size_t i = 0; i < wlen; ++i) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i /
                                           static_cast<double>(wlen)));
    energy += (x[i] - mean) * w * (x[i] - mean) * w;
  }
  const std::size_t nfft = (s.rows() - 1) * 2;
  double spec_energy = s.mag[0][0] * s.mag[0][0] +
                       s.mag[s.rows() - 1][0] * s.mag[s.rows() - 1][0];
  for (std::size_t r = 1; r + 1 < s.rows(); ++r)
    spec_energy += 2.0 * s.mag[r][0] * s.mag[r][0];
  CHECK(spec_energy / static_cast<double>(nfft) ==
        Approx(energy).epsilon(1e-6));
}

TEST_CASE("stft magnitudes ignore constant offsets") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  std::vector<double> x(400), y(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = gauss(rng);
    y[i] = x[i] + 123.456;
  }
  const auto sx = dsp::stft(x, 30.0, 10.0, 1.0);
  const auto sy = dsp::stft(y, 30.0, 10.0, 1.0);
  for (std::size_t r = 0; r < sx.rows(); ++r)
    for (std::size_t t = 0; t < sx.cols(); ++t)
      CHECK(near(sx.mag[r][t], sy.mag[r][t], 1e-9, 1e-9));
}

TEST_CASE("stft rejects windows longer than the signal") {
  std::vector<double> x(100, 1.0);
  CHECK_THROWS_WITH_AS(dsp::stft(x, 30.0, 10.0, 1.0),
                       doctest::Contains("insufficient-samples"), Error);
}

TEST_CASE("fft magnitudes agree with the direct DFT") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  std::vector<double> x(64);
  for (auto& v : x) v = gauss(rng);
  std::vector<std::complex<double>> buf(x.begin(), x.end());
  dsp::fft(buf);
  const auto ref = reference::dft_magnitude(x);
  for (std::size_t k = 0; k <= 32; ++k)
    CHECK(near(std::abs(buf[k]), ref[k], 1e-9, 1e-9));
}

TEST_CASE("moving average handles constants, edges, and the naive oracle") {
  std::vector<double> c(50, 4.2);
  for (double v : dsp::moving_average(c, 9)) CHECK(v == Approx(4.2));

  const std::vector<double> x{0.0, 10.0, 0.0};
  const auto y = dsp::moving_average(x, 3);
  CHECK(y[0] == Approx(5.0));
  CHECK(y[1] == Approx(10.0 / 3.0));
  CHECK(y[2] == Approx(5.0));

  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  std::vector<double> r(500);
  for (auto& v : r) v = gauss(rng);
  for (int w : {1, 2, 7, 10, 499, 600}) {
    const auto got = dsp::moving_average(r, w);
    const auto want = reference::moving_average(r, w);
    for (std::size_t i = 0; i < r.size(); ++i)
      CHECK(near(got[i], want[i], 1e-9, 1e-9));
  }
}

}  // TEST_SUITE
