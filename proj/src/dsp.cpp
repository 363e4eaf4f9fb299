#include "spo2/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "spo2/io_util.hpp"

namespace spo2::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

// Expands a set of roots into real polynomial coefficients, highest
// degree first, leading coefficient 1.
std::vector<double> poly_from_roots(
    const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

// Left-half-plane poles of the normalized analog Butterworth prototype.
std::vector<std::complex<double>> butterworth_prototype(int n) {
  std::vector<std::complex<double>> p;
  p.reserve(n);
  for (int m = -n + 1; m <= n - 1; m += 2)
    p.push_back(-std::exp(std::complex<double>(0.0, kPi * m / (2.0 * n))));
  return p;
}

std::complex<double> bilinear_map(std::complex<double> s, double fs2) {
  return (fs2 + s) / (fs2 - s);
}

// Denominators of the second-order sections: conjugate pairs become one
// biquad each, leftover real poles are paired among themselves, and a
// final unpaired real pole (odd lowpass order) yields a first-order
// section flagged by a2 = 0 with a1 as the lone pole.
struct SectionPoles {
  double a1, a2;
  bool first_order;
  double radius;
};

std::vector<SectionPoles> group_poles(
    const std::vector<std::complex<double>>& poles) {
  std::vector<SectionPoles> out;
  std::vector<double> reals;
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    if (std::abs(poles[i].imag()) < 1e-12) {
      reals.push_back(poles[i].real());
      continue;
    }
    for (std::size_t j = i + 1; j < poles.size(); ++j) {
      if (!used[j] && std::abs(poles[j] - std::conj(poles[i])) < 1e-9) {
        used[j] = true;
        break;
      }
    }
    out.push_back({-2.0 * poles[i].real(), std::norm(poles[i]), false,
                   std::abs(poles[i])});
  }
  std::sort(reals.begin(), reals.end(),
            [](double x, double y) { return std::abs(x) > std::abs(y); });
  std::size_t i = 0;
  for (; i + 1 < reals.size(); i += 2)
    out.push_back({-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1], false,
                   std::max(std::abs(reals[i]), std::abs(reals[i + 1]))});
  if (i < reals.size()) out.push_back({-reals[i], 0.0, true, std::abs(reals[i])});
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.radius > y.radius;
  });
  return out;
}

}  // namespace

std::complex<double> IirFilter::response(double f_hz) const {
  const std::complex<double> z =
      std::exp(std::complex<double>(0.0, 2.0 * kPi * f_hz / fs_hz));
  const std::complex<double> zi = 1.0 / z;
  std::complex<double> h = 1.0;
  for (const auto& s : sos) {
    h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) /
         (1.0 + s.a1 * zi + s.a2 * zi * zi);
  }
  return h;
}

IirFilter design_butterworth(FilterKind kind, int order, double lo_hz,
                             double hi_hz, double fs_hz) {
  if (fs_hz <= 0) throw Error(Errc::invalid_design, "fs must be positive");
  if (order < 1) throw Error(Errc::invalid_design, "order must be >= 1");
  const double nyq = fs_hz / 2.0;

  IirFilter f;
  f.kind = kind;
  f.order = order;
  f.fs_hz = fs_hz;
  const double fs2 = 2.0 * fs_hz;

  std::vector<std::complex<double>> zd, pd;
  double kd = 0.0;

  if (kind == FilterKind::lowpass) {
    if (!(lo_hz > 0 && lo_hz < nyq))
      throw Error(Errc::invalid_design, "lowpass cutoff must lie in (0, fs/2)");
    f.lo_hz = lo_hz;
    f.hi_hz = 0.0;
    const double wc = fs2 * std::tan(kPi * lo_hz / fs_hz);
    auto p = butterworth_prototype(order);
    std::complex<double> k = std::pow(wc, order);
    for (auto& pi : p) pi *= wc;
    // bilinear transform; zeros of the analog lowpass land at z = -1
    std::complex<double> denom = 1.0;
    for (auto& pi : p) {
      pd.push_back(bilinear_map(pi, fs2));
      denom *= (fs2 - pi);
    }
    zd.assign(order, std::complex<double>(-1.0, 0.0));
    kd = (k / denom).real();
  } else {
    if (order % 2 != 0)
      throw Error(Errc::invalid_design, "bandpass order must be even");
    if (!(lo_hz > 0 && hi_hz > lo_hz && hi_hz < nyq))
      throw Error(Errc::invalid_design,
                  "bandpass cutoffs must satisfy 0 < lo < hi < fs/2");
    f.lo_hz = lo_hz;
    f.hi_hz = hi_hz;
    const int n = order / 2;
    const double w1 = fs2 * std::tan(kPi * lo_hz / fs_hz);
    const double w2 = fs2 * std::tan(kPi * hi_hz / fs_hz);
    const double bw = w2 - w1;
    const double w0 = std::sqrt(w1 * w2);
    auto plp = butterworth_prototype(n);
    std::vector<std::complex<double>> pbp;
    pbp.reserve(order);
    for (auto& pi : plp) {
      const std::complex<double> ps = pi * (bw / 2.0);
      const std::complex<double> d = std::sqrt(ps * ps - w0 * w0);
      pbp.push_back(ps + d);
      pbp.push_back(ps - d);
    }
    const double kbp = std::pow(bw, n);
    // n analog zeros sit at s = 0; bilinear maps them to z = +1 and the
    // remaining n degree-deficit zeros to z = -1.
    std::complex<double> num = std::pow(fs2, n);
    std::complex<double> denom = 1.0;
    for (auto& pi : pbp) {
      pd.push_back(bilinear_map(pi, fs2));
      denom *= (fs2 - pi);
    }
    zd.assign(n, std::complex<double>(1.0, 0.0));
    zd.insert(zd.end(), n, std::complex<double>(-1.0, 0.0));
    kd = (kbp * num / denom).real();
  }

  f.poles = pd;
  for (const auto& p : pd)
    if (std::abs(p) >= 1.0)
      throw Error(Errc::invalid_design, "designed filter is unstable");

  // expanded transfer function (fixture comparisons, inspection)
  f.a = poly_from_roots(pd);
  f.b = poly_from_roots(zd);
  for (auto& c : f.b) c *= kd;

  // second-order sections: each bandpass biquad carries one z=+1 and one
  // z=-1 zero, lowpass biquads carry (z+1)^2.
  const auto groups = group_poles(pd);
  const int nsec = static_cast<int>(groups.size());
  const double gsec = std::pow(std::abs(kd), 1.0 / nsec);
  const double sign = kd < 0 ? -1.0 : 1.0;
  for (int i = 0; i < nsec; ++i) {
    const auto& gp = groups[i];
    const double g = gsec * (i == 0 ? sign : 1.0);
    Biquad s{g, 0.0, 0.0, gp.a1, gp.a2};
    if (gp.first_order) {
      s.b1 = g;  // single zero at -1
    } else if (kind == FilterKind::lowpass) {
      s.b1 = 2.0 * g;
      s.b2 = g;
    } else {
      s.b2 = -g;
    }
    f.sos.push_back(s);
  }
  return f;
}

namespace {

// Steady-state unit-level state for each section, scaled by the
// cumulative DC gain of the preceding sections.
std::vector<std::array<double, 2>> sos_step_state(
    const std::vector<Biquad>& sos) {
  std::vector<std::array<double, 2>> zi(sos.size());
  double carry = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    const double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    zi[i] = {carry * (g - s.b0), carry * (s.b2 - s.a2 * g)};
    carry *= g;
  }
  return zi;
}

void sos_filter(const std::vector<Biquad>& sos, std::vector<double>& x,
                std::vector<std::array<double, 2>> zi) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    double z0 = zi[k][0], z1 = zi[k][1];
    for (auto& v : x) {
      const double in = v;
      const double out = s.b0 * in + z0;
      z0 = s.b1 * in - s.a1 * out + z1;
      z1 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

std::vector<double> filtfilt(const IirFilter& f, std::span<const double> x) {
  const std::size_t padlen = 3 * static_cast<std::size_t>(f.order);
  if (x.size() <= padlen)
    throw Error(Errc::insufficient_samples,
                "filtfilt input must exceed 3*order samples");

  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * padlen);
  for (std::size_t i = 0; i < padlen; ++i)
    ext[i] = 2.0 * x[0] - x[padlen - i];
  std::copy(x.begin(), x.end(), ext.begin() + padlen);
  for (std::size_t i = 0; i < padlen; ++i)
    ext[padlen + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const auto zi = sos_step_state(f.sos);

  auto scaled = [&zi](double v) {
    auto z = zi;
    for (auto& s : z) {
      s[0] *= v;
      s[1] *= v;
    }
    return z;
  };

  sos_filter(f.sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  sos_filter(f.sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + padlen, ext.begin() + padlen + n);
}

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw Error(Errc::shape_mismatch, "fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

Spectrogram stft(std::span<const double> x, double fs_hz, double win_s,
                 double hop_s, double band_lo_hz, double band_hi_hz,
                 double max_bin_hz) {
  if (hop_s <= 0) throw Error(Errc::invalid_design, "stft hop must be positive");
  const std::size_t wlen = static_cast<std::size_t>(std::lround(win_s * fs_hz));
  if (wlen < 2 || wlen > x.size())
    throw Error(Errc::insufficient_samples,
                "stft window exceeds signal duration");
  const std::size_t hop =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hop_s * fs_hz)));

  std::size_t nfft = 1;
  while (nfft < wlen || fs_hz / static_cast<double>(nfft) > max_bin_hz)
    nfft <<= 1;

  std::vector<double> hann(wlen);
  for (std::size_t i = 0; i < wlen; ++i)
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(wlen)));

  Spectrogram s;
  s.win_s = win_s;
  s.hop_s = hop_s;
  std::size_t lo_bin = nfft, hi_bin = 0;
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    const double fk = fs_hz * static_cast<double>(k) / static_cast<double>(nfft);
    if (fk >= band_lo_hz && fk <= band_hi_hz) {
      lo_bin = std::min(lo_bin, k);
      hi_bin = std::max(hi_bin, k);
    }
  }
  if (lo_bin > hi_bin)
    throw Error(Errc::invalid_design, "stft band contains no FFT bins");
  for (std::size_t k = lo_bin; k <= hi_bin; ++k)
    s.freqs_hz.push_back(fs_hz * static_cast<double>(k) /
                         static_cast<double>(nfft));

  for (std::size_t start = 0; start + wlen <= x.size(); start += hop) {
    std::vector<std::complex<double>> buf(nfft, 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < wlen; ++i) mean += x[start + i];
    mean /= static_cast<double>(wlen);
    for (std::size_t i = 0; i < wlen; ++i)
      buf[i] = (x[start + i] - mean) * hann[i];
    fft(buf);
    s.times_s.push_back((static_cast<double>(start) +
                         static_cast<double>(wlen) / 2.0) /
                        fs_hz);
    if (s.mag.empty()) s.mag.resize(hi_bin - lo_bin + 1);
    for (std::size_t k = lo_bin; k <= hi_bin; ++k)
      s.mag[k - lo_bin].push_back(std::abs(buf[k]));
  }
  if (s.times_s.empty())
    throw Error(Errc::insufficient_samples, "stft produced no columns");
  return s;
}

void save_spectrogram_csv(const Spectrogram& s, const std::string& path) {
  std::string out = "freq_hz";
  for (double t : s.times_s) out += "," + format_double(t);
  out += "\n";
  for (std::size_t r = 0; r < s.rows(); ++r) {
    out += format_double(s.freqs_hz[r]);
    for (double m : s.mag[r]) out += "," + format_double(m);
    out += "\n";
  }
  atomic_write(path, out);
}

std::vector<double> moving_average(std::span<const double> x, int window) {
  if (window < 1)
    throw Error(Errc::invalid_design, "moving average window must be >= 1");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> prefix(n + 1, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  const std::ptrdiff_t left = (window - 1) / 2;
  const std::ptrdiff_t right = window / 2;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - left);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + right);
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace spo2::dsp
