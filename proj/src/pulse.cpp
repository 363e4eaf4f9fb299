#include "spo2/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spo2/io_util.hpp"

namespace spo2::pulse {

const char* tracker_name(TrackerMethod m) {
  switch (m) {
    case TrackerMethod::peak: return "peak";
    case TrackerMethod::weighted: return "weighted";
    case TrackerMethod::dp: return "dp";
  }
  return "?";
}

TrackerMethod tracker_from_name(const std::string& name) {
  if (name == "peak") return TrackerMethod::peak;
  if (name == "weighted") return TrackerMethod::weighted;
  if (name == "dp") return TrackerMethod::dp;
  throw Error(Errc::invalid_config, "unknown tracker '" + name + "'");
}

RppgSignal pos_rppg(const RgbTrace& trace, double window_s) {
  trace.validate();
  const std::size_t n = trace.size();
  const std::size_t l =
      static_cast<std::size_t>(std::lround(window_s * trace.fps));
  if (l < 2 || l > n)
    throw Error(Errc::insufficient_samples,
                "trace shorter than the POS window");

  RppgSignal out;
  out.fps = trace.fps;
  out.samples.assign(n, 0.0);

  std::vector<double> s1(l), s2(l);
  for (std::size_t end = l; end <= n; ++end) {
    const std::size_t start = end - l;
    double mean[3] = {0, 0, 0};
    for (int c = 0; c < 3; ++c) {
      const auto& ch = trace.channel(c);
      for (std::size_t i = start; i < end; ++i) mean[c] += ch[i];
      mean[c] /= static_cast<double>(l);
      if (mean[c] <= 0)
        throw Error(Errc::invalid_trace,
                    "nonpositive channel mean in POS window");
    }
    // projection of the normalized channels onto [[0,1,-1],[-2,1,1]]
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      const double rn = trace.r[start + i] / mean[0];
      const double gn = trace.g[start + i] / mean[1];
      const double bn = trace.b[start + i] / mean[2];
      s1[i] = gn - bn;
      s2[i] = -2.0 * rn + gn + bn;
      m1 += s1[i];
      m2 += s2[i];
    }
    m1 /= static_cast<double>(l);
    m2 /= static_cast<double>(l);
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      v1 += (s1[i] - m1) * (s1[i] - m1);
      v2 += (s2[i] - m2) * (s2[i] - m2);
    }
    const double sd1 = std::sqrt(v1 / static_cast<double>(l));
    const double sd2 = std::sqrt(v2 / static_cast<double>(l));
    const double alpha = sd2 > 0 ? sd1 / sd2 : 0.0;

    double hmean = 0.0;
    for (std::size_t i = 0; i < l; ++i) hmean += s1[i] + alpha * s2[i];
    hmean /= static_cast<double>(l);
    for (std::size_t i = 0; i < l; ++i)
      out.samples[start + i] += s1[i] + alpha * s2[i] - hmean;
  }

  const double gmean =
      std::accumulate(out.samples.begin(), out.samples.end(), 0.0) /
      static_cast<double>(n);
  for (auto& v : out.samples) v -= gmean;
  return out;
}

namespace {

void check_spec(const dsp::Spectrogram& spec) {
  if (spec.rows() == 0 || spec.cols() == 0)
    throw Error(Errc::insufficient_samples, "empty spectrogram");
}

}  // namespace

HrTrack hr_peak(const dsp::Spectrogram& spec) {
  check_spec(spec);
  HrTrack track;
  track.method = TrackerMethod::peak;
  track.times_s = spec.times_s;
  track.bpm.resize(spec.cols());
  for (std::size_t t = 0; t < spec.cols(); ++t) {
    std::size_t best = 0;
    double best_e = -1.0;
    for (std::size_t f = 0; f < spec.rows(); ++f) {
      const double e = spec.mag[f][t] * spec.mag[f][t];
      if (e > best_e) {
        best_e = e;
        best = f;
      }
    }
    if (best_e <= 0)
      throw Error(Errc::undefined_hr,
                  "all-zero spectrogram column " + std::to_string(t));
    track.bpm[t] = 60.0 * spec.freqs_hz[best];
  }
  return track;
}

HrTrack hr_weighted(const dsp::Spectrogram& spec) {
  check_spec(spec);
  HrTrack track;
  track.method = TrackerMethod::weighted;
  track.times_s = spec.times_s;
  track.bpm.resize(spec.cols());
  for (std::size_t t = 0; t < spec.cols(); ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t f = 0; f < spec.rows(); ++f) {
      const double e = spec.mag[f][t] * spec.mag[f][t];
      num += spec.freqs_hz[f] * e;
      den += e;
    }
    if (den <= 0)
      throw Error(Errc::undefined_hr,
                  "zero total energy in column " + std::to_string(t));
    track.bpm[t] = 60.0 * num / den;
  }
  return track;
}

HrTrack hr_dp(const dsp::Spectrogram& spec, const DpOptions& opt) {
  check_spec(spec);
  const std::ptrdiff_t F = static_cast<std::ptrdiff_t>(spec.rows());
  const std::size_t T = spec.cols();
  const std::ptrdiff_t jump = std::max(0, opt.max_jump);

  double max_mag = 0.0;
  for (const auto& row : spec.mag)
    for (double v : row) max_mag = std::max(max_mag, v);
  const double eps = max_mag > 0 ? 1e-12 * max_mag : 1e-300;

  std::vector<std::vector<double>> score(
      T, std::vector<double>(static_cast<std::size_t>(F)));
  std::vector<std::vector<std::ptrdiff_t>> from(
      T, std::vector<std::ptrdiff_t>(static_cast<std::size_t>(F), -1));

  for (std::ptrdiff_t f = 0; f < F; ++f)
    score[0][f] = std::log(spec.mag[f][0] + eps);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::ptrdiff_t f = 0; f < F; ++f) {
      double best = -std::numeric_limits<double>::infinity();
      std::ptrdiff_t arg = -1;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, f - jump);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(F - 1, f + jump);
      for (std::ptrdiff_t g = lo; g <= hi; ++g) {
        const double cand =
            score[t - 1][g] - opt.jump_penalty * std::abs(static_cast<double>(f - g));
        if (cand > best) {
          best = cand;
          arg = g;
        }
      }
      score[t][f] = best + std::log(spec.mag[f][t] + eps);
      from[t][f] = arg;
    }
  }

  std::ptrdiff_t cur = 0;
  for (std::ptrdiff_t f = 1; f < F; ++f)
    if (score[T - 1][f] > score[T - 1][cur]) cur = f;

  HrTrack track;
  track.method = TrackerMethod::dp;
  track.times_s = spec.times_s;
  track.bpm.resize(T);
  for (std::size_t t = T; t-- > 0;) {
    track.bpm[t] = 60.0 * spec.freqs_hz[static_cast<std::size_t>(cur)];
    if (t > 0) cur = from[t][static_cast<std::size_t>(cur)];
  }
  return track;
}

double hr_at(const HrTrack& track, double t_s) {
  if (track.bpm.empty())
    throw Error(Errc::undefined_hr, "empty HR track");
  const auto& ts = track.times_s;
  if (t_s <= ts.front()) return track.bpm.front();
  if (t_s >= ts.back()) return track.bpm.back();
  const auto it = std::lower_bound(ts.begin(), ts.end(), t_s);
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  // exact midpoint goes to the earlier entry
  return (t_s - ts[lo] <= ts[hi] - t_s) ? track.bpm[lo] : track.bpm[hi];
}

void save_hr_csv(const HrTrack& track, const std::string& path) {
  std::string out = "t,bpm,method\n";
  for (std::size_t i = 0; i < track.size(); ++i)
    out += format_double(track.times_s[i]) + "," + format_double(track.bpm[i]) +
           "," + tracker_name(track.method) + "\n";
  atomic_write(path, out);
}

}  // namespace spo2::pulse
