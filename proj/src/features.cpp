#include "spo2/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spo2/dsp.hpp"
#include "spo2/io_util.hpp"

namespace spo2::features {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

// Local maxima with a greedy minimum-distance constraint, strongest
// peaks kept first.
std::vector<std::size_t> find_peaks(std::span<const double> x,
                                    std::size_t min_dist) {
  std::vector<std::size_t> cand;
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (x[i] > x[i - 1] && x[i] >= x[i + 1]) cand.push_back(i);
  if (min_dist <= 1 || cand.size() < 2) return cand;
  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[cand[a]] > x[cand[b]];
  });
  std::vector<bool> kept(cand.size(), false);
  for (std::size_t oi : order) {
    bool ok = true;
    for (std::size_t j = 0; j < cand.size(); ++j) {
      if (!kept[j]) continue;
      const std::size_t d =
          cand[oi] > cand[j] ? cand[oi] - cand[j] : cand[j] - cand[oi];
      if (d < min_dist) {
        ok = false;
        break;
      }
    }
    kept[oi] = ok;
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < cand.size(); ++j)
    if (kept[j]) out.push_back(cand[j]);
  return out;
}

struct Extremum {
  std::size_t idx;
  bool is_peak;
};

// Mean/median of consecutive peak-to-valley differences after enforcing
// strict alternation (the more extreme sample wins a same-type run).
std::optional<double> peak_to_valley(std::span<const double> x,
                                     std::size_t min_dist, bool use_median) {
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  const auto peaks = find_peaks(x, min_dist);
  const auto valleys = find_peaks(neg, min_dist);
  std::vector<Extremum> ext;
  ext.reserve(peaks.size() + valleys.size());
  for (auto i : peaks) ext.push_back({i, true});
  for (auto i : valleys) ext.push_back({i, false});
  std::sort(ext.begin(), ext.end(),
            [](const Extremum& a, const Extremum& b) { return a.idx < b.idx; });

  std::vector<Extremum> alt;
  for (const auto& e : ext) {
    if (!alt.empty() && alt.back().is_peak == e.is_peak) {
      const bool replace = e.is_peak ? x[e.idx] > x[alt.back().idx]
                                     : x[e.idx] < x[alt.back().idx];
      if (replace) alt.back() = e;
      continue;
    }
    alt.push_back(e);
  }
  if (alt.size() < 2) return std::nullopt;
  std::vector<double> amps;
  for (std::size_t i = 0; i + 1 < alt.size(); ++i)
    amps.push_back(std::abs(x[alt[i].idx] - x[alt[i + 1].idx]));
  if (amps.empty()) return std::nullopt;
  if (use_median) return median(std::move(amps));
  return std::accumulate(amps.begin(), amps.end(), 0.0) /
         static_cast<double>(amps.size());
}

double population_std(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / n);
}

struct WindowAc {
  std::optional<double> value;
  std::string reason;
  double hr_used = 0.0;
};

WindowAc window_ac(std::span<const double> x, double fps,
                   const WindowPlan& plan, std::size_t i,
                   const pulse::HrTrack& hr, const AcExtractorConfig& cfg) {
  WindowAc out;
  const std::size_t n = x.size();
  const std::size_t start = plan.start[i];
  const std::size_t end = start + plan.length;

  double band_lo = 0.0, band_hi = 0.0, center_hz = 0.0;
  switch (cfg.mode) {
    case AcMode::narrow_abp:
    case AcMode::wide_abp: {
      center_hz = pulse::hr_at(hr, plan.center_s(i)) / 60.0;
      band_lo = center_hz - cfg.half_bw_hz;
      band_hi = center_hz + cfg.half_bw_hz;
      break;
    }
    case AcMode::fixed_band:
      band_lo = cfg.fixed_lo_hz;
      band_hi = cfg.fixed_hi_hz;
      center_hz = 0.5 * (band_lo + band_hi);
      break;
    case AcMode::none:
      center_hz = hr.bpm.empty() ? 1.5 : pulse::hr_at(hr, plan.center_s(i)) / 60.0;
      break;
  }
  out.hr_used = center_hz * 60.0;

  std::vector<double> seg;
  std::size_t crop_lo = 0;
  if (cfg.mode == AcMode::none) {
    seg.assign(x.begin() + start, x.begin() + end);
  } else {
    if (!(band_lo > 0.0 && band_hi < fps / 2.0)) {
      out.reason = "adaptive band outside (0, fs/2)";
      return out;
    }
    const std::size_t pad =
        static_cast<std::size_t>(std::lround(cfg.context_pad_s * fps));
    const std::size_t lo = start > pad ? start - pad : 0;
    const std::size_t hi = std::min(n, end + pad);
    std::vector<double> chunk(x.begin() + lo, x.begin() + hi);
    try {
      const auto filt = dsp::design_butterworth(dsp::FilterKind::bandpass,
                                                cfg.filter_order, band_lo,
                                                band_hi, fps);
      chunk = dsp::filtfilt(filt, chunk);
    } catch (const Error& e) {
      out.reason = e.what();
      return out;
    }
    crop_lo = start - lo;
    seg.assign(chunk.begin() + crop_lo, chunk.begin() + crop_lo + plan.length);
  }

  if (cfg.estimator == AcEstimator::stddev) {
    const double sd = population_std(seg);
    if (sd <= 0) {
      out.reason = "zero variance in window";
      return out;
    }
    out.value = sd;
    return out;
  }

  // minimum peak spacing of 0.4 periods suppresses dicrotic double counts
  const std::size_t min_dist = static_cast<std::size_t>(
      std::lround(0.4 / std::max(center_hz, 1e-6) * fps));
  const auto amp = peak_to_valley(
      seg, min_dist, cfg.estimator == AcEstimator::peak_to_valley_median);
  if (!amp || *amp <= 0) {
    out.reason = "fewer than one full oscillation in window";
    return out;
  }
  out.value = amp;
  return out;
}

std::vector<std::optional<double>> window_dc(std::span<const double> x,
                                             double fps,
                                             const WindowPlan& plan,
                                             double cutoff_hz, int order) {
  const auto lp =
      dsp::design_butterworth(dsp::FilterKind::lowpass, order, cutoff_hz, 0.0, fps);
  const auto filtered = dsp::filtfilt(lp, x);
  std::vector<std::optional<double>> out(plan.count());
  for (std::size_t i = 0; i < plan.count(); ++i) {
    std::vector<double> win(filtered.begin() + plan.start[i],
                            filtered.begin() + plan.start[i] + plan.length);
    const double m = median(std::move(win));
    if (m > 0) out[i] = m;
  }
  return out;
}

}  // namespace

WindowPlan plan_windows(double duration_s, double fps, double window_s,
                        double step_s) {
  if (fps <= 0 || window_s <= 0 || step_s <= 0)
    throw Error(Errc::invalid_config, "window plan parameters must be positive");
  if (duration_s + 1e-9 < window_s)
    throw Error(Errc::insufficient_samples,
                "signal shorter than one processing window");
  WindowPlan plan;
  plan.window_s = window_s;
  plan.step_s = step_s;
  plan.fps = fps;
  plan.length = static_cast<std::size_t>(std::lround(window_s * fps));
  const std::size_t total =
      static_cast<std::size_t>(std::lround(duration_s * fps));
  const std::size_t count = static_cast<std::size_t>(
      std::floor((duration_s - window_s) / step_s + 1e-9)) +
                            1;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s = static_cast<std::size_t>(
        std::lround(static_cast<double>(i) * step_s * fps));
    if (s + plan.length > total) break;
    plan.start.push_back(s);
  }
  return plan;
}

const char* ac_mode_name(AcMode m) {
  switch (m) {
    case AcMode::narrow_abp: return "narrow_abp";
    case AcMode::wide_abp: return "wide_abp";
    case AcMode::fixed_band: return "fixed_band";
    case AcMode::none: return "none";
  }
  return "?";
}

AcMode ac_mode_from_name(const std::string& name) {
  if (name == "narrow_abp") return AcMode::narrow_abp;
  if (name == "wide_abp") return AcMode::wide_abp;
  if (name == "fixed_band") return AcMode::fixed_band;
  if (name == "none") return AcMode::none;
  throw Error(Errc::invalid_config, "unknown AC mode '" + name + "'");
}

std::vector<double> dc_component(std::span<const double> x, double fps,
                                 const WindowPlan& plan, double cutoff_hz,
                                 int order) {
  const auto dc = window_dc(x, fps, plan, cutoff_hz, order);
  std::vector<double> out(dc.size());
  for (std::size_t i = 0; i < dc.size(); ++i) {
    if (!dc[i])
      throw Error(Errc::invalid_dc,
                  "nonpositive DC in window " + std::to_string(i));
    out[i] = *dc[i];
  }
  return out;
}

std::vector<double> ac_component(std::span<const double> x, double fps,
                                 const WindowPlan& plan,
                                 const pulse::HrTrack& hr,
                                 const AcExtractorConfig& cfg) {
  std::vector<double> out(plan.count());
  for (std::size_t i = 0; i < plan.count(); ++i) {
    const auto ac = window_ac(x, fps, plan, i, hr, cfg);
    if (!ac.value)
      throw Error(Errc::undefined_ac,
                  "window " + std::to_string(i) + ": " + ac.reason);
    out[i] = *ac.value;
  }
  return out;
}

FeatureSet feature_rows(const RgbTrace& trace, const pulse::HrTrack& hr,
                        const ReferenceTrace* reference,
                        const AcExtractorConfig& cfg, const WindowPlan& plan) {
  trace.validate();
  FeatureSet set;
  set.plan = plan;

  std::array<std::vector<std::optional<double>>, 3> dc;
  for (int c = 0; c < 3; ++c)
    dc[c] = window_dc(trace.channel(c), trace.fps, plan, 0.1, 2);

  std::array<std::vector<WindowAc>, 3> ac;
  for (int c = 0; c < 3; ++c) ac[c].resize(plan.count());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(plan.count());
       ++i) {
    for (int c = 0; c < 3; ++c)
      ac[c][i] = window_ac(trace.channel(c), trace.fps, plan,
                           static_cast<std::size_t>(i), hr, cfg);
  }

  for (std::size_t i = 0; i < plan.count(); ++i) {
    std::string reason;
    for (int c = 0; c < 3; ++c) {
      if (!dc[c][i]) reason = "nonpositive DC";
      if (!ac[c][i].value && reason.empty()) reason = ac[c][i].reason;
    }
    if (!reason.empty()) {
      set.skipped.push_back({i, reason});
      continue;
    }
    FeatureRow row;
    row.index = i;
    row.t_center_s = plan.center_s(i);
    for (int c = 0; c < 3; ++c) row.r_norm[c] = *ac[c][i].value / *dc[c][i];
    row.ratio_rg = row.r_norm[0] / row.r_norm[1];
    row.ratio_rb = row.r_norm[0] / row.r_norm[2];
    row.ratio_gb = row.r_norm[1] / row.r_norm[2];
    row.hr_used_bpm = ac[0][i].hr_used;

    if (reference) {
      const double t0 =
          static_cast<double>(plan.start[i]) / trace.fps;
      const double t1 = t0 + plan.window_s;
      double acc = 0.0;
      std::size_t cnt = 0;
      for (std::size_t k = 0; k < reference->spo2.size(); ++k) {
        const double t = static_cast<double>(k) / reference->sample_rate;
        if (t >= t0 - 1e-9 && t <= t1 + 1e-9) {
          acc += reference->spo2[k];
          ++cnt;
        }
      }
      if (cnt > 0) row.label = acc / static_cast<double>(cnt);
    }
    set.rows.push_back(row);
  }
  return set;
}

std::vector<double> two_channel_ror(const FeatureSet& set) {
  std::vector<double> out;
  out.reserve(set.rows.size());
  for (const auto& row : set.rows) out.push_back(row.ratio_rb);
  return out;
}

std::vector<double> baseline_contact_features(const RgbTrace& trace,
                                              const WindowPlan& plan,
                                              ContactVariant variant) {
  trace.validate();
  std::vector<double> out(plan.count());
  for (std::size_t i = 0; i < plan.count(); ++i) {
    double r_norm[3];
    for (int c : {0, 2}) {
      const auto& ch = trace.channel(c);
      std::span<const double> win(ch.data() + plan.start[i], plan.length);
      const double dcv =
          std::accumulate(win.begin(), win.end(), 0.0) /
          static_cast<double>(win.size());
      if (dcv <= 0)
        throw Error(Errc::invalid_dc,
                    "nonpositive window mean in window " + std::to_string(i));
      double acv = 0.0;
      if (variant == ContactVariant::scully) {
        acv = population_std(win);
      } else {
        const auto amp = peak_to_valley(win, 0, /*use_median=*/true);
        acv = amp.value_or(0.0);
      }
      if (acv <= 0)
        throw Error(Errc::undefined_ac,
                    "zero AC in window " + std::to_string(i));
      r_norm[c] = acv / dcv;
    }
    out[i] = r_norm[0] / r_norm[2];
  }
  return out;
}

void save_features_csv(const FeatureSet& set, const std::string& path) {
  std::string out =
      "i,t_center,R_r,R_g,R_b,ratio_rg,ratio_rb,ratio_gb,hr_used,label\n";
  for (const auto& r : set.rows) {
    out += std::to_string(r.index) + "," + format_double(r.t_center_s);
    for (int c = 0; c < 3; ++c) out += "," + format_double(r.r_norm[c]);
    out += "," + format_double(r.ratio_rg) + "," + format_double(r.ratio_rb) +
           "," + format_double(r.ratio_gb) + "," + format_double(r.hr_used_bpm);
    out += "," + (r.label ? format_double(*r.label) : std::string("nan"));
    out += "\n";
  }
  atomic_write(path, out);
}

FeatureSet load_features_csv(const std::string& path) {
  const Csv csv = read_csv(path);
  const std::vector<std::string> expected{
      "i",        "t_center", "R_r",      "R_g",     "R_b",
      "ratio_rg", "ratio_rb", "ratio_gb", "hr_used", "label"};
  if (csv.columns != expected)
    throw Error(Errc::shape_mismatch, path + ": unexpected feature columns");
  FeatureSet set;
  for (const auto& r : csv.rows) {
    FeatureRow row;
    row.index = static_cast<std::size_t>(r[0]);
    row.t_center_s = r[1];
    row.r_norm[0] = r[2];
    row.r_norm[1] = r[3];
    row.r_norm[2] = r[4];
    row.ratio_rg = r[5];
    row.ratio_rb = r[6];
    row.ratio_gb = r[7];
    row.hr_used_bpm = r[8];
    if (std::isfinite(r[9])) row.label = r[9];
    set.rows.push_back(row);
  }
  return set;
}

}  // namespace spo2::features
