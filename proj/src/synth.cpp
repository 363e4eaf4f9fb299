#include "spo2/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "spo2/dsp.hpp"
#include "spo2/io_util.hpp"

namespace spo2::synth {

namespace {

constexpr double kPi = std::numbers::pi;

double interp(const std::vector<double>& xs, const std::vector<double>& ys,
              double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] * (1.0 - w) + ys[hi] * w;
}

double band_mean_diff(const OptoScene& s, double lo_nm, double hi_nm) {
  double acc = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < s.wavelength_nm.size(); ++i) {
    if (s.wavelength_nm[i] < lo_nm || s.wavelength_nm[i] > hi_nm) continue;
    acc += s.eps_hb[i] - s.eps_hbo2[i];
    ++n;
  }
  return n ? acc / n : 0.0;
}

}  // namespace

void OptoScene::validate() const {
  const std::size_t n = wavelength_nm.size();
  if (n < 2) throw Error(Errc::invalid_scene, "wavelength grid too short");
  for (std::size_t i = 1; i < n; ++i)
    if (wavelength_nm[i] <= wavelength_nm[i - 1])
      throw Error(Errc::invalid_scene, "wavelength grid not increasing");
  auto check = [n](const std::vector<double>& v, const char* what) {
    if (v.size() != n)
      throw Error(Errc::invalid_scene,
                  std::string(what) + " length differs from grid");
    for (double x : v)
      if (!(x >= 0.0) || !std::isfinite(x))
        throw Error(Errc::invalid_scene,
                    std::string(what) + " has negative or non-finite values");
  };
  check(light, "light spectrum");
  check(eps_hb, "eps_hb");
  check(eps_hbo2, "eps_hbo2");
  check(eps_tissue, "eps_tissue");
  for (int c = 0; c < 3; ++c) check(responsivity[c], "responsivity");
  if (path_delta_cm < 0)
    throw Error(Errc::invalid_scene, "path_delta must be nonnegative");
  if (conc_hb_total <= 0)
    throw Error(Errc::invalid_scene, "hemoglobin concentration must be positive");
  // contrast condition: the oxy/deoxy difference must flip sign between
  // the red and blue bands, otherwise RoR carries no SpO2 information
  const double red = band_mean_diff(*this, 600.0, 700.0);
  const double blue = band_mean_diff(*this, 400.0, 500.0);
  if (!(red * blue < 0.0))
    throw Error(Errc::invalid_scene,
                "extinction curves lack red/blue oxy-deoxy contrast");
}

OptoScene default_scene() {
  OptoScene s;
  // 400..700 nm, 10 nm steps. Stylized hemoglobin-like tables: Soret
  // peaks near 415 (oxy) and 430 (deoxy), the oxy Q-band W around
  // 540/577 vs the single deoxy bump near 555, and a red gap where
  // deoxy absorbs several times more than oxy.
  s.wavelength_nm = {400, 410, 420, 430, 440, 450, 460, 470, 480, 490, 500,
                     510, 520, 530, 540, 550, 560, 570, 580, 590, 600, 610,
                     620, 630, 640, 650, 660, 670, 680, 690, 700};
  s.eps_hbo2 = {34000, 40000, 42000, 36000, 33000, 32000, 33000, 32000,
                30000, 28000, 26000, 25000, 26000, 34000, 45000, 40000,
                33000, 46000, 42000, 12000, 3500,  1800,  1200,  900,
                750,   650,   560,   500,   450,   420,   400};
  s.eps_hb = {28000, 30000, 34000, 44000, 36000, 24000, 20000, 18000,
              17000, 16500, 16000, 17000, 20000, 28000, 38000, 44000,
              42000, 40000, 35000, 25000, 14000, 9000,  7000,  5500,
              4700,  4100,  3600,  3200,  2900,  2700,  2500};
  const std::size_t n = s.wavelength_nm.size();
  s.light.assign(n, 1.0);
  s.eps_tissue.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lam = s.wavelength_nm[i];
    s.eps_tissue[i] = 8.0 - 6.0 * (lam - 400.0) / 300.0;  // mild blue excess
  }
  const double centers[3] = {620.0, 540.0, 460.0};
  const double sigma = 60.0 / 2.3548;  // 60 nm FWHM
  for (int c = 0; c < 3; ++c) {
    s.responsivity[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = s.wavelength_nm[i] - centers[c];
      s.responsivity[c][i] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  s.conc_tissue = 1.0;
  s.conc_hb_total = 2.3e-3;
  s.path_tissue_cm = 0.1;
  s.path_base_cm = 0.008;
  s.path_delta_cm = 5e-4;
  s.pulse_phase = 0.0;
  return s;
}

OptoScene narrowband_scene(double red_nm, double green_nm, double blue_nm) {
  OptoScene base = default_scene();
  OptoScene s;
  // 1 nm grid so that near-delta responsivities resolve cleanly
  for (double lam = 400.0; lam <= 700.0; lam += 1.0)
    s.wavelength_nm.push_back(lam);
  const std::size_t n = s.wavelength_nm.size();
  s.light.assign(n, 1.0);
  s.eps_hb.resize(n);
  s.eps_hbo2.resize(n);
  s.eps_tissue.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lam = s.wavelength_nm[i];
    s.eps_hb[i] = interp(base.wavelength_nm, base.eps_hb, lam);
    s.eps_hbo2[i] = interp(base.wavelength_nm, base.eps_hbo2, lam);
    s.eps_tissue[i] = interp(base.wavelength_nm, base.eps_tissue, lam);
  }
  const double centers[3] = {red_nm, green_nm, blue_nm};
  const double sigma = 0.8;
  for (int c = 0; c < 3; ++c) {
    s.responsivity[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = s.wavelength_nm[i] - centers[c];
      s.responsivity[c][i] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  s.conc_tissue = base.conc_tissue;
  s.conc_hb_total = base.conc_hb_total;
  s.path_tissue_cm = base.path_tissue_cm;
  s.path_base_cm = base.path_base_cm;
  s.path_delta_cm = base.path_delta_cm;
  return s;
}

OptoScene load_scene(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_scene, path + ": bad JSON: " + e.what());
  }
  OptoScene s;
  try {
    s.wavelength_nm = j.at("wavelength_nm").get<std::vector<double>>();
    s.light = j.at("light").get<std::vector<double>>();
    s.responsivity[0] = j.at("responsivity_r").get<std::vector<double>>();
    s.responsivity[1] = j.at("responsivity_g").get<std::vector<double>>();
    s.responsivity[2] = j.at("responsivity_b").get<std::vector<double>>();
    s.eps_hb = j.at("eps_hb").get<std::vector<double>>();
    s.eps_hbo2 = j.at("eps_hbo2").get<std::vector<double>>();
    s.eps_tissue = j.at("eps_tissue").get<std::vector<double>>();
    s.conc_tissue = j.at("conc_tissue").get<double>();
    s.conc_hb_total = j.at("conc_hb_total").get<double>();
    s.path_tissue_cm = j.at("path_tissue_cm").get<double>();
    s.path_base_cm = j.at("path_base_cm").get<double>();
    s.path_delta_cm = j.at("path_delta_cm").get<double>();
    s.pulse_phase = j.value("pulse_phase", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_scene, path + ": " + e.what());
  }
  s.validate();
  return s;
}

void save_scene(const std::string& path, const OptoScene& s) {
  s.validate();
  nlohmann::json j{{"wavelength_nm", s.wavelength_nm},
                   {"light", s.light},
                   {"responsivity_r", s.responsivity[0]},
                   {"responsivity_g", s.responsivity[1]},
                   {"responsivity_b", s.responsivity[2]},
                   {"eps_hb", s.eps_hb},
                   {"eps_hbo2", s.eps_hbo2},
                   {"eps_tissue", s.eps_tissue},
                   {"conc_tissue", s.conc_tissue},
                   {"conc_hb_total", s.conc_hb_total},
                   {"path_tissue_cm", s.path_tissue_cm},
                   {"path_base_cm", s.path_base_cm},
                   {"path_delta_cm", s.path_delta_cm},
                   {"pulse_phase", s.pulse_phase}};
  atomic_write(path, j.dump(2) + "\n");
}

GroundTruth breath_hold_truth(const BreathHoldParams& p) {
  if (p.duration_s <= 0 || p.fps <= 0 || p.dips < 0)
    throw Error(Errc::invalid_config, "invalid breath-hold parameters");
  GroundTruth t;
  t.fps = p.fps;
  const std::size_t n =
      static_cast<std::size_t>(std::lround(p.duration_s * p.fps));
  t.spo2.resize(n);
  t.hr.resize(n);

  const double lead = std::min(12.0, p.duration_s * 0.1);
  const double period = p.dips > 0 ? (p.duration_s - lead) / p.dips : 0.0;

  // dip depth profile in [0,1]: cosine descent over 35% of the period,
  // hold 15%, cosine recovery 30%, rest at baseline
  auto dip_shape = [&](double ts) {
    if (p.dips == 0 || ts < lead) return 0.0;
    const double u = std::fmod(ts - lead, period) / period;
    if (u < 0.35) return 0.5 * (1.0 - std::cos(kPi * u / 0.35));
    if (u < 0.50) return 1.0;
    if (u < 0.80) return 0.5 * (1.0 + std::cos(kPi * (u - 0.50) / 0.30));
    return 0.0;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const double ts = static_cast<double>(i) / p.fps;
    const double d = dip_shape(ts);
    t.spo2[i] = p.spo2_high - (p.spo2_high - p.spo2_low) * d;
    double hr = p.hr_base_bpm + p.hr_drift_bpm * (ts / p.duration_s);
    if (p.hr_covary) hr += p.hr_rise_bpm * d;
    t.hr[i] = std::clamp(hr, 42.0, 180.0);
  }
  return t;
}

GroundTruth load_truth(const std::string& path) {
  const Csv csv = read_csv(path);
  if (csv.columns != std::vector<std::string>{"t", "spo2", "hr"})
    throw Error(Errc::shape_mismatch, path + ": header must be t,spo2,hr");
  GroundTruth t;
  const auto ts = csv.column("t");
  if (ts.size() < 2)
    throw Error(Errc::insufficient_samples, path + ": too few rows");
  t.fps = 1.0 / (ts[1] - ts[0]);
  t.spo2 = csv.column("spo2");
  t.hr = csv.column("hr");
  return t;
}

void save_truth(const std::string& path, const GroundTruth& t) {
  std::vector<std::vector<double>> rows(t.spo2.size());
  for (std::size_t i = 0; i < t.spo2.size(); ++i)
    rows[i] = {static_cast<double>(i) / t.fps, t.spo2[i], t.hr[i]};
  write_csv(path, {"t", "spo2", "hr"}, rows);
}

ReferenceTrace truth_to_reference(const GroundTruth& truth, double rate_hz) {
  ReferenceTrace ref;
  ref.sample_rate = rate_hz;
  const std::size_t n = static_cast<std::size_t>(
      std::floor(truth.duration_s() * rate_hz - 1e-9)) +
                        1;
  ref.spo2.resize(n);
  ref.hr = std::vector<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) / rate_hz * truth.fps));
    k = std::min(k, truth.spo2.size() - 1);
    ref.spo2[i] = truth.spo2[k];
    (*ref.hr)[i] = truth.hr[k];
  }
  return ref;
}

std::array<double, 3> camera_response(const OptoScene& scene, double spo2_pct,
                                      double path_cm) {
  if (!(spo2_pct >= 0.0 && spo2_pct <= 100.0))
    throw Error(Errc::invalid_scene, "spo2 outside [0,100]");
  const double c_hbo2 = spo2_pct / 100.0 * scene.conc_hb_total;
  const double c_hb = scene.conc_hb_total - c_hbo2;
  const std::size_t n = scene.wavelength_nm.size();
  std::array<double, 3> out{0.0, 0.0, 0.0};
  std::vector<double> atten(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu =
        scene.eps_tissue[i] * scene.conc_tissue * scene.path_tissue_cm +
        (scene.eps_hb[i] * c_hb + scene.eps_hbo2[i] * c_hbo2) * path_cm;
    atten[i] = scene.light[i] * std::exp(-mu);
  }
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double dl = scene.wavelength_nm[i + 1] - scene.wavelength_nm[i];
      acc += 0.5 * dl *
             (atten[i] * scene.responsivity[c][i] +
              atten[i + 1] * scene.responsivity[c][i + 1]);
    }
    if (acc <= 0)
      throw Error(Errc::invalid_scene, "nonpositive camera response");
    out[c] = acc;
  }
  return out;
}

RgbTrace generate_trace(const OptoScene& scene, const GroundTruth& truth,
                        const TraceOptions& opt) {
  scene.validate();
  const std::size_t n = truth.spo2.size();
  if (n == 0 || truth.hr.size() != n)
    throw Error(Errc::invalid_config, "ground truth is empty or inconsistent");

  RgbTrace trace;
  trace.fps = truth.fps;
  trace.r.resize(n);
  trace.g.resize(n);
  trace.b.resize(n);

  // instantaneous-frequency phase accumulation for the pulsatile path
  double phase = scene.pulse_phase;
  const double dt = 1.0 / truth.fps;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = scene.path_base_cm +
                     scene.path_delta_cm * (1.0 + std::sin(phase)) / 2.0;
    const auto s = camera_response(scene, truth.spo2[i], l);
    trace.r[i] = s[0];
    trace.g[i] = s[1];
    trace.b[i] = s[2];
    phase += 2.0 * kPi * (truth.hr[i] / 60.0) * dt;
  }

  // one common factor so the pooled channel mean lands at 128 counts
  double pooled = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    pooled += trace.r[i] + trace.g[i] + trace.b[i];
  pooled /= static_cast<double>(3 * n);
  const double scale = 128.0 / pooled;
  for (int c = 0; c < 3; ++c)
    for (auto& v : trace.channel(c)) v *= scale;

  std::mt19937_64 rng(opt.seed);

  // pulsatile amplitude per channel, measured on the detrended signal
  std::array<double, 3> pulsatile_std{};
  const int detrend_win = std::max(3, static_cast<int>(std::lround(2.0 * truth.fps)));
  for (int c = 0; c < 3; ++c) {
    const auto& ch = trace.channel(c);
    const auto slow = dsp::moving_average(ch, detrend_win);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += (ch[i] - slow[i]) * (ch[i] - slow[i]);
    pulsatile_std[c] = std::sqrt(acc / static_cast<double>(n));
  }

  if (opt.interference) {
    const auto& itf = *opt.interference;
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
    for (int c = 0; c < 3; ++c) {
      double iphase = uphase(rng);
      const double amp = itf.weights[c] * itf.amplitude_rel *
                         std::numbers::sqrt2 * pulsatile_std[c];
      auto& ch = trace.channel(c);
      for (std::size_t i = 0; i < n; ++i) {
        ch[i] += amp * std::sin(iphase);
        iphase += 2.0 * kPi * (truth.hr[i] / 60.0 + itf.offset_hz) * dt;
      }
    }
  }

  if (opt.noise_snr_db) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      const double sigma =
          pulsatile_std[c] / std::pow(10.0, *opt.noise_snr_db / 20.0);
      for (auto& v : trace.channel(c)) v += sigma * gauss(rng);
    }
  }

  if (opt.quantize_8bit) {
    for (int c = 0; c < 3; ++c)
      for (auto& v : trace.channel(c))
        v = std::clamp(std::round(v), 0.0, 255.0);
  }
  return trace;
}

FrameSequence render_frames(const RgbTrace& trace, int width, int height,
                            const HandGeometry& hand, double texture_sigma,
                            std::uint64_t seed) {
  trace.validate();
  if (hand.rx <= 0 || hand.ry <= 0 || hand.cx - hand.rx < 0 ||
      hand.cy - hand.ry < 0 || hand.cx + hand.rx > width ||
      hand.cy + hand.ry > height)
    throw Error(Errc::invalid_geometry, "hand ellipse outside frame");

  FrameSequence seq;
  seq.width = width;
  seq.height = height;
  seq.fps = trace.fps;
  seq.frames.resize(trace.size());

  const std::uint8_t bg[3] = {12, 10, 10};
  std::vector<std::uint8_t> inside(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - hand.cx) / hand.rx;
      const double dy = (y + 0.5 - hand.cy) / hand.ry;
      inside[static_cast<std::size_t>(y) * width + x] =
          (dx * dx + dy * dy <= 1.0) ? 1 : 0;
    }

  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(trace.size());
       ++f) {
    try {
      // per-frame generator so parallel rendering stays deterministic
      std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL *
                                  (static_cast<std::uint64_t>(f) + 1)));
      std::normal_distribution<double> gauss(0.0, texture_sigma);
      auto& frame = seq.frames[f];
      frame.resize(seq.frame_bytes());
      const double color[3] = {trace.r[f], trace.g[f], trace.b[f]};
      for (std::size_t i = 0; i < inside.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
          double v = inside[i] ? color[c] + gauss(rng) : bg[c];
          frame[3 * i + c] = static_cast<std::uint8_t>(
              std::clamp(std::lround(v), 0L, 255L));
        }
      }
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return seq;
}

BlurKernel make_gaussian_kernel(double sigma, int support) {
  if (sigma <= 0)
    throw Error(Errc::invalid_config, "blur sigma must be positive");
  if (support < 1 || support % 2 == 0)
    throw Error(Errc::invalid_config, "blur support must be odd");
  BlurKernel k;
  k.sigma = sigma;
  k.support = support;
  k.weights.resize(static_cast<std::size_t>(support) * support);
  const int half = support / 2;
  double sum = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>(dy + half) * support + (dx + half)] =
          w;
      sum += w;
    }
  for (auto& w : k.weights) w /= sum;
  return k;
}

FrameSequence gaussian_blur(const FrameSequence& seq, double sigma,
                            int support) {
  make_gaussian_kernel(sigma, support);  // parameter validation
  const int half = support / 2;
  std::vector<double> k1(static_cast<std::size_t>(support));
  double sum = 0.0;
  for (int d = -half; d <= half; ++d) {
    k1[static_cast<std::size_t>(d + half)] =
        std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k1[static_cast<std::size_t>(d + half)];
  }
  for (auto& w : k1) w /= sum;

  FrameSequence out;
  out.width = seq.width;
  out.height = seq.height;
  out.fps = seq.fps;
  out.frames.resize(seq.frames.size());

  const int w = seq.width, h = seq.height;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(seq.frames.size());
       ++f) {
    const auto& src = seq.frames[f];
    // separable pass: the normalized 2D kernel is the outer product of
    // the normalized 1D kernels
    std::vector<double> tmp(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int d = -half; d <= half; ++d) {
            const int xx = std::clamp(x + d, 0, w - 1);
            acc += k1[static_cast<std::size_t>(d + half)] *
                   src[(static_cast<std::size_t>(y) * w + xx) * 3 + c];
          }
          tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
        }
    auto& dst = out.frames[f];
    dst.resize(src.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int d = -half; d <= half; ++d) {
            const int yy = std::clamp(y + d, 0, h - 1);
            acc += k1[static_cast<std::size_t>(d + half)] *
                   tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
          }
          dst[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
              static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
        }
  }
  return out;
}

namespace {

std::size_t peak_responsivity_index(const OptoScene& scene, int channel) {
  const auto& r = scene.responsivity[channel];
  return static_cast<std::size_t>(
      std::max_element(r.begin(), r.end()) - r.begin());
}

}  // namespace

double analytic_log_ratio(const OptoScene& scene, double spo2_pct,
                          int channel) {
  const double c_hbo2 = spo2_pct / 100.0 * scene.conc_hb_total;
  const double c_hb = scene.conc_hb_total - c_hbo2;
  const std::size_t i = peak_responsivity_index(scene, channel);
  return (scene.eps_hb[i] * c_hb + scene.eps_hbo2[i] * c_hbo2) *
         scene.path_delta_cm;
}

double analytic_ror(const OptoScene& scene, double spo2_pct, int channel_a,
                    int channel_b) {
  return analytic_log_ratio(scene, spo2_pct, channel_a) /
         analytic_log_ratio(scene, spo2_pct, channel_b);
}

}  // namespace spo2::synth
