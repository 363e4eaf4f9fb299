#include "spo2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "spo2/io_util.hpp"

namespace spo2::eval {

double mae(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw Error(Errc::shape_mismatch, "mae input lengths differ");
  if (y.empty()) throw Error(Errc::shape_mismatch, "mae of empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

double pearson(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw Error(Errc::shape_mismatch, "pearson input lengths differ");
  if (y.size() < 2)
    throw Error(Errc::undefined_correlation, "need at least 2 samples");
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += y_hat[i];
  }
  my /= static_cast<double>(y.size());
  mh /= static_cast<double>(y.size());
  double dot = 0.0, ny = 0.0, nh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    dot += (y[i] - my) * (y_hat[i] - mh);
    ny += (y[i] - my) * (y[i] - my);
    nh += (y_hat[i] - mh) * (y_hat[i] - mh);
  }
  if (ny <= 0 || nh <= 0)
    throw Error(Errc::undefined_correlation, "zero variance input");
  return dot / std::sqrt(ny * nh);
}

void MetricReport::finalize() {
  const double n = static_cast<double>(sessions.size());
  if (sessions.empty()) return;
  mean_test_mae = mean_test_rho = mean_train_mae = mean_train_rho = 0.0;
  for (const auto& s : sessions) {
    mean_test_mae += s.test_mae;
    mean_test_rho += s.test_rho;
    mean_train_mae += s.train_mae;
    mean_train_rho += s.train_rho;
  }
  mean_test_mae /= n;
  mean_test_rho /= n;
  mean_train_mae /= n;
  mean_train_rho /= n;
  std_test_mae = std_test_rho = 0.0;
  for (const auto& s : sessions) {
    std_test_mae += (s.test_mae - mean_test_mae) * (s.test_mae - mean_test_mae);
    std_test_rho += (s.test_rho - mean_test_rho) * (s.test_rho - mean_test_rho);
  }
  if (sessions.size() > 1) {
    std_test_mae = std::sqrt(std_test_mae / (n - 1.0));
    std_test_rho = std::sqrt(std_test_rho / (n - 1.0));
  } else {
    std_test_mae = std_test_rho = 0.0;
  }
}

std::string report_table(const MetricReport& r) {
  std::ostringstream os;
  os << "participant session   train_mae train_rho test_mae test_rho\n";
  char buf[160];
  for (const auto& s : r.sessions) {
    std::snprintf(buf, sizeof(buf), "%-11s %-9s %9.3f %9.3f %8.3f %8.3f\n",
                  s.participant.c_str(), s.session.c_str(), s.train_mae,
                  s.train_rho, s.test_mae, s.test_rho);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "mean(std)             %9.3f %9.3f %8.3f %8.3f  | test std "
                "mae=%.3f rho=%.3f\n",
                r.mean_train_mae, r.mean_train_rho, r.mean_test_mae,
                r.mean_test_rho, r.std_test_mae, r.std_test_rho);
  os << buf;
  return os.str();
}

std::string report_json(const MetricReport& r) {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& s : r.sessions)
    sessions.push_back({{"participant", s.participant},
                        {"session", s.session},
                        {"train_mae", s.train_mae},
                        {"train_rho", s.train_rho},
                        {"test_mae", s.test_mae},
                        {"test_rho", s.test_rho},
                        {"n_test", s.n_test}});
  nlohmann::json j{{"sessions", sessions},
                   {"mean_test_mae", r.mean_test_mae},
                   {"std_test_mae", r.std_test_mae},
                   {"mean_test_rho", r.mean_test_rho},
                   {"std_test_rho", r.std_test_rho},
                   {"mean_train_mae", r.mean_train_mae},
                   {"mean_train_rho", r.mean_train_rho}};
  return j.dump(2) + "\n";
}

std::vector<std::string> Cohort::participants() const {
  std::vector<std::string> ids;
  for (const auto& s : sessions)
    if (std::find(ids.begin(), ids.end(), s.participant) == ids.end())
      ids.push_back(s.participant);
  return ids;
}

std::vector<const Session*> Cohort::of(const std::string& participant) const {
  std::vector<const Session*> out;
  for (const auto& s : sessions)
    if (s.participant == participant) out.push_back(&s);
  return out;
}

Cohort make_synthetic_cohort(const CohortSpec& spec) {
  if (spec.participants < 1 || spec.sessions_per_participant < 1)
    throw Error(Errc::invalid_config, "cohort needs participants and sessions");
  Cohort cohort;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * 3.14159265358979);

  for (int p = 0; p < spec.participants; ++p) {
    // participant-specific optical calibration
    synth::OptoScene scene = synth::default_scene();
    const double j = spec.participant_jitter;
    scene.path_delta_cm *= 1.0 + j * unit(rng);
    scene.path_base_cm *= 1.0 + j * unit(rng);
    scene.path_tissue_cm *= 1.0 + 0.5 * j * unit(rng);
    scene.conc_hb_total *= 1.0 + 0.5 * j * unit(rng);
    const double hr_base = 68.0 + 10.0 * unit(rng);
    const double spo2_low_p = spec.spo2_low + 1.5 * unit(rng);

    for (int s = 0; s < spec.sessions_per_participant; ++s) {
      synth::BreathHoldParams bh;
      bh.duration_s = spec.duration_s;
      bh.dips = spec.dips;
      bh.spo2_high = std::min(99.0, spec.spo2_high + 0.4 * unit(rng));
      bh.spo2_low = std::clamp(spo2_low_p + 0.8 * unit(rng), 85.0, 95.0);
      bh.hr_base_bpm = hr_base + 3.0 * unit(rng);
      bh.hr_rise_bpm = 10.0 + 4.0 * unit(rng);
      bh.hr_drift_bpm = spec.hr_drift_bpm;
      bh.hr_covary = spec.hr_covary;
      const auto truth = synth::breath_hold_truth(bh);

      synth::TraceOptions opt;
      opt.noise_snr_db = spec.noise_snr_db;
      opt.interference = spec.interference;
      opt.seed = spec.seed ^ (0x100000001b3ULL * (p * 131 + s + 1));
      synth::OptoScene session_scene = scene;
      session_scene.pulse_phase = uphase(rng);

      Session session;
      session.participant = "P" + std::to_string(p + 1);
      session.session_id = "S" + std::to_string(s + 1);
      session.skin_group = (p % 2 == 0) ? "lighter" : "darker";
      session.trace = synth::generate_trace(session_scene, truth, opt);
      session.reference = synth::truth_to_reference(truth);
      cohort.sessions.push_back(std::move(session));
    }
  }
  return cohort;
}

Method method_from_name(const std::string& name) {
  if (name == "I") return Method::I;
  if (name == "II") return Method::II;
  if (name == "III") return Method::III;
  if (name == "IV") return Method::IV;
  if (name == "V") return Method::V;
  if (name == "proposed") return Method::proposed;
  throw Error(Errc::invalid_config, "unknown ablation method '" + name + "'");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::I: return "I";
    case Method::II: return "II";
    case Method::III: return "III";
    case Method::IV: return "IV";
    case Method::V: return "V";
    case Method::proposed: return "proposed";
  }
  return "?";
}

AblationConfig ablation_config(Method m) {
  AblationConfig cfg;
  cfg.method = m;
  switch (m) {
    case Method::I:  // two-channel RoR, narrow ABP, DP tracking
      cfg.two_channel = true;
      break;
    case Method::II:  // fixed [1,2] Hz band, tracker unused
      cfg.ac_mode = features::AcMode::fixed_band;
      break;
    case Method::III:  // wide +-0.5 Hz ABP, DP tracking
      cfg.ac_mode = features::AcMode::wide_abp;
      cfg.half_bw_hz = 0.5;
      break;
    case Method::IV:
      cfg.tracker = pulse::TrackerMethod::peak;
      break;
    case Method::V:
      cfg.tracker = pulse::TrackerMethod::weighted;
      break;
    case Method::proposed:
      break;
  }
  return cfg;
}

PipelineParams apply_ablation(const PipelineParams& base,
                              const AblationConfig& cfg) {
  PipelineParams p = base;
  p.ac.mode = cfg.ac_mode;
  p.ac.half_bw_hz = cfg.half_bw_hz;
  p.tracker = cfg.tracker;
  return p;
}

namespace {

std::string cache_key(const Session& s, const PipelineParams& params) {
  return s.participant + "/" + s.session_id + "|" +
         features::ac_mode_name(params.ac.mode) + "|" +
         format_double(params.ac.half_bw_hz) + "|" +
         pulse::tracker_name(params.tracker);
}

}  // namespace

const features::FeatureSet& FeatureCache::get(const Session& s,
                                              const PipelineParams& params) {
  const std::string key = cache_key(s, params);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  ++computed_;
  auto extracted = pipeline::extract_features(s.trace, &s.reference, params);
  return cache_.emplace(key, std::move(extracted.features)).first->second;
}

namespace {

SessionMetrics evaluate_split(const std::string& participant,
                              const std::string& session,
                              const pipeline::LabeledMatrix& train,
                              const pipeline::LabeledMatrix& test,
                              pipeline::Regressor regressor,
                              const PipelineParams& params) {
  const auto trained = pipeline::train(train, regressor, params);
  const auto pred_train =
      regress::predict(trained.model, train.rows, params.smooth_windows);
  const auto pred_test =
      regress::predict(trained.model, test.rows, params.smooth_windows);
  SessionMetrics m;
  m.participant = participant;
  m.session = session;
  m.train_mae = mae(train.labels, pred_train.spo2);
  m.train_rho = pearson(train.labels, pred_train.spo2);
  m.test_mae = mae(test.labels, pred_test.spo2);
  m.test_rho = pearson(test.labels, pred_test.spo2);
  m.n_test = test.labels.size();
  return m;
}

}  // namespace

MetricReport run_ablation(const Cohort& cohort, const AblationConfig& cfg,
                          const PipelineParams& base,
                          pipeline::Regressor regressor, FeatureCache* cache) {
  const PipelineParams params = apply_ablation(base, cfg);
  FeatureCache local;
  FeatureCache& fc = cache ? *cache : local;

  MetricReport report;
  for (const auto& pid : cohort.participants()) {
    const auto sessions = cohort.of(pid);
    if (sessions.size() < 2)
      throw Error(Errc::invalid_config,
                  "participant " + pid + " needs two sessions for ablation");
    const auto& train_set = fc.get(*sessions[0], params);
    const auto& test_set = fc.get(*sessions[1], params);
    const auto train = pipeline::to_matrix(train_set, cfg.two_channel, true);
    const auto test = pipeline::to_matrix(test_set, cfg.two_channel, true);
    report.sessions.push_back(evaluate_split(
        pid, sessions[1]->session_id, train, test, regressor, params));
  }
  report.finalize();
  return report;
}

ExperimentMode mode_from_name(const std::string& name) {
  if (name == "participant_specific" || name == "ps")
    return ExperimentMode::participant_specific;
  if (name == "leave_one_session_out" || name == "losesso")
    return ExperimentMode::leave_one_session_out;
  if (name == "leave_one_participant_out" || name == "loparto")
    return ExperimentMode::leave_one_participant_out;
  throw Error(Errc::invalid_config, "unknown experiment mode '" + name + "'");
}

const char* mode_name(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::participant_specific: return "participant_specific";
    case ExperimentMode::leave_one_session_out: return "leave_one_session_out";
    case ExperimentMode::leave_one_participant_out:
      return "leave_one_participant_out";
  }
  return "?";
}

void check_leakage(const TaggedRows& train, const TaggedRows& test,
                   ExperimentMode mode) {
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    for (std::size_t j = 0; j < test.rows.size(); ++j) {
      if (train.participant[i] == test.participant[j]) {
        if (mode == ExperimentMode::leave_one_participant_out)
          throw Error(Errc::leakage, "test participant " +
                                         test.participant[j] +
                                         " present in training rows");
        if (train.session[i] == test.session[j])
          throw Error(Errc::leakage,
                      "session " + train.session[i] + " of " +
                          train.participant[i] +
                          " appears in both train and test");
      }
    }
  }
}

MetricReport run_experiment(const Cohort& cohort, ExperimentMode mode,
                            pipeline::Regressor regressor,
                            const PipelineParams& params) {
  FeatureCache cache;
  MetricReport report;

  auto tagged = [&](const Session& s) {
    const auto& set = cache.get(s, params);
    const auto m = pipeline::to_matrix(set, false, true);
    TaggedRows t;
    t.rows = m.rows;
    t.labels = m.labels;
    t.participant.assign(m.rows.size(), s.participant);
    t.session.assign(m.rows.size(), s.session_id);
    return t;
  };
  auto append = [](TaggedRows& dst, const TaggedRows& src) {
    dst.rows.insert(dst.rows.end(), src.rows.begin(), src.rows.end());
    dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
    dst.participant.insert(dst.participant.end(), src.participant.begin(),
                           src.participant.end());
    dst.session.insert(dst.session.end(), src.session.begin(),
                       src.session.end());
  };

  for (const auto& pid : cohort.participants()) {
    const auto own = cohort.of(pid);
    if (own.size() < 2)
      throw Error(Errc::invalid_config,
                  "participant " + pid + " needs two sessions");
    const Session& test_session = *own.back();
    const TaggedRows test = tagged(test_session);

    TaggedRows train;
    switch (mode) {
      case ExperimentMode::participant_specific:
        for (std::size_t i = 0; i + 1 < own.size(); ++i)
          append(train, tagged(*own[i]));
        break;
      case ExperimentMode::leave_one_session_out:
        for (const auto& s : cohort.sessions) {
          if (s.participant == pid && s.session_id == test_session.session_id)
            continue;
          append(train, tagged(s));
        }
        break;
      case ExperimentMode::leave_one_participant_out:
        for (const auto& s : cohort.sessions) {
          if (s.participant == pid) continue;
          append(train, tagged(s));
        }
        break;
    }
    check_leakage(train, test, mode);

    pipeline::LabeledMatrix train_m{train.rows, train.labels, {}};
    pipeline::LabeledMatrix test_m{test.rows, test.labels, {}};
    report.sessions.push_back(evaluate_split(pid, test_session.session_id,
                                             train_m, test_m, regressor,
                                             params));
  }
  report.finalize();
  return report;
}

}  // namespace spo2::eval
