#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "spo2/pipeline.hpp"
#include "spo2/synth.hpp"
#include "spo2/types.hpp"

namespace spo2::eval {

double mae(std::span<const double> y, std::span<const double> y_hat);
double pearson(std::span<const double> y, std::span<const double> y_hat);

struct SessionMetrics {
  std::string participant, session;
  double train_mae = 0.0, train_rho = 0.0;
  double test_mae = 0.0, test_rho = 0.0;
  std::size_t n_test = 0;
};

struct MetricReport {
  std::vector<SessionMetrics> sessions;
  double mean_test_mae = 0.0, std_test_mae = 0.0;
  double mean_test_rho = 0.0, std_test_rho = 0.0;
  double mean_train_mae = 0.0, mean_train_rho = 0.0;

  void finalize();  // fills the cohort mean/std fields
};

std::string report_table(const MetricReport& r);   // aligned text
std::string report_json(const MetricReport& r);

// One recorded session: trace plus time-aligned reference, with the
// provenance fields the leakage checks key on.
struct Session {
  std::string participant;
  std::string session_id;
  std::string side = "PU";        // PU or PD
  std::string skin_group = "";
  RgbTrace trace;
  ReferenceTrace reference;
};

struct Cohort {
  std::vector<Session> sessions;

  std::vector<std::string> participants() const;
  std::vector<const Session*> of(const std::string& participant) const;
};

// Synthetic cohort with per-participant optical calibration jitter and
// per-session noise; the verification stand-in for the human dataset.
struct CohortSpec {
  int participants = 10;
  int sessions_per_participant = 2;
  double duration_s = 110.0;
  int dips = 3;
  double spo2_high = 98.5;
  double spo2_low = 90.0;
  double noise_snr_db = 20.0;
  double hr_drift_bpm = 0.0;
  bool hr_covary = true;
  double participant_jitter = 0.25;  // relative optical parameter spread
  std::optional<synth::Interference> interference;
  std::uint64_t seed = 1;
};

Cohort make_synthetic_cohort(const CohortSpec& spec);

// Table-II ablation rows.
enum class Method { I, II, III, IV, V, proposed };

Method method_from_name(const std::string& name);
const char* method_name(Method m);

struct AblationConfig {
  Method method = Method::proposed;
  bool two_channel = false;                 // Method I
  features::AcMode ac_mode = features::AcMode::narrow_abp;
  double half_bw_hz = 0.1;
  pulse::TrackerMethod tracker = pulse::TrackerMethod::dp;
};

AblationConfig ablation_config(Method m);

// Applies an ablation row on top of shared pipeline params.
PipelineParams apply_ablation(const PipelineParams& base,
                              const AblationConfig& cfg);

// Feature extraction with memoization so the six Table-II rows reuse
// identical traces without recomputation.
class FeatureCache {
 public:
  const features::FeatureSet& get(const Session& s,
                                  const PipelineParams& params);
  std::size_t computed() const { return computed_; }

 private:
  std::map<std::string, features::FeatureSet> cache_;
  std::size_t computed_ = 0;
};

// Participant-specific run of one ablation method over the cohort:
// per participant, train on the first session and test on the second.
MetricReport run_ablation(const Cohort& cohort, const AblationConfig& cfg,
                          const PipelineParams& base,
                          pipeline::Regressor regressor,
                          FeatureCache* cache = nullptr);

enum class ExperimentMode {
  participant_specific,
  leave_one_session_out,
  leave_one_participant_out
};

ExperimentMode mode_from_name(const std::string& name);
const char* mode_name(ExperimentMode m);

// Row provenance for leakage checks.
struct TaggedRows {
  regress::Matrix rows;
  std::vector<double> labels;
  std::vector<std::string> participant;  // per row
  std::vector<std::string> session;      // per row
};

// Throws a leakage error if a session contributes to both sides, or if
// the test participant appears in training under LOPartO.
void check_leakage(const TaggedRows& train, const TaggedRows& test,
                   ExperimentMode mode);

MetricReport run_experiment(const Cohort& cohort, ExperimentMode mode,
                            pipeline::Regressor regressor,
                            const PipelineParams& params);

}  // namespace spo2::eval
