#pragma once

#include <optional>

#include "spo2/config.hpp"
#include "spo2/features.hpp"
#include "spo2/pulse.hpp"
#include "spo2/regress.hpp"
#include "spo2/types.hpp"

namespace spo2::pipeline {

struct ExtractionResult {
  RgbTrace trace;
  pulse::RppgSignal rppg;
  std::optional<pulse::HrTrack> hr;  // absent when the AC band is fixed
  features::FeatureSet features;
};

// rPPG -> spectrogram -> HR track -> windowed 6-dim features. The HR
// tracker stage is skipped when the AC extractor does not need it.
ExtractionResult extract_features(const RgbTrace& trace,
                                  const ReferenceTrace* reference,
                                  const PipelineParams& params);

// Feature matrix assembly; rows without labels are dropped when
// `require_labels` is set.
struct LabeledMatrix {
  regress::Matrix rows;
  std::vector<double> labels;
  std::vector<double> times_s;
};

LabeledMatrix to_matrix(const features::FeatureSet& set, bool two_channel,
                        bool require_labels);

enum class Regressor { ridge, svr };

Regressor regressor_from_name(const std::string& name);
const char* regressor_name(Regressor r);

struct TrainResult {
  regress::Model model;
  double cv_best_mae = 0.0;
  std::vector<std::pair<std::string, double>> cv_report;  // cell -> mean MAE
};

// Hyperparameter selection by 5-fold CV on the training rows, then a
// final fit on all rows.
TrainResult train(const LabeledMatrix& data, Regressor regressor,
                  const PipelineParams& params);

}  // namespace spo2::pipeline
