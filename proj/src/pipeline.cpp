#include "spo2/pipeline.hpp"

#include <algorithm>
#include <limits>

#include "spo2/dsp.hpp"
#include "spo2/io_util.hpp"

namespace spo2::pipeline {

ExtractionResult extract_features(const RgbTrace& trace,
                                  const ReferenceTrace* reference,
                                  const PipelineParams& params) {
  params.validate();
  trace.validate();

  ExtractionResult result;
  result.trace = trace;
  result.rppg = pulse::pos_rppg(trace, params.pos_window_s);

  const bool needs_hr = params.ac.mode == features::AcMode::narrow_abp ||
                        params.ac.mode == features::AcMode::wide_abp;
  if (needs_hr) {
    const auto spec =
        dsp::stft(result.rppg.samples, trace.fps, params.stft_win_s,
                  params.stft_hop_s, params.band_lo_hz, params.band_hi_hz,
                  params.max_bin_hz);
    switch (params.tracker) {
      case pulse::TrackerMethod::peak:
        result.hr = pulse::hr_peak(spec);
        break;
      case pulse::TrackerMethod::weighted:
        result.hr = pulse::hr_weighted(spec);
        break;
      case pulse::TrackerMethod::dp:
        result.hr = pulse::hr_dp(
            spec, {params.dp_jump_penalty, params.dp_max_jump});
        break;
    }
  }

  const auto plan = features::plan_windows(trace.duration_s(), trace.fps,
                                           params.window_s, params.step_s);
  const pulse::HrTrack empty_track;
  result.features = features::feature_rows(
      trace, result.hr ? *result.hr : empty_track, reference, params.ac, plan);
  return result;
}

LabeledMatrix to_matrix(const features::FeatureSet& set, bool two_channel,
                        bool require_labels) {
  LabeledMatrix out;
  for (const auto& row : set.rows) {
    if (require_labels && !row.label) continue;
    if (two_channel)
      out.rows.push_back({row.ratio_rb});
    else
      out.rows.push_back(row.values());
    out.labels.push_back(row.label.value_or(
        std::numeric_limits<double>::quiet_NaN()));
    out.times_s.push_back(row.t_center_s);
  }
  return out;
}

Regressor regressor_from_name(const std::string& name) {
  if (name == "ridge") return Regressor::ridge;
  if (name == "svr") return Regressor::svr;
  throw Error(Errc::invalid_config, "unknown regressor '" + name + "'");
}

const char* regressor_name(Regressor r) {
  return r == Regressor::ridge ? "ridge" : "svr";
}

TrainResult train(const LabeledMatrix& data, Regressor regressor,
                  const PipelineParams& params) {
  if (data.rows.size() < 10)
    throw Error(Errc::insufficient_samples,
                "need at least 10 labeled rows to train");
  TrainResult result;
  if (regressor == Regressor::ridge) {
    const auto curve =
        regress::ridge_cv_curve(data.rows, data.labels, params.ridge_lambda_grid);
    const double lambda =
        regress::ridge_select(data.rows, data.labels, params.ridge_lambda_grid);
    for (std::size_t i = 0; i < curve.size(); ++i)
      result.cv_report.emplace_back(
          "lambda=" + format_double(params.ridge_lambda_grid[i]), curve[i]);
    result.cv_best_mae = *std::min_element(curve.begin(), curve.end());
    const auto stats = regress::standardize_stats(data.rows);
    auto ridge = regress::ridge_fit(
        regress::apply_standardization(data.rows, stats), data.labels, lambda);
    ridge.stats = stats;
    result.model = ridge;
    return result;
  }

  regress::SvrOptions opt;
  opt.tol = params.svr_tol;
  opt.max_iter = params.svr_max_iter;
  const auto sel =
      regress::svr_select(data.rows, data.labels, params.svr_c_grid,
                          params.svr_gamma_grid, params.svr_epsilon, opt);
  result.cv_best_mae = sel.cv_mae[0][0];
  for (std::size_t ci = 0; ci < params.svr_c_grid.size(); ++ci)
    for (std::size_t gi = 0; gi < params.svr_gamma_grid.size(); ++gi) {
      result.cv_report.emplace_back(
          "C=" + format_double(params.svr_c_grid[ci]) +
              ",gamma=" + format_double(params.svr_gamma_grid[gi]),
          sel.cv_mae[ci][gi]);
      result.cv_best_mae = std::min(result.cv_best_mae, sel.cv_mae[ci][gi]);
    }
  const auto stats = regress::standardize_stats(data.rows);
  auto svr = regress::svr_fit(regress::apply_standardization(data.rows, stats),
                              data.labels, sel.c, sel.gamma,
                              params.svr_epsilon, opt);
  svr.stats = stats;
  result.model = svr;
  return result;
}

}  // namespace spo2::pipeline
