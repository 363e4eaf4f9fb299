#include "spo2/config.hpp"

#include <json.hpp>

#include "spo2/io_util.hpp"
#include "spo2/regress.hpp"

namespace spo2 {

PipelineParams::PipelineParams() {
  ridge_lambda_grid = regress::default_lambda_grid();
  svr_c_grid = regress::default_c_grid();
  svr_gamma_grid = regress::default_gamma_grid();
}

void PipelineParams::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok)
      throw Error(Errc::invalid_config,
                  std::string("config field '") + field + "' is invalid");
  };
  require(window_s > 0, "window_s");
  require(step_s > 0, "step_s");
  require(roi.median_window >= 1 && roi.median_window % 2 == 1,
          "roi.median_window");
  require(roi.morph_radius >= 0, "roi.morph_radius");
  require(roi.min_coverage >= 0 && roi.min_coverage <= 1, "roi.min_coverage");
  require(pos_window_s > 0, "pos_window_s");
  require(stft_win_s > 0, "stft_win_s");
  require(stft_hop_s > 0, "stft_hop_s");
  require(band_lo_hz > 0 && band_hi_hz > band_lo_hz, "band_lo_hz/band_hi_hz");
  require(max_bin_hz > 0, "max_bin_hz");
  require(dp_jump_penalty >= 0, "dp_jump_penalty");
  require(dp_max_jump >= 0, "dp_max_jump");
  require(ac.half_bw_hz > 0, "ac.half_bw_hz");
  require(ac.fixed_lo_hz > 0 && ac.fixed_hi_hz > ac.fixed_lo_hz,
          "ac.fixed_lo_hz/ac.fixed_hi_hz");
  require(ac.context_pad_s >= 0, "ac.context_pad_s");
  require(ac.filter_order >= 2 && ac.filter_order % 2 == 0, "ac.filter_order");
  require(dc_cutoff_hz > 0, "dc_cutoff_hz");
  require(dc_order >= 1, "dc_order");
  require(!ridge_lambda_grid.empty(), "ridge_lambda_grid");
  require(!svr_c_grid.empty(), "svr_c_grid");
  require(!svr_gamma_grid.empty(), "svr_gamma_grid");
  require(svr_epsilon >= 0, "svr_epsilon");
  require(svr_tol > 0, "svr_tol");
  require(svr_max_iter > 0, "svr_max_iter");
  require(smooth_windows >= 1, "smooth_windows");
  require(video_lead_s >= 0, "video_lead_s");
  require(oximeter_delay_s >= 0, "oximeter_delay_s");
}

namespace {

using nlohmann::json;

const json& need(const json& j, const char* key) {
  if (!j.contains(key))
    throw Error(Errc::invalid_config,
                std::string("missing config key '") + key + "'");
  return j.at(key);
}

}  // namespace

PipelineParams load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, path + ": bad JSON: " + e.what());
  }
  PipelineParams p;
  try {
    p.window_s = need(j, "window_s").get<double>();
    p.step_s = need(j, "step_s").get<double>();

    const json& r = need(j, "roi");
    if (!need(r, "rect").is_null()) {
      const json& rect = r.at("rect");
      p.roi.rect = roi::Rect{need(rect, "x").get<int>(),
                             need(rect, "y").get<int>(),
                             need(rect, "w").get<int>(),
                             need(rect, "h").get<int>()};
    }
    p.roi.morph_radius = need(r, "morph_radius").get<int>();
    p.roi.median_window = need(r, "median_window").get<int>();
    p.roi.min_coverage = need(r, "min_coverage").get<double>();
    p.roi.skin_above_threshold = need(r, "skin_above_threshold").get<bool>();
    p.roi.static_mask = need(r, "static_mask").get<bool>();

    p.pos_window_s = need(j, "pos_window_s").get<double>();
    p.stft_win_s = need(j, "stft_win_s").get<double>();
    p.stft_hop_s = need(j, "stft_hop_s").get<double>();
    p.band_lo_hz = need(j, "band_lo_hz").get<double>();
    p.band_hi_hz = need(j, "band_hi_hz").get<double>();
    p.max_bin_hz = need(j, "max_bin_hz").get<double>();

    p.tracker = pulse::tracker_from_name(need(j, "tracker").get<std::string>());
    p.dp_jump_penalty = need(j, "dp_jump_penalty").get<double>();
    p.dp_max_jump = need(j, "dp_max_jump").get<int>();

    const json& ac = need(j, "ac");
    p.ac.mode = features::ac_mode_from_name(need(ac, "mode").get<std::string>());
    p.ac.half_bw_hz = need(ac, "half_bw_hz").get<double>();
    p.ac.fixed_lo_hz = need(ac, "fixed_lo_hz").get<double>();
    p.ac.fixed_hi_hz = need(ac, "fixed_hi_hz").get<double>();
    const std::string est = need(ac, "estimator").get<std::string>();
    if (est == "peak_to_valley_mean")
      p.ac.estimator = features::AcEstimator::peak_to_valley_mean;
    else if (est == "peak_to_valley_median")
      p.ac.estimator = features::AcEstimator::peak_to_valley_median;
    else if (est == "stddev")
      p.ac.estimator = features::AcEstimator::stddev;
    else
      throw Error(Errc::invalid_config, "unknown ac.estimator '" + est + "'");
    p.ac.context_pad_s = need(ac, "context_pad_s").get<double>();
    p.ac.filter_order = need(ac, "filter_order").get<int>();

    p.dc_cutoff_hz = need(j, "dc_cutoff_hz").get<double>();
    p.dc_order = need(j, "dc_order").get<int>();

    p.ridge_lambda_grid =
        need(j, "ridge_lambda_grid").get<std::vector<double>>();
    p.svr_c_grid = need(j, "svr_c_grid").get<std::vector<double>>();
    p.svr_gamma_grid = need(j, "svr_gamma_grid").get<std::vector<double>>();
    p.svr_epsilon = need(j, "svr_epsilon").get<double>();
    p.svr_tol = need(j, "svr_tol").get<double>();
    p.svr_max_iter = need(j, "svr_max_iter").get<long>();

    p.smooth_windows = need(j, "smooth_windows").get<int>();
    p.video_lead_s = need(j, "video_lead_s").get<double>();
    p.oximeter_delay_s = need(j, "oximeter_delay_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, path + ": " + e.what());
  }
  p.validate();
  return p;
}

void save_config(const std::string& path, const PipelineParams& p) {
  json r;
  if (p.roi.rect) {
    r["rect"] = {{"x", p.roi.rect->x},
                 {"y", p.roi.rect->y},
                 {"w", p.roi.rect->w},
                 {"h", p.roi.rect->h}};
  } else {
    r["rect"] = nullptr;
  }
  r["morph_radius"] = p.roi.morph_radius;
  r["median_window"] = p.roi.median_window;
  r["min_coverage"] = p.roi.min_coverage;
  r["skin_above_threshold"] = p.roi.skin_above_threshold;
  r["static_mask"] = p.roi.static_mask;

  const char* est = "peak_to_valley_mean";
  if (p.ac.estimator == features::AcEstimator::peak_to_valley_median)
    est = "peak_to_valley_median";
  else if (p.ac.estimator == features::AcEstimator::stddev)
    est = "stddev";

  json j{{"window_s", p.window_s},
         {"step_s", p.step_s},
         {"roi", r},
         {"pos_window_s", p.pos_window_s},
         {"stft_win_s", p.stft_win_s},
         {"stft_hop_s", p.stft_hop_s},
         {"band_lo_hz", p.band_lo_hz},
         {"band_hi_hz", p.band_hi_hz},
         {"max_bin_hz", p.max_bin_hz},
         {"tracker", pulse::tracker_name(p.tracker)},
         {"dp_jump_penalty", p.dp_jump_penalty},
         {"dp_max_jump", p.dp_max_jump},
         {"ac",
          {{"mode", features::ac_mode_name(p.ac.mode)},
           {"half_bw_hz", p.ac.half_bw_hz},
           {"fixed_lo_hz", p.ac.fixed_lo_hz},
           {"fixed_hi_hz", p.ac.fixed_hi_hz},
           {"estimator", est},
           {"context_pad_s", p.ac.context_pad_s},
           {"filter_order", p.ac.filter_order}}},
         {"dc_cutoff_hz", p.dc_cutoff_hz},
         {"dc_order", p.dc_order},
         {"ridge_lambda_grid", p.ridge_lambda_grid},
         {"svr_c_grid", p.svr_c_grid},
         {"svr_gamma_grid", p.svr_gamma_grid},
         {"svr_epsilon", p.svr_epsilon},
         {"svr_tol", p.svr_tol},
         {"svr_max_iter", p.svr_max_iter},
         {"smooth_windows", p.smooth_windows},
         {"video_lead_s", p.video_lead_s},
         {"oximeter_delay_s", p.oximeter_delay_s}};
  atomic_write(path, j.dump(2) + "\n");
}

}  // namespace spo2
