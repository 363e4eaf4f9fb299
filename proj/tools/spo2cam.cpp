#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spo2/config.hpp"
#include "spo2/eval.hpp"
#include "spo2/ingest.hpp"
#include "spo2/io_util.hpp"
#include "spo2/pipeline.hpp"
#include "spo2/roi.hpp"
#include "spo2/synth.hpp"

namespace {

using namespace spo2;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  bool verbose = false;

  PipelineParams params() const {
    PipelineParams p;
    if (!config_path.empty()) p = load_config(config_path);
    p.validate();
    return p;
  }
  std::string out(const std::string& name) const {
    std::filesystem::create_directories(out_dir);
    return (std::filesystem::path(out_dir) / name).string();
  }
  void log(const std::string& msg) const {
    if (verbose) std::cerr << "[spo2cam] " << msg << "\n";
  }
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

RgbTrace load_input_trace(const GlobalOpts& g, const std::string& input,
                          const PipelineParams& params) {
  if (ends_with(input, ".csv")) {
    g.log("loading trace " + input);
    return ingest::load_trace(input);
  }
  g.log("loading frames " + input);
  const auto seq = ingest::load_frames(input);
  g.log("extracting ROI trace from " + std::to_string(seq.frames.size()) +
        " frames");
  return roi::extract_trace(seq, params.roi);
}

void write_predictions_csv(const std::string& path,
                           const std::vector<double>& times,
                           const std::vector<double>& pred,
                           const std::vector<double>* ref) {
  std::string out = ref ? "t,spo2_pred,spo2_ref\n" : "t,spo2_pred\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out += format_double(times[i]) + "," + format_double(pred[i]);
    if (ref) out += "," + format_double((*ref)[i]);
    out += "\n";
  }
  atomic_write(path, out);
}

int cmd_extract(const GlobalOpts& g, const std::string& input,
                const std::string& reference_path) {
  const auto params = g.params();
  RgbTrace trace = load_input_trace(g, input, params);

  ReferenceTrace ref;
  const ReferenceTrace* ref_ptr = nullptr;
  if (!reference_path.empty()) {
    ref = ingest::load_reference(reference_path);
    const auto session = ingest::align(trace, ref, params.video_lead_s,
                                       params.oximeter_delay_s);
    trace = session.trace;
    ref = ingest::resample_nearest(session.reference, 1.0);
    ref_ptr = &ref;
  }

  const auto result = pipeline::extract_features(trace, ref_ptr, params);

  features::save_features_csv(result.features, g.out("features.csv"));
  if (result.hr) pulse::save_hr_csv(*result.hr, g.out("hr.csv"));
  {
    std::string out = "t,rppg\n";
    for (std::size_t i = 0; i < result.rppg.samples.size(); ++i)
      out += format_double(static_cast<double>(i) / result.rppg.fps) + "," +
             format_double(result.rppg.samples[i]) + "\n";
    atomic_write(g.out("rppg.csv"), out);
  }
  if (!result.features.skipped.empty()) {
    std::string out = "i,reason\n";
    for (const auto& s : result.features.skipped)
      out += std::to_string(s.index) + "," + s.reason + "\n";
    atomic_write(g.out("skipped.csv"), out);
  }
  g.log("wrote " + std::to_string(result.features.rows.size()) +
        " feature rows");
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& features_path,
              const std::string& regressor_name) {
  const auto params = g.params();
  const auto set = features::load_features_csv(features_path);
  const auto data = pipeline::to_matrix(set, false, true);
  if (data.rows.empty())
    throw Error(Errc::missing_label, "no labeled rows in " + features_path);
  const auto regressor = pipeline::regressor_from_name(regressor_name);
  const auto result = pipeline::train(data, regressor, params);

  regress::save_model(result.model, g.out("model.json"));
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [cell, cv_mae] : result.cv_report)
    cells.push_back({{"cell", cell}, {"mean_fold_mae", cv_mae}});
  nlohmann::json report{{"regressor", regressor_name},
                        {"cv_cells", cells},
                        {"cv_best_mae", result.cv_best_mae},
                        {"n_rows", data.rows.size()}};
  atomic_write(g.out("cv_report.json"), report.dump(2) + "\n");
  g.log("model written to " + g.out("model.json"));
  return 0;
}

int cmd_predict(const GlobalOpts& g, const std::string& model_path,
                const std::string& features_path) {
  const auto params = g.params();
  const auto model = regress::load_model(model_path);
  const auto set = features::load_features_csv(features_path);
  const auto data = pipeline::to_matrix(set, false, false);
  const auto pred = regress::predict(model, data.rows, params.smooth_windows);

  std::vector<double> refs;
  bool have_refs = !data.rows.empty();
  for (const auto& row : set.rows) {
    if (!row.label) {
      have_refs = false;
      break;
    }
    refs.push_back(*row.label);
  }
  write_predictions_csv(g.out("predictions.csv"), data.times_s, pred.spo2,
                        have_refs ? &refs : nullptr);
  return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& predictions_path) {
  const Csv csv = read_csv(predictions_path);
  const auto pred = csv.column("spo2_pred");
  const auto ref = csv.column("spo2_ref");
  nlohmann::json j{{"n", pred.size()},
                   {"mae", eval::mae(ref, pred)},
                   {"rho", eval::pearson(ref, pred)}};
  atomic_write(g.out("metrics.json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& preset,
              const std::string& scene_path, bool frames, int width,
              int height, double duration_s, double snr_db) {
  synth::OptoScene scene =
      scene_path.empty() ? synth::default_scene() : synth::load_scene(scene_path);

  synth::BreathHoldParams bh;
  bh.duration_s = duration_s;
  double blur_sigma = 0.0;
  int blur_support = 0;
  if (preset == "breathhold3") {
    bh.dips = 3;
  } else if (preset == "blur_sigma1.1") {
    bh.dips = 3;
    blur_sigma = 1.1;
    blur_support = 5;
    frames = true;
  } else if (preset == "blur_sigma2.6") {
    bh.dips = 3;
    blur_sigma = 2.6;
    blur_support = 15;
    frames = true;
  } else if (!preset.empty()) {
    throw Error(Errc::invalid_config, "unknown preset '" + preset + "'");
  }

  const auto truth = synth::breath_hold_truth(bh);
  synth::TraceOptions opt;
  opt.noise_snr_db = snr_db;
  opt.seed = g.seed;
  const auto trace = synth::generate_trace(scene, truth, opt);

  synth::save_truth(g.out("truth.csv"), truth);
  ingest::save_reference(g.out("reference.csv"),
                         synth::truth_to_reference(truth));
  ingest::save_trace(g.out("trace.csv"), trace);

  if (frames) {
    synth::HandGeometry hand{width * 0.5, height * 0.5, width * 0.32,
                             height * 0.38};
    auto seq = synth::render_frames(trace, width, height, hand, 2.0, g.seed);
    if (blur_sigma > 0) {
      g.log("applying gaussian blur sigma=" + format_double(blur_sigma));
      seq = synth::gaussian_blur(seq, blur_sigma, blur_support);
    }
    ingest::write_frames(g.out("frames.json"), seq);
  }
  return 0;
}

int cmd_ablate(const GlobalOpts& g, const std::string& manifest_path,
               int synthetic_participants, const std::string& methods_arg,
               const std::string& regressor_name) {
  const auto params = g.params();

  eval::Cohort cohort;
  if (!manifest_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_config,
                  manifest_path + ": bad JSON: " + e.what());
    }
    for (const auto& item : j.at("sessions")) {
      eval::Session s;
      s.participant = item.at("participant").get<std::string>();
      s.session_id = item.at("session").get<std::string>();
      s.side = item.value("side", "PU");
      s.skin_group = item.value("skin_group", "");
      const auto trace = ingest::load_trace(item.at("trace").get<std::string>());
      const auto ref =
          ingest::load_reference(item.at("reference").get<std::string>());
      const auto aligned = ingest::align(trace, ref, params.video_lead_s,
                                         params.oximeter_delay_s);
      s.trace = aligned.trace;
      s.reference = ingest::resample_nearest(aligned.reference, 1.0);
      cohort.sessions.push_back(std::move(s));
    }
  } else {
    eval::CohortSpec spec;
    spec.participants = synthetic_participants;
    spec.seed = g.seed;
    g.log("generating synthetic cohort of " +
          std::to_string(spec.participants) + " participants");
    cohort = eval::make_synthetic_cohort(spec);
  }

  std::vector<eval::Method> methods;
  if (methods_arg == "all") {
    methods = {eval::Method::I,  eval::Method::II, eval::Method::III,
               eval::Method::IV, eval::Method::V,  eval::Method::proposed};
  } else {
    std::string rest = methods_arg;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      methods.push_back(eval::method_from_name(rest.substr(0, comma)));
      if (comma == std::string::npos) break;
      rest = rest.substr(comma + 1);
    }
    std::sort(methods.begin(), methods.end());
    methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  }

  const auto regressor = pipeline::regressor_from_name(regressor_name);
  eval::FeatureCache cache;
  nlohmann::json out = nlohmann::json::array();
  std::printf("%-9s %-10s %-10s %-9s %-9s\n", "method", "train_mae",
              "train_rho", "test_mae", "test_rho");
  for (const auto m : methods) {
    const auto report = eval::run_ablation(cohort, eval::ablation_config(m),
                                           params, regressor, &cache);
    std::printf("%-9s %-10.3f %-10.3f %-9.3f %-9.3f\n", eval::method_name(m),
                report.mean_train_mae, report.mean_train_rho,
                report.mean_test_mae, report.mean_test_rho);
    out.push_back({{"method", eval::method_name(m)},
                   {"train_mae", report.mean_train_mae},
                   {"train_rho", report.mean_train_rho},
                   {"test_mae", report.mean_test_mae},
                   {"test_rho", report.mean_test_rho},
                   {"std_test_mae", report.std_test_mae},
                   {"std_test_rho", report.std_test_rho}});
  }
  atomic_write(g.out("ablation.json"), out.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contactless SpO2 estimation from hand-video RGB traces"};
  app.require_subcommand(0, 1);

  GlobalOpts g;
  std::string dump_config_path;
  app.add_option("--config", g.config_path, "pipeline config JSON");
  app.add_option("--seed", g.seed, "deterministic seed");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_flag("--verbose", g.verbose, "log progress to stderr");
  app.add_option("--dump-config", dump_config_path,
                 "write the default config JSON and exit");

  auto* extract = app.add_subcommand(
      "extract", "frames or trace -> feature/HR/rPPG CSVs");
  std::string input, reference;
  extract->add_option("--input", input, "frame header JSON or trace CSV")
      ->required();
  extract->add_option("--reference", reference, "reference CSV t,spo2[,hr]");

  auto* train = app.add_subcommand("train", "features CSV -> model JSON");
  std::string features_path, regressor = "svr";
  train->add_option("--features", features_path, "labeled features CSV")
      ->required();
  train->add_option("--regressor", regressor, "ridge or svr");

  auto* predict = app.add_subcommand("predict", "model + features -> predictions");
  std::string model_path, pred_features;
  predict->add_option("--model", model_path, "model JSON")->required();
  predict->add_option("--features", pred_features, "features CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "predictions -> MAE and rho");
  std::string predictions_path;
  evaluate->add_option("--predictions", predictions_path,
                       "CSV with spo2_pred,spo2_ref")
      ->required();

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic data");
  std::string preset = "breathhold3", scene_path;
  bool frames = false;
  int width = 160, height = 120;
  double duration = 110.0, snr = 20.0;
  synth_cmd->add_option("--preset", preset,
                        "breathhold3 | blur_sigma1.1 | blur_sigma2.6");
  synth_cmd->add_option("--scene", scene_path, "scene JSON (default built-in)");
  synth_cmd->add_flag("--frames", frames, "also render frames");
  synth_cmd->add_option("--width", width, "frame width");
  synth_cmd->add_option("--height", height, "frame height");
  synth_cmd->add_option("--duration", duration, "session seconds");
  synth_cmd->add_option("--snr", snr, "noise SNR in dB");

  auto* ablate = app.add_subcommand("ablate", "run Table-style ablation rows");
  std::string manifest, methods = "all", ablate_regressor = "svr";
  int synth_participants = 5;
  ablate->add_option("--manifest", manifest, "cohort manifest JSON");
  ablate->add_option("--synthetic", synth_participants,
                     "use a synthetic cohort of N participants");
  ablate->add_option("--methods", methods, "all or comma list (I,II,...)");
  ablate->add_option("--regressor", ablate_regressor, "ridge or svr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!dump_config_path.empty()) {
      save_config(dump_config_path, PipelineParams());
      return 0;
    }
    if (extract->parsed()) return cmd_extract(g, input, reference);
    if (train->parsed()) return cmd_train(g, features_path, regressor);
    if (predict->parsed()) return cmd_predict(g, model_path, pred_features);
    if (evaluate->parsed()) return cmd_evaluate(g, predictions_path);
    if (synth_cmd->parsed())
      return cmd_synth(g, preset, scene_path, frames, width, height, duration,
                       snr);
    if (ablate->parsed())
      return cmd_ablate(g, manifest, synth_participants, methods,
                        ablate_regressor);
    std::cout << app.help() << "\n";
    return 0;
  } catch (const spo2::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
