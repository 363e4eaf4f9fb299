#include "spo2/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "spo2/io_util.hpp"

namespace spo2::ingest {

namespace {

std::string sibling_bin(const std::string& header_path,
                        const std::string& name) {
  if (!name.empty() && name.find('/') != std::string::npos) return name;
  std::filesystem::path p(header_path);
  if (!name.empty()) return (p.parent_path() / name).string();
  p.replace_extension(".rgb8");
  return p.string();
}

// fps inferred as 1/median(dt); dt must be uniform within 1% of the median.
double infer_fps(const std::vector<double>& t, const std::string& what) {
  if (t.size() < 2)
    throw Error(Errc::invalid_trace, what + ": need at least 2 samples");
  std::vector<double> dt(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    dt[i] = t[i + 1] - t[i];
    if (dt[i] <= 0)
      throw Error(Errc::invalid_trace,
                  what + ": timestamps not strictly increasing at row " +
                      std::to_string(i + 1));
  }
  std::vector<double> sorted = dt;
  std::sort(sorted.begin(), sorted.end());
  const double med = sorted[sorted.size() / 2];
  for (double d : dt)
    if (std::abs(d - med) > 0.01 * med)
      throw Error(Errc::invalid_trace,
                  what + ": sample spacing jitter exceeds 1%");
  return 1.0 / med;
}

}  // namespace

FrameSequence load_frames(const std::string& header_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(header_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_header,
                header_path + ": bad JSON: " + e.what());
  }
  FrameSequence seq;
  long long count = 0;
  std::string data_name;
  try {
    seq.width = j.at("width").get<int>();
    seq.height = j.at("height").get<int>();
    seq.fps = j.at("fps").get<double>();
    count = j.at("count").get<long long>();
    if (j.at("pixel_format").get<std::string>() != "rgb8")
      throw Error(Errc::invalid_header, "unsupported pixel_format");
    if (j.contains("data")) data_name = j.at("data").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_header, header_path + ": " + e.what());
  }
  if (seq.width <= 0 || seq.height <= 0 || count < 0)
    throw Error(Errc::invalid_header, "nonpositive frame dimensions");
  if (seq.fps <= 0) throw Error(Errc::invalid_header, "fps must be positive");

  const std::string bin = sibling_bin(header_path, data_name);
  std::ifstream f(bin, std::ios::binary | std::ios::ate);
  if (!f) throw Error(Errc::corrupt_input, "cannot open " + bin);
  const auto size = static_cast<unsigned long long>(f.tellg());
  const unsigned long long expected =
      static_cast<unsigned long long>(count) * seq.frame_bytes();
  if (size != expected)
    throw Error(Errc::corrupt_input,
                bin + ": size " + std::to_string(size) + " != expected " +
                    std::to_string(expected));
  f.seekg(0);
  seq.frames.resize(static_cast<std::size_t>(count));
  for (auto& frame : seq.frames) {
    frame.resize(seq.frame_bytes());
    f.read(reinterpret_cast<char*>(frame.data()),
           static_cast<std::streamsize>(frame.size()));
    if (!f) throw Error(Errc::corrupt_input, bin + ": short read");
  }
  return seq;
}

void write_frames(const std::string& header_path, const FrameSequence& seq) {
  if (seq.fps <= 0) throw Error(Errc::invalid_header, "fps must be positive");
  const std::string bin = sibling_bin(header_path, "");
  nlohmann::json j{{"width", seq.width},
                   {"height", seq.height},
                   {"fps", seq.fps},
                   {"count", seq.frames.size()},
                   {"pixel_format", "rgb8"},
                   {"data", std::filesystem::path(bin).filename().string()}};
  std::vector<unsigned char> blob;
  blob.reserve(seq.frames.size() * seq.frame_bytes());
  for (const auto& frame : seq.frames) {
    if (frame.size() != seq.frame_bytes())
      throw Error(Errc::corrupt_input, "frame size mismatch");
    blob.insert(blob.end(), frame.begin(), frame.end());
  }
  atomic_write_binary(bin, blob);
  atomic_write(header_path, j.dump(2) + "\n");
}

RgbTrace load_trace(const std::string& path) {
  const Csv csv = read_csv(path);
  if (csv.columns != std::vector<std::string>{"t", "r", "g", "b"})
    throw Error(Errc::shape_mismatch, path + ": header must be t,r,g,b");
  RgbTrace trace;
  trace.r = csv.column("r");
  trace.g = csv.column("g");
  trace.b = csv.column("b");
  trace.fps = infer_fps(csv.column("t"), path);
  trace.validate();
  return trace;
}

void save_trace(const std::string& path, const RgbTrace& trace) {
  trace.validate();
  std::vector<std::vector<double>> rows(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i)
    rows[i] = {static_cast<double>(i) / trace.fps, trace.r[i], trace.g[i],
               trace.b[i]};
  write_csv(path, {"t", "r", "g", "b"}, rows);
}

ReferenceTrace load_reference(const std::string& path) {
  const Csv csv = read_csv(path);
  const bool with_hr =
      csv.columns == std::vector<std::string>{"t", "spo2", "hr"};
  if (!with_hr && csv.columns != std::vector<std::string>{"t", "spo2"})
    throw Error(Errc::shape_mismatch, path + ": header must be t,spo2[,hr]");
  ReferenceTrace ref;
  ref.spo2 = csv.column("spo2");
  if (with_hr) ref.hr = csv.column("hr");
  ref.sample_rate = infer_fps(csv.column("t"), path);
  ref.validate();
  return ref;
}

void save_reference(const std::string& path, const ReferenceTrace& ref) {
  ref.validate();
  std::vector<std::string> cols{"t", "spo2"};
  if (ref.hr) cols.push_back("hr");
  std::vector<std::vector<double>> rows(ref.spo2.size());
  for (std::size_t i = 0; i < ref.spo2.size(); ++i) {
    rows[i] = {static_cast<double>(i) / ref.sample_rate, ref.spo2[i]};
    if (ref.hr) rows[i].push_back((*ref.hr)[i]);
  }
  write_csv(path, cols, rows);
}

AlignedSession align(const RgbTrace& trace, const ReferenceTrace& ref,
                     double video_lead_s, double oximeter_delay_s) {
  trace.validate();
  ref.validate();
  if (video_lead_s < 0 || oximeter_delay_s < 0)
    throw Error(Errc::invalid_config, "lead and delay must be nonnegative");
  if (trace.duration_s() <= video_lead_s)
    throw Error(Errc::empty_session, "trace shorter than video lead");

  const std::size_t drop_trace =
      static_cast<std::size_t>(std::llround(video_lead_s * trace.fps));
  const std::size_t drop_ref = std::min<std::size_t>(
      ref.spo2.size(),
      static_cast<std::size_t>(std::llround(oximeter_delay_s * ref.sample_rate)));

  const double trace_span = trace.duration_s() - video_lead_s;
  const double ref_span = ref.duration_s() - oximeter_delay_s;
  const double span = std::min(trace_span, ref_span);
  if (span <= 0)
    throw Error(Errc::empty_session, "no overlap after alignment shifts");

  AlignedSession out;
  out.duration_s = span;
  out.trace.fps = trace.fps;
  const std::size_t n_trace =
      std::min(trace.size() - drop_trace,
               static_cast<std::size_t>(std::llround(span * trace.fps)));
  for (int c = 0; c < 3; ++c)
    out.trace.channel(c).assign(trace.channel(c).begin() + drop_trace,
                                trace.channel(c).begin() + drop_trace + n_trace);

  out.reference.sample_rate = ref.sample_rate;
  const std::size_t n_ref =
      std::min(ref.spo2.size() - drop_ref,
               static_cast<std::size_t>(std::llround(span * ref.sample_rate)));
  out.reference.spo2.assign(ref.spo2.begin() + drop_ref,
                            ref.spo2.begin() + drop_ref + n_ref);
  if (ref.hr)
    out.reference.hr = std::vector<double>(ref.hr->begin() + drop_ref,
                                           ref.hr->begin() + drop_ref + n_ref);
  return out;
}

ReferenceTrace resample_nearest(const ReferenceTrace& ref, double rate_hz) {
  ref.validate();
  if (rate_hz <= 0)
    throw Error(Errc::invalid_config, "resample rate must be positive");
  ReferenceTrace out;
  out.sample_rate = rate_hz;
  const std::size_t n = static_cast<std::size_t>(
      std::floor(ref.duration_s() * rate_hz - 1e-9)) +
                        1;
  out.spo2.resize(n);
  if (ref.hr) out.hr = std::vector<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    std::size_t k = static_cast<std::size_t>(std::llround(t * ref.sample_rate));
    k = std::min(k, ref.spo2.size() - 1);
    out.spo2[i] = ref.spo2[k];
    if (ref.hr) (*out.hr)[i] = (*ref.hr)[k];
  }
  return out;
}

}  // namespace spo2::ingest
