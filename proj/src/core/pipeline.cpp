#include "core/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/io.hpp"
#include "core/log.hpp"

namespace stereotrap {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const char* PixelCountName(PixelCountConvention c) {
  return c == PixelCountConvention::kValidOnly ? "valid-only" : "full-frame";
}

PixelCountConvention ParsePixelCount(const std::string& s) {
  if (s == "valid-only") return PixelCountConvention::kValidOnly;
  if (s == "full-frame") return PixelCountConvention::kFullFrame;
  throw Error(ErrorCode::kInvalidArgument, "quality.pixel_count must be valid-only or full-frame");
}

KeyFunction ParseKey(const std::string& s) {
  if (s == "uniform") return KeyFunction::kUniform;
  if (s == "half-normal") return KeyFunction::kHalfNormal;
  throw Error(ErrorCode::kInvalidArgument, "ctds.key must be uniform or half-normal");
}

const char* ScalingName(ScalingPoint s) {
  return s == ScalingPoint::kLeftTruncation ? "left-truncation" : "zero";
}

ScalingPoint ParseScaling(const std::string& s) {
  if (s == "left-truncation") return ScalingPoint::kLeftTruncation;
  if (s == "zero") return ScalingPoint::kZero;
  throw Error(ErrorCode::kInvalidArgument, "ctds.scaling must be left-truncation or zero");
}

json ConfigJson(const PipelineConfig& c) {
  return {
      {"calibration", c.calibration},
      {"matcher",
       {{"max_disparity", c.matcher.max_disparity},
        {"census_window", c.matcher.census_window},
        {"p1", c.matcher.p1},
        {"p2", c.matcher.p2},
        {"lr_tolerance", c.matcher.lr_tolerance}}},
      {"flow",
       {{"levels", c.flow.levels},
        {"pyr_scale", c.flow.pyr_scale},
        {"poly_n", c.flow.poly_n},
        {"poly_sigma", c.flow.poly_sigma},
        {"iterations", c.flow.iterations},
        {"window", c.flow.window},
        {"min_eigenvalue", c.flow.min_eigenvalue}}},
      {"depth", {{"min_disparity", c.min_disparity}}},
      {"quality",
       {{"pixel_count", PixelCountName(c.quality.pixel_count)},
        {"histogram_bins", c.quality.histogram_bins},
        {"histogram_lo", c.quality.histogram_lo},
        {"histogram_hi", c.quality.histogram_hi}}},
      {"sampler",
       {{"mode", c.sampler.mode},
        {"rate", c.sampler.rate},
        {"fps", c.sampler.fps},
        {"threshold", c.sampler.threshold},
        {"burn_in", c.sampler.burn_in}}},
      {"distance", {{"min_valid_fraction", c.min_valid_fraction}}},
      {"ctds",
       {{"window", {c.ctds.w_l, c.ctds.w}},
        {"bins", c.ctds.bins},
        {"adjustments", c.ctds.adjustments},
        {"key", KeyFunctionName(c.ctds.key)},
        {"scaling", ScalingName(c.ctds.scaling)}}},
      {"workers", c.workers},
      {"output", c.output},
      {"write_intermediates", c.write_intermediates}};
}

// Copies fields of `patch` onto `base`, refusing keys the base lacks.
void MergeKnown(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw Error(ErrorCode::kParse, "configuration must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error(ErrorCode::kParse, "unknown configuration field " + name);
    json& target = base[it.key()];
    if (target.is_object()) {
      MergeKnown(target, it.value(), name);
    } else {
      target = it.value();
    }
  }
}

PipelineConfig ConfigFromMerged(const json& j) {
  try {
    PipelineConfig c;
    c.calibration = j.at("calibration").get<std::string>();
    const json& m = j.at("matcher");
    c.matcher.max_disparity = m.at("max_disparity").get<int>();
    c.matcher.census_window = m.at("census_window").get<int>();
    c.matcher.p1 = m.at("p1").get<int>();
    c.matcher.p2 = m.at("p2").get<int>();
    c.matcher.lr_tolerance = m.at("lr_tolerance").get<double>();
    const json& f = j.at("flow");
    c.flow.levels = f.at("levels").get<int>();
    c.flow.pyr_scale = f.at("pyr_scale").get<double>();
    c.flow.poly_n = f.at("poly_n").get<int>();
    c.flow.poly_sigma = f.at("poly_sigma").get<double>();
    c.flow.iterations = f.at("iterations").get<int>();
    c.flow.window = f.at("window").get<int>();
    c.flow.min_eigenvalue = f.at("min_eigenvalue").get<double>();
    c.min_disparity = j.at("depth").at("min_disparity").get<double>();
    const json& q = j.at("quality");
    c.quality.pixel_count = ParsePixelCount(q.at("pixel_count").get<std::string>());
    c.quality.histogram_bins = q.at("histogram_bins").get<std::size_t>();
    c.quality.histogram_lo = q.at("histogram_lo").get<double>();
    c.quality.histogram_hi = q.at("histogram_hi").get<double>();
    const json& s = j.at("sampler");
    c.sampler.mode = s.at("mode").get<std::string>();
    c.sampler.rate = s.at("rate").get<double>();
    c.sampler.fps = s.at("fps").get<double>();
    c.sampler.threshold = s.at("threshold").get<double>();
    c.sampler.burn_in = s.at("burn_in").get<std::size_t>();
    c.min_valid_fraction = j.at("distance").at("min_valid_fraction").get<double>();
    const json& t = j.at("ctds");
    const auto window = t.at("window").get<std::vector<double>>();
    if (window.size() != 2) throw Error(ErrorCode::kParse, "ctds.window needs [w_l, w]");
    c.ctds.w_l = window[0];
    c.ctds.w = window[1];
    c.ctds.bins = t.at("bins").get<int>();
    c.ctds.adjustments = t.at("adjustments").get<int>();
    c.ctds.key = ParseKey(t.at("key").get<std::string>());
    c.ctds.scaling = ParseScaling(t.at("scaling").get<std::string>());
    c.workers = j.at("workers").get<int>();
    c.output = j.at("output").get<std::string>();
    c.write_intermediates = j.at("write_intermediates").get<bool>();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("configuration: ") + e.what());
  }
}

bool IsFrameFile(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

std::vector<std::string> ListFrames(const fs::path& dir) {
  std::vector<std::string> frames;
  if (!fs::is_directory(dir)) return frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && IsFrameFile(entry.path())) frames.push_back(entry.path().string());
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

json ReportJson(const TemporalErrorReport& r) { return json::parse(TemporalErrorReportToJson(r)); }

struct PooledFit {
  TruncationResult truncation;
  BinnedDistances bins;
};

PooledFit FitPooled(const std::vector<DistanceRecord>& records, const CtdsConfig& config) {
  PooledFit out;
  out.truncation = CollectDistances(records, config.w_l, config.w);
  std::vector<double> distances;
  distances.reserve(out.truncation.kept.size());
  for (const auto& r : out.truncation.kept) distances.push_back(r.distance);
  out.bins = BinDistances(MakeBins(config.w_l, config.w, config.bins), distances);
  return out;
}

FitOptions OptionsFor(const CtdsConfig& config) {
  FitOptions opt;
  opt.key = config.key;
  opt.n_adjustments = config.adjustments;
  opt.scaling = config.scaling;
  return opt;
}

void WriteFit(const DetectionFunctionFit& fit, const GoodnessOfFit& gof, const std::string& fit_out,
              const std::string& svg_out) {
  if (!fit_out.empty()) WriteFileAtomic(fit_out, FitToJson(fit, &gof) + "\n");
  if (!svg_out.empty()) WriteFileAtomic(svg_out, DetectionProbabilitySvg(fit));
}

ObservationResult ProcessWithMap(const PipelineConfig& config, const RectificationMap& map,
                                 const Observation& obs) {
  ObservationResult res;
  res.id = obs.id;
  if (obs.frames.empty()) throw Error(ErrorCode::kEmptySequence, "observation has no frames");
  res.n_frames = obs.frames.size();

  DetectionsFile detections;
  std::set<std::size_t> detection_frames;
  if (!obs.detections.empty()) {
    detections = ParseDetectionsJson(ReadTextFile(obs.detections), map.width, map.height);
    for (const auto& d : detections.detections) detection_frames.insert(d.frame_index);
  }

  const bool adaptive = config.sampler.mode == "adaptive";
  std::optional<GmmBackgroundModel> gmm;
  if (adaptive) gmm.emplace(map.width, map.height);
  std::vector<double> ratios;

  const fs::path inter = fs::path(config.output) / "intermediate" / obs.id;
  const auto inter_path = [&](const char* prefix, std::size_t i) {
    return (inter / FrameFileName(prefix, i)).string();
  };

  TemporalErrorAccumulator temporal(config.quality.pixel_count);
  std::map<std::size_t, DepthMap> depths;
  GrayImage prev_left;
  for (std::size_t i = 0; i < obs.frames.size(); ++i) {
    auto [left, right] = SplitSbs(LoadGray(obs.frames[i]));
    if (left.width != map.width || left.height != map.height) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "frame " + obs.frames[i] + " does not match the calibrated sensor size");
    }
    GrayImage rect_left = Remap(left, map, Side::kLeft);
    GrayImage rect_right = Remap(right, map, Side::kRight);
    if (gmm) ratios.push_back(ForegroundRatio(gmm->Apply(rect_left)));

    const DisparityMap disp = ComputeDisparity(rect_left, rect_right, config.matcher);
    if (i == 0) {
      temporal.AddFrame(disp);
    } else {
      const FlowField flow = EstimateFlow(rect_left, prev_left, config.flow);
      temporal.AddFrame(disp, &flow);
      if (config.write_intermediates) WriteFlowPfm(flow, inter_path("flow", i));
    }
    DepthMap depth = DisparityToDepth(disp, map, config.min_disparity);
    if (config.write_intermediates) {
      WritePfm(rect_left, inter_path("left_rect", i));
      WritePfm(rect_right, inter_path("right_rect", i));
      WritePfm(disp, inter_path("disparity", i));
      WritePfm(depth, inter_path("depth", i));
    }
    if (detection_frames.count(i) != 0) depths.emplace(i, std::move(depth));
    prev_left = std::move(rect_left);
  }
  if (temporal.frames() >= 2) {
    res.temporal_error = temporal.Report();
  } else {
    Log(LogLevel::kWarning, obs.id + ": a single frame has no temporal error");
  }

  if (adaptive) {
    res.plan.mode = "adaptive";
    res.plan.threshold = config.sampler.threshold;
    res.plan.ratios = ratios;
    res.plan.indices = AccumulateRatios(ratios, config.sampler.threshold, config.sampler.burn_in);
  } else {
    const double fps = obs.fps > 0.0 ? obs.fps : config.sampler.fps;
    res.plan = FixedRateSample(obs.frames.size(), fps, config.sampler.rate);
  }
  res.plan.video_id = obs.id;

  const std::set<std::size_t> planned(res.plan.indices.begin(), res.plan.indices.end());
  res.detections_total = detections.detections.size();
  for (const auto& det : detections.detections) {
    if (planned.count(det.frame_index) == 0) {
      ++res.detections_outside_plan;
      continue;
    }
    const auto it = depths.find(det.frame_index);
    if (it == depths.end()) {
      res.skipped.push_back({det.frame_index, "frame index beyond the observation"});
      continue;
    }
    try {
      DistanceRecord rec = ExtractDistance(it->second, det, config.min_valid_fraction);
      rec.observation_id = obs.id;
      res.distances.push_back(std::move(rec));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoValidDepth) throw;
      res.skipped.push_back({det.frame_index, e.what()});
    }
  }
  res.ok = true;
  return res;
}

RectificationMap MapFor(const PipelineConfig& config) {
  return ComputeRectification(LoadCalibration(config.calibration));
}

json ObservationJson(const Observation& obs, const ObservationResult& r) {
  json j = {{"id", r.id}, {"status", r.ok ? "ok" : "failed"}, {"n_frames", obs.frames.size()}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["fps"] = obs.fps > 0.0 ? json(obs.fps) : json(nullptr);
  j["camera_id"] = obs.camera_id;
  j["timestamp"] = obs.timestamp;
  j["e_t"] = r.temporal_error ? json(r.temporal_error->e_t) : json(nullptr);
  j["sampled_frames"] = r.plan.indices.size();
  j["detections_total"] = r.detections_total;
  j["detections_outside_plan"] = r.detections_outside_plan;
  j["distances"] = r.distances.size();
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"frame_index", s.frame_index}, {"reason", s.reason}});
  j["skipped_detections"] = skipped;
  return j;
}

}  // namespace

void PipelineConfig::validate() const {
  matcher.validate();
  flow.validate();
  if (!(min_disparity >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "depth.min_disparity must be non-negative");
  }
  if (quality.histogram_bins < 1 || !(quality.histogram_lo < quality.histogram_hi)) {
    throw Error(ErrorCode::kInvalidArgument, "quality histogram needs bins >= 1 and lo < hi");
  }
  if (sampler.mode != "fixed" && sampler.mode != "adaptive") {
    throw Error(ErrorCode::kInvalidArgument, "sampler.mode must be fixed or adaptive");
  }
  if (!(sampler.rate > 0.0) || !(sampler.fps > 0.0) || !(sampler.threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sampler rate, fps and threshold must be positive");
  }
  if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "distance.min_valid_fraction must lie in [0, 1]");
  }
  if (!(ctds.w_l >= 0.0 && ctds.w_l < ctds.w) || ctds.bins < 1) {
    throw Error(ErrorCode::kInvalidWindow, "ctds window needs 0 <= w_l < w and bins >= 1");
  }
  if (ctds.adjustments < 0 || ctds.adjustments > 5) {
    throw Error(ErrorCode::kInvalidArgument, "ctds.adjustments must be in [0, 5]");
  }
  if (workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be at least 1");
  if (output.empty()) throw Error(ErrorCode::kInvalidArgument, "output directory is empty");
  if (calibration.empty() || !fs::is_regular_file(calibration)) {
    throw Error(ErrorCode::kIo, "calibration file not found: " + calibration);
  }
}

std::string PipelineConfigToJson(const PipelineConfig& config) {
  return ConfigJson(config).dump(2);
}

PipelineConfig PipelineConfigFromJson(const std::string& text, const std::string& base_dir) {
  json merged = ConfigJson(PipelineConfig{});
  try {
    MergeKnown(merged, json::parse(text), "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("configuration: ") + e.what());
  }
  PipelineConfig c = ConfigFromMerged(merged);
  if (!base_dir.empty() && !c.calibration.empty() && fs::path(c.calibration).is_relative()) {
    c.calibration = (fs::path(base_dir) / c.calibration).lexically_normal().string();
  }
  return c;
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  return PipelineConfigFromJson(ReadTextFile(path), fs::path(path).parent_path().string());
}

void ApplyOverride(PipelineConfig& config, const std::string& key, const std::string& value) {
  std::string dotted = key;
  std::replace(dotted.begin(), dotted.end(), '-', '_');
  json merged = ConfigJson(config);
  json* node = &merged;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw Error(ErrorCode::kInvalidArgument, "unknown configuration field " + key);
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw Error(ErrorCode::kInvalidArgument, key + " is a section, not a field");

  json parsed;
  const std::size_t colon = value.find(':');
  if (dotted == "ctds.window" && colon != std::string::npos) {
    try {
      parsed = json::array({std::stod(value.substr(0, colon)), std::stod(value.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "ctds.window expects W_L:W");
    }
  } else if (node->is_string()) {
    parsed = value;
  } else {
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;
    }
  }
  *node = parsed;
  config = ConfigFromMerged(merged);
}

ObservationStore ScanObservationStore(const std::string& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIo, "observation store not found: " + root);
  ObservationStore store;
  store.root = root;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path dir = entry.path();
    Observation obs;
    obs.id = dir.filename().string();
    obs.directory = dir.string();
    obs.frames = ListFrames(dir);
    if (obs.frames.empty()) obs.frames = ListFrames(dir / "frames");
    if (obs.frames.empty()) continue;
    if (fs::is_regular_file(dir / "meta.json")) {
      try {
        const json meta = json::parse(ReadTextFile((dir / "meta.json").string()));
        obs.fps = meta.value("fps", 0.0);
        obs.timestamp = meta.value("timestamp", std::string{});
        obs.camera_id = meta.value("camera_id", std::string{});
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, obs.id + "/meta.json: " + e.what());
      }
    }
    if (fs::is_regular_file(dir / "detections.json")) obs.detections = (dir / "detections.json").string();
    store.observations.push_back(std::move(obs));
  }
  std::sort(store.observations.begin(), store.observations.end(),
            [](const Observation& a, const Observation& b) { return a.id < b.id; });
  return store;
}

ObservationResult ProcessObservation(const PipelineConfig& config, const Observation& obs) {
  config.validate();
  return ProcessWithMap(config, MapFor(config), obs);
}

RunSummary RunPipeline(const PipelineConfig& config, const ObservationStore& store) {
  config.validate();
  const RectificationMap map = MapFor(config);
  const fs::path out(config.output);
  fs::create_directories(out);

  RunSummary summary;
  summary.observations = store.observations.size();
  if (store.observations.empty()) Log(LogLevel::kWarning, "observation store is empty");

  std::vector<ObservationResult> results(store.observations.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      const Observation& obs = store.observations[i];
      try {
        results[i] = ProcessWithMap(config, map, obs);
        Log(LogLevel::kInfo, obs.id + ": " + std::to_string(results[i].distances.size()) +
                                 " distances from " + std::to_string(obs.frames.size()) + " frames");
      } catch (const std::exception& e) {
        results[i] = ObservationResult{};
        results[i].id = obs.id;
        results[i].error = e.what();
        Log(LogLevel::kWarning, obs.id + " skipped: " + e.what());
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(results.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<DistanceRecord> pooled;
  json e_t_reports = json::array();
  std::vector<TemporalErrorReport> temporal_reports;
  json observations = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const ObservationResult& r = results[i];
    observations.push_back(ObservationJson(store.observations[i], r));
    if (!r.ok) {
      ++summary.failed;
      continue;
    }
    ++summary.succeeded;
    WriteFileAtomic((out / "sample_plans" / (r.id + ".json")).string(), SamplePlanToJson(r.plan) + "\n");
    if (r.temporal_error) {
      json entry = {{"observation_id", r.id}};
      entry.update(ReportJson(*r.temporal_error));
      e_t_reports.push_back(entry);
      temporal_reports.push_back(*r.temporal_error);
    }
    pooled.insert(pooled.end(), r.distances.begin(), r.distances.end());
  }
  summary.distances = pooled.size();

  WriteFileAtomic((out / "distances.csv").string(), DistanceRecordsToCsv(pooled));
  WriteFileAtomic((out / "e_t_report.json").string(),
                  json({{"pixel_count", PixelCountName(config.quality.pixel_count)},
                        {"observations", e_t_reports}})
                          .dump(2) + "\n");
  WriteFileAtomic((out / "e_t_histogram.csv").string(),
                  HistogramToCsv(ErrorHistogram(temporal_reports, config.quality.histogram_bins,
                                                config.quality.histogram_lo,
                                                config.quality.histogram_hi)));

  PooledFit pooled_fit = FitPooled(pooled, config.ctds);
  json ctds = {{"window", {config.ctds.w_l, config.ctds.w}},
               {"bins", config.ctds.bins},
               {"distances_in_window", pooled_fit.truncation.kept.size()},
               {"discarded_left", pooled_fit.truncation.discarded_left},
               {"discarded_right", pooled_fit.truncation.discarded_right}};
  if (pooled_fit.bins.total() == 0) {
    ctds["status"] = "skipped";
    ctds["reason"] = "no distances inside the truncation window";
    Log(LogLevel::kWarning, "no distances inside the truncation window; detection function not fitted");
  } else {
    try {
      const DetectionFunctionFit fit = FitDetectionFunction(pooled_fit.bins, OptionsFor(config.ctds));
      const GoodnessOfFit gof = GofChi2(pooled_fit.bins, fit);
      WriteFit(fit, gof, (out / "ctds_fit.json").string(),
               (out / "detection_probability.svg").string());
      ctds["status"] = "fitted";
      ctds["p_hat"] = fit.p_hat;
      ctds["aic"] = fit.aic;
      summary.fitted = true;
    } catch (const Error& e) {
      ctds["status"] = "failed";
      ctds["reason"] = e.what();
      Log(LogLevel::kWarning, std::string("detection function fit failed: ") + e.what());
    }
  }

  if (summary.observations > 0 && summary.succeeded == 0) summary.exit_code = 1;
  const json report = {{"config", ConfigJson(config)},
                       {"observations_total", summary.observations},
                       {"observations_succeeded", summary.succeeded},
                       {"observations_failed", summary.failed},
                       {"distances_total", summary.distances},
                       {"observations", observations},
                       {"ctds", ctds},
                       {"exit_code", summary.exit_code}};
  WriteFileAtomic((out / "run_report.json").string(), report.dump(2) + "\n");
  return summary;
}

std::string FrameFileName(const std::string& prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%06zu.pfm", index);
  return prefix + buf;
}

void StageSplit(const std::string& frame, const std::string& left_out, const std::string& right_out) {
  auto [left, right] = SplitSbs(LoadGray(frame));
  WriteGray(left, left_out);
  WriteGray(right, right_out);
}

void StageRectify(const std::string& calibration, const std::string& left_in,
                  const std::string& right_in, const std::string& left_out,
                  const std::string& right_out) {
  const RectificationMap map = ComputeRectification(LoadCalibration(calibration));
  WriteGray(Remap(LoadGray(left_in), map, Side::kLeft), left_out);
  WriteGray(Remap(LoadGray(right_in), map, Side::kRight), right_out);
}

void StageMatch(const std::string& left, const std::string& right, const MatcherParams& params,
                const std::string& disparity_out, const std::string& png_out) {
  const DisparityMap disp = ComputeDisparity(LoadGray(left), LoadGray(right), params);
  WritePfm(disp, disparity_out);
  if (!png_out.empty()) WriteDisparityPng(disp, png_out);
}

void StageDepth(const std::string& calibration, const std::string& disparity, double min_disparity,
                const std::string& depth_out) {
  const RectifiedCamera cam = ComputeRectifiedCamera(LoadCalibration(calibration));
  const DisparityMap disp(ReadPfm(disparity), 0.0);
  WritePfm(DisparityToDepth(disp, cam.baseline, cam.fx, min_disparity), depth_out);
}

void StageFlow(const std::string& prev, const std::string& curr, const FlowParams& params,
               const std::string& flow_out) {
  WriteFlowPfm(EstimateFlow(LoadGray(curr), LoadGray(prev), params), flow_out);
}

TemporalErrorReport StageQuality(const std::vector<std::string>& disparities,
                                 const std::vector<std::string>& flows,
                                 PixelCountConvention convention, const std::string& report_out) {
  if (disparities.size() < 2) {
    throw Error(ErrorCode::kEmptySequence, "temporal error needs at least two frames");
  }
  if (flows.size() != disparities.size() - 1) {
    throw Error(ErrorCode::kLengthMismatch, "temporal error needs one flow per frame pair");
  }
  TemporalErrorAccumulator acc(convention);
  acc.AddFrame(DisparityMap(ReadPfm(disparities[0]), 0.0));
  for (std::size_t i = 1; i < disparities.size(); ++i) {
    const FlowField flow = ReadFlowPfm(flows[i - 1]);
    acc.AddFrame(DisparityMap(ReadPfm(disparities[i]), 0.0), &flow);
  }
  TemporalErrorReport report = acc.Report();
  if (!report_out.empty()) WriteFileAtomic(report_out, TemporalErrorReportToJson(report) + "\n");
  return report;
}

SamplePlan StageSample(const std::vector<std::string>& frames, const SamplerConfig& config,
                       const std::string& video_id, const std::string& plan_out) {
  SamplePlan plan;
  if (config.mode == "adaptive") {
    if (!(config.threshold > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "accumulation threshold must be positive");
    }
    plan.mode = "adaptive";
    plan.threshold = config.threshold;
    std::optional<GmmBackgroundModel> gmm;
    for (const auto& f : frames) {
      const GrayImage img = LoadGray(f);
      if (!gmm) gmm.emplace(img.width, img.height);
      plan.ratios.push_back(ForegroundRatio(gmm->Apply(img)));
    }
    plan.indices = AccumulateRatios(plan.ratios, config.threshold, config.burn_in);
  } else if (config.mode == "fixed") {
    plan = FixedRateSample(frames.size(), config.fps, config.rate);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "sampler mode must be fixed or adaptive");
  }
  plan.video_id = video_id;
  if (!plan_out.empty()) WriteFileAtomic(plan_out, SamplePlanToJson(plan) + "\n");
  return plan;
}

std::vector<DistanceRecord> StageDistances(const std::string& detections,
                                           const std::string& depth_dir, const std::string& plan,
                                           const std::string& observation_id,
                                           double min_valid_fraction, const std::string& csv_out,
                                           bool append) {
  // Mask sizes come from the depth maps.
  int width = 0, height = 0;
  for (const auto& entry : fs::directory_iterator(depth_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("depth_", 0) == 0 && entry.path().extension() == ".pfm") {
      const Raster r = ReadPfm(entry.path().string());
      width = r.width;
      height = r.height;
      break;
    }
  }
  const DetectionsFile file = ParseDetectionsJson(ReadTextFile(detections), width, height);
  std::optional<std::set<std::size_t>> planned;
  if (!plan.empty()) {
    const SamplePlan p = SamplePlanFromJson(ReadTextFile(plan));
    planned.emplace(p.indices.begin(), p.indices.end());
  }
  const std::string id = observation_id.empty() ? file.video_id : observation_id;

  std::vector<DistanceRecord> records;
  std::map<std::size_t, DepthMap> cache;
  for (const auto& det : file.detections) {
    if (planned && planned->count(det.frame_index) == 0) continue;
    auto it = cache.find(det.frame_index);
    if (it == cache.end()) {
      const fs::path p = fs::path(depth_dir) / FrameFileName("depth", det.frame_index);
      if (!fs::is_regular_file(p)) {
        Log(LogLevel::kWarning, "no depth map for frame " + std::to_string(det.frame_index));
        continue;
      }
      it = cache.emplace(det.frame_index, DepthMap(ReadPfm(p.string()))).first;
    }
    try {
      DistanceRecord rec = ExtractDistance(it->second, det, min_valid_fraction);
      rec.observation_id = id;
      records.push_back(std::move(rec));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoValidDepth) throw;
      Log(LogLevel::kWarning, "frame " + std::to_string(det.frame_index) + ": " + e.what());
    }
  }
  if (!csv_out.empty()) {
    std::vector<DistanceRecord> all;
    if (append && fs::is_regular_file(csv_out)) all = DistanceRecordsFromCsv(ReadTextFile(csv_out));
    all.insert(all.end(), records.begin(), records.end());
    WriteFileAtomic(csv_out, DistanceRecordsToCsv(all));
  }
  return records;
}

DetectionFunctionFit StageCtdsFit(const std::vector<std::string>& inputs, const CtdsConfig& config,
                                  const std::string& fit_out, const std::string& svg_out) {
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "ctds-fit needs an input file");
  BinnedDistances bins;
  if (inputs.size() == 1 && fs::path(inputs[0]).extension() == ".json") {
    bins = BinnedFromJson(ReadTextFile(inputs[0]));
  } else {
    std::vector<DistanceRecord> records;
    for (const auto& in : inputs) {
      const auto part = DistanceRecordsFromCsv(ReadTextFile(in));
      records.insert(records.end(), part.begin(), part.end());
    }
    bins = FitPooled(records, config).bins;
  }
  const DetectionFunctionFit fit = FitDetectionFunction(bins, OptionsFor(config));
  WriteFit(fit, GofChi2(bins, fit), fit_out, svg_out);
  return fit;
}

Histogram StageReport(const std::vector<std::string>& reports, std::size_t bins, double lo,
                      double hi, const std::string& csv_out) {
  std::vector<TemporalErrorReport> parsed;
  for (const auto& path : reports) {
    const std::string text = ReadTextFile(path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path + ": " + e.what());
    }
    if (j.contains("observations")) {
      for (const auto& entry : j["observations"]) parsed.push_back(TemporalErrorReportFromJson(entry.dump()));
    } else {
      parsed.push_back(TemporalErrorReportFromJson(text));
    }
  }
  Histogram h = ErrorHistogram(parsed, bins, lo, hi);
  if (!csv_out.empty()) WriteFileAtomic(csv_out, HistogramToCsv(h));
  return h;
}

}  // namespace stereotrap
