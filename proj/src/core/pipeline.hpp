#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "core/ctds.hpp"
#include "core/distance.hpp"
#include "core/flow.hpp"
#include "core/matching.hpp"
#include "core/quality.hpp"
#include "core/sampler.hpp"

namespace stereotrap {

struct SamplerConfig {
  std::string mode = "fixed";  // "fixed" or "adaptive"
  double rate = 2.0;           // samples per second, fixed mode
  double fps = 30.0;           // used when an observation has no metadata
  double threshold = 0.10;     // accumulation threshold, adaptive mode
  std::size_t burn_in = kDefaultBurnInFrames;
};

struct CtdsConfig {
  double w_l = 3.0;
  double w = 11.0;
  int bins = 7;
  int adjustments = 1;
  KeyFunction key = KeyFunction::kUniform;
  ScalingPoint scaling = ScalingPoint::kLeftTruncation;
};

struct QualityConfig {
  PixelCountConvention pixel_count = PixelCountConvention::kValidOnly;
  std::size_t histogram_bins = 50;
  double histogram_lo = 0.0;
  double histogram_hi = 5.0;
};

struct PipelineConfig {
  std::string calibration;
  MatcherParams matcher;
  FlowParams flow;
  double min_disparity = kDefaultMinDisparity;
  QualityConfig quality;
  SamplerConfig sampler;
  double min_valid_fraction = kMinValidDepthFraction;
  CtdsConfig ctds;
  int workers = 1;
  std::string output = "stereotrap_out";
  bool write_intermediates = false;

  // Checks ranges and that the calibration file exists.
  void validate() const;
};

// Every field, nested as in the JSON document.
std::string PipelineConfigToJson(const PipelineConfig& config);
// Missing fields keep their defaults; unknown fields are rejected. A relative
// calibration path is resolved against base_dir when that is non-empty.
PipelineConfig PipelineConfigFromJson(const std::string& text, const std::string& base_dir = "");
PipelineConfig LoadPipelineConfig(const std::string& path);

// Sets one field by dotted name ("matcher.max_disparity"; dashes are accepted
// in place of underscores). The value is parsed as JSON when possible, else
// taken as a string. "ctds.window" also accepts "3:11".
void ApplyOverride(PipelineConfig& config, const std::string& key, const std::string& value);

struct Observation {
  std::string id;
  std::string directory;
  std::vector<std::string> frames;  // lexicographic order
  double fps = 0.0;                 // 0 when unknown
  std::string timestamp;
  std::string camera_id;
  std::string detections;  // empty when absent
};

struct ObservationStore {
  std::string root;
  std::vector<Observation> observations;  // sorted by id
};

// Every subdirectory of root holding frame images (.png, .pgm, .ppm) is an
// observation; frames may also sit in a "frames" subdirectory. Optional
// meta.json {fps, timestamp, camera_id} and detections.json are picked up.
ObservationStore ScanObservationStore(const std::string& root);

struct DetectionSkip {
  std::size_t frame_index = 0;
  std::string reason;
};

struct ObservationResult {
  std::string id;
  bool ok = false;
  std::string error;
  std::size_t n_frames = 0;
  std::optional<TemporalErrorReport> temporal_error;  // absent for one-frame observations
  SamplePlan plan;
  std::size_t detections_total = 0;
  std::size_t detections_outside_plan = 0;
  std::vector<DistanceRecord> distances;
  std::vector<DetectionSkip> skipped;
};

// Runs all per-observation stages. Throws on failure.
ObservationResult ProcessObservation(const PipelineConfig& config, const Observation& obs);

struct RunSummary {
  std::size_t observations = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t distances = 0;
  bool fitted = false;
  int exit_code = 0;
};

// Processes every observation (up to config.workers in parallel), pools the
// distances, fits the detection function and writes all outputs under
// config.output. Per-observation failures are logged and skipped; exit_code is
// 1 only when observations exist and none succeeded.
RunSummary RunPipeline(const PipelineConfig& config, const ObservationStore& store);

// File-level stages. Rasters travel as PFM files (NaN = invalid); the
// intermediate names used by RunPipeline are FrameFileName(prefix, index).
std::string FrameFileName(const std::string& prefix, std::size_t index);

void StageSplit(const std::string& frame, const std::string& left_out,
                const std::string& right_out);
void StageRectify(const std::string& calibration, const std::string& left_in,
                  const std::string& right_in, const std::string& left_out,
                  const std::string& right_out);
// png_out (optional) receives the disparity scaled by 256.
void StageMatch(const std::string& left, const std::string& right, const MatcherParams& params,
                const std::string& disparity_out, const std::string& png_out = "");
void StageDepth(const std::string& calibration, const std::string& disparity,
                double min_disparity, const std::string& depth_out);
void StageFlow(const std::string& prev, const std::string& curr, const FlowParams& params,
               const std::string& flow_out);
// flows[i] maps frame i + 1 to frame i.
TemporalErrorReport StageQuality(const std::vector<std::string>& disparities,
                                 const std::vector<std::string>& flows,
                                 PixelCountConvention convention, const std::string& report_out);
SamplePlan StageSample(const std::vector<std::string>& frames, const SamplerConfig& config,
                       const std::string& video_id, const std::string& plan_out);
// Depth maps are read from depth_dir/FrameFileName("depth", frame). With a
// plan, only planned frames are used. Rows are appended when `append` is set
// and the CSV exists.
std::vector<DistanceRecord> StageDistances(const std::string& detections,
                                           const std::string& depth_dir,
                                           const std::string& plan, const std::string& observation_id,
                                           double min_valid_fraction, const std::string& csv_out,
                                           bool append = false);
// Input is a distance CSV or a binned JSON {edges, counts}.
DetectionFunctionFit StageCtdsFit(const std::vector<std::string>& inputs, const CtdsConfig& config,
                                  const std::string& fit_out, const std::string& svg_out);
// Histogram of per-frame errors over one or more E_t reports (either single
// reports or the pipeline's combined report).
Histogram StageReport(const std::vector<std::string>& reports, std::size_t bins, double lo,
                      double hi, const std::string& csv_out);

}  // namespace stereotrap
