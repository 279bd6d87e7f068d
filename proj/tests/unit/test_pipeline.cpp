#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/io.hpp"
#include "core/pipeline.hpp"
#include "support/error_code.hpp"
#include "support/synthetic.hpp"

namespace stereotrap {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::CodeOf;
using testing::MakeRig;
using testing::ReadFile;
using testing::RotationXYZ;
using testing::TempDir;

CalibrationSet SmallRig() {
  return MakeRig(160, 120, 200.0, 0.3, RotationXYZ(0.003, -0.004, 0.002), -0.03, 0.0);
}

PipelineConfig SmallConfig(const TempDir& dir) {
  const std::string calib = dir.str("calib.json");
  if (!fs::exists(calib)) WriteFileAtomic(calib, CalibrationToJson(SmallRig()));
  PipelineConfig c;
  c.calibration = calib;
  c.matcher.max_disparity = 24;
  c.sampler.rate = 10.0;
  c.output = dir.str("out");
  return c;
}

std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = ReadFile(e.path());
  }
  return files;
}

TEST(PipelineConfig, DefaultsRoundTrip) {
  const PipelineConfig d;
  EXPECT_EQ(d.ctds.w_l, 3.0);
  EXPECT_EQ(d.ctds.w, 11.0);
  EXPECT_EQ(d.ctds.bins, 7);
  EXPECT_EQ(d.ctds.adjustments, 1);
  EXPECT_EQ(d.sampler.mode, "fixed");
  EXPECT_EQ(d.sampler.rate, 2.0);
  EXPECT_EQ(d.sampler.threshold, 0.10);
  const PipelineConfig back = PipelineConfigFromJson(PipelineConfigToJson(d));
  EXPECT_EQ(PipelineConfigToJson(back), PipelineConfigToJson(d));
}

TEST(PipelineConfig, PartialDocumentKeepsDefaults) {
  const PipelineConfig c = PipelineConfigFromJson(
      R"({"matcher": {"max_disparity": 96}, "sampler": {"mode": "adaptive"}, "ctds": {"window": [2, 12]}})");
  EXPECT_EQ(c.matcher.max_disparity, 96);
  EXPECT_EQ(c.matcher.census_window, PipelineConfig{}.matcher.census_window);
  EXPECT_EQ(c.sampler.mode, "adaptive");
  EXPECT_EQ(c.ctds.w_l, 2.0);
  EXPECT_EQ(c.ctds.w, 12.0);
  EXPECT_EQ(c.ctds.bins, 7);
}

TEST(PipelineConfig, RejectsUnknownAndMalformed) {
  EXPECT_EQ(CodeOf([] { PipelineConfigFromJson(R"({"matcher": {"max_disp": 3}})"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { PipelineConfigFromJson(R"({"bogus": 1})"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { PipelineConfigFromJson(R"({"workers": "many"})"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { PipelineConfigFromJson("[1]"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { PipelineConfigFromJson(R"({"ctds": {"key": "hazard"}})"); }),
            ErrorCode::kInvalidArgument);
}

TEST(PipelineConfig, RelativeCalibrationResolvesAgainstConfigFile) {
  TempDir dir("cfg");
  fs::create_directories(dir.path() / "conf");
  WriteFileAtomic(dir.str("conf/run.json"), R"({"calibration": "../calib.json"})");
  const PipelineConfig c = LoadPipelineConfig(dir.str("conf/run.json"));
  EXPECT_EQ(fs::path(c.calibration), (dir.path() / "calib.json").lexically_normal());
}

TEST(PipelineConfig, Overrides) {
  PipelineConfig c;
  ApplyOverride(c, "matcher.max-disparity", "64");
  ApplyOverride(c, "ctds.bins", "5");
  ApplyOverride(c, "ctds.window", "2.5:10");
  ApplyOverride(c, "sampler.mode", "adaptive");
  ApplyOverride(c, "sampler.threshold", "0.2");
  ApplyOverride(c, "quality.pixel_count", "full-frame");
  ApplyOverride(c, "write_intermediates", "true");
  EXPECT_EQ(c.matcher.max_disparity, 64);
  EXPECT_EQ(c.ctds.bins, 5);
  EXPECT_EQ(c.ctds.w_l, 2.5);
  EXPECT_EQ(c.ctds.w, 10.0);
  EXPECT_EQ(c.sampler.mode, "adaptive");
  EXPECT_EQ(c.sampler.threshold, 0.2);
  EXPECT_EQ(c.quality.pixel_count, PixelCountConvention::kFullFrame);
  EXPECT_TRUE(c.write_intermediates);
  EXPECT_EQ(CodeOf([&] { ApplyOverride(c, "matcher.nope", "1"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { ApplyOverride(c, "matcher", "1"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { ApplyOverride(c, "ctds.window", "a:b"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { ApplyOverride(c, "workers", "lots"); }), ErrorCode::kParse);
}

TEST(PipelineConfig, Validate) {
  TempDir dir("validate");
  PipelineConfig c = SmallConfig(dir);
  EXPECT_NO_THROW(c.validate());
  PipelineConfig bad = c;
  bad.ctds.w_l = 12.0;
  EXPECT_EQ(CodeOf([&] { bad.validate(); }), ErrorCode::kInvalidWindow);
  bad = c;
  bad.sampler.mode = "random";
  EXPECT_EQ(CodeOf([&] { bad.validate(); }), ErrorCode::kInvalidArgument);
  bad = c;
  bad.workers = 0;
  EXPECT_EQ(CodeOf([&] { bad.validate(); }), ErrorCode::kInvalidArgument);
  bad = c;
  bad.calibration = dir.str("missing.json");
  EXPECT_EQ(CodeOf([&] { bad.validate(); }), ErrorCode::kIo);
}

TEST(ScanObservationStore, FindsFramesMetaAndDetections) {
  TempDir dir("scan");
  const fs::path root = dir.path() / "store";
  fs::create_directories(root / "b_obs");
  fs::create_directories(root / "a_obs" / "frames");
  fs::create_directories(root / "empty");
  WriteGray(GrayImage(4, 2), (root / "b_obs" / "f2.png").string());
  WriteGray(GrayImage(4, 2), (root / "b_obs" / "f10.png").string());
  WriteFileAtomic((root / "b_obs" / "notes.txt").string(), "x");
  WriteGray(GrayImage(4, 2), (root / "a_obs" / "frames" / "0001.pgm").string());
  WriteFileAtomic((root / "a_obs" / "meta.json").string(),
                  R"({"fps": 25, "timestamp": "t0", "camera_id": "cam7"})");
  WriteFileAtomic((root / "a_obs" / "detections.json").string(), R"({"frames": []})");

  const ObservationStore store = ScanObservationStore(root.string());
  ASSERT_EQ(store.observations.size(), 2u);
  const Observation& a = store.observations[0];
  EXPECT_EQ(a.id, "a_obs");
  EXPECT_EQ(a.frames.size(), 1u);
  EXPECT_EQ(a.fps, 25.0);
  EXPECT_EQ(a.camera_id, "cam7");
  EXPECT_FALSE(a.detections.empty());
  const Observation& b = store.observations[1];
  ASSERT_EQ(b.frames.size(), 2u);
  EXPECT_EQ(fs::path(b.frames[0]).filename(), "f10.png");
  EXPECT_EQ(b.fps, 0.0);
  EXPECT_TRUE(b.detections.empty());

  EXPECT_EQ(CodeOf([&] { ScanObservationStore(dir.str("nowhere")); }), ErrorCode::kIo);
}

TEST(RunPipeline, EmptyStoreSucceedsWithEmptyOutputs) {
  TempDir dir("empty");
  fs::create_directories(dir.path() / "store");
  const PipelineConfig c = SmallConfig(dir);
  const RunSummary s = RunPipeline(c, ScanObservationStore(dir.str("store")));
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.observations, 0u);
  EXPECT_FALSE(s.fitted);
  EXPECT_EQ(ReadFile(dir.path() / "out" / "distances.csv"),
            "observation_id,frame_index,distance_m,method,valid_depth_fraction\n");
  const json report = json::parse(ReadFile(dir.path() / "out" / "run_report.json"));
  EXPECT_EQ(report["observations_total"], 0);
  EXPECT_EQ(report["ctds"]["status"], "skipped");
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "e_t_report.json"));
}

// Fixture with one small synthetic observation rendered once for the suite.
class SyntheticRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("pipeline");
    WriteFileAtomic(dir_->str("calib.json"), CalibrationToJson(SmallRig()));
    testing::BoxScene scene;
    testing::WriteBoxObservation(dir_->path() / "store" / "obs_a", SmallRig(), scene, 4, 30.0, {0, 3},
                                 {});
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
};

TempDir* SyntheticRun::dir_ = nullptr;

TEST_F(SyntheticRun, RecoversBoxDistanceAndIsDeterministic) {
  PipelineConfig c = SmallConfig(*dir_);
  c.output = dir_->str("out_det");
  const ObservationStore store = ScanObservationStore(dir_->str("store"));
  const RunSummary s = RunPipeline(c, store);
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.succeeded, 1u);
  const auto records = DistanceRecordsFromCsv(ReadFile(dir_->path() / "out_det" / "distances.csv"));
  ASSERT_EQ(records.size(), 2u);
  for (const auto& r : records) {
    EXPECT_EQ(r.observation_id, "obs_a");
    EXPECT_EQ(r.method, DistanceMethod::kMaskMedian);
    EXPECT_NEAR(r.distance, 6.0, 0.12);
  }
  for (const char* name : {"e_t_report.json", "run_report.json", "sample_plans/obs_a.json",
                           "e_t_histogram.csv"}) {
    EXPECT_TRUE(fs::exists(dir_->path() / "out_det" / name)) << name;
  }
  const auto first = Snapshot(dir_->path() / "out_det");
  RunPipeline(c, store);
  EXPECT_EQ(Snapshot(dir_->path() / "out_det"), first);
}

TEST_F(SyntheticRun, FailingObservationIsSkipped) {
  TempDir other("mixed");
  const fs::path store_root = other.path() / "store";
  fs::create_directories(store_root / "bad" / "frames");
  WriteGray(GrayImage(30, 20, 0.5f), (store_root / "bad" / "frames" / "0.png").string());
  fs::copy(dir_->path() / "store" / "obs_a", store_root / "obs_a", fs::copy_options::recursive);

  PipelineConfig c = SmallConfig(*dir_);
  c.output = other.str("out");
  c.workers = 2;
  const RunSummary s = RunPipeline(c, ScanObservationStore(store_root.string()));
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.succeeded, 1u);
  EXPECT_EQ(s.failed, 1u);
  const json report = json::parse(ReadFile(other.path() / "out" / "run_report.json"));
  EXPECT_EQ(report["observations"][0]["id"], "bad");
  EXPECT_EQ(report["observations"][0]["status"], "failed");
  EXPECT_EQ(report["observations"][1]["status"], "ok");

  fs::remove_all(store_root / "obs_a");
  const RunSummary all_bad = RunPipeline(c, ScanObservationStore(store_root.string()));
  EXPECT_EQ(all_bad.exit_code, 1);
  EXPECT_EQ(all_bad.succeeded, 0u);
}

TEST_F(SyntheticRun, StagesReproduceMonolithicRun) {
  PipelineConfig c = SmallConfig(*dir_);
  c.output = dir_->str("out_stages");
  c.write_intermediates = true;
  const ObservationStore store = ScanObservationStore(dir_->str("store"));
  ASSERT_EQ(RunPipeline(c, store).succeeded, 1u);
  const fs::path out = dir_->path() / "out_stages";
  const fs::path inter = out / "intermediate" / "obs_a";
  const Observation& obs = store.observations[0];

  // Raw frame -> depth through the file-level stages.
  const fs::path work = dir_->path() / "stages";
  fs::create_directories(work);
  std::vector<std::string> disparities, flows;
  for (std::size_t i = 0; i < obs.frames.size(); ++i) {
    const auto p = [&](const char* prefix) { return (work / FrameFileName(prefix, i)).string(); };
    StageSplit(obs.frames[i], p("left"), p("right"));
    StageRectify(c.calibration, p("left"), p("right"), p("left_rect"), p("right_rect"));
    EXPECT_EQ(ReadFile(p("left_rect")), ReadFile(inter / FrameFileName("left_rect", i)));
    StageMatch(p("left_rect"), p("right_rect"), c.matcher, p("disparity"));
    EXPECT_EQ(ReadFile(p("disparity")), ReadFile(inter / FrameFileName("disparity", i)));
    StageDepth(c.calibration, p("disparity"), c.min_disparity, p("depth"));
    EXPECT_EQ(ReadFile(p("depth")), ReadFile(inter / FrameFileName("depth", i)));
    disparities.push_back(p("disparity"));
    if (i > 0) {
      StageFlow((work / FrameFileName("left_rect", i - 1)).string(), p("left_rect"), c.flow, p("flow"));
      EXPECT_EQ(ReadFile(p("flow")), ReadFile(inter / FrameFileName("flow", i)));
      flows.push_back(p("flow"));
    }
  }

  const TemporalErrorReport q =
      StageQuality(disparities, flows, c.quality.pixel_count, (work / "quality.json").string());
  const json combined = json::parse(ReadFile(out / "e_t_report.json"));
  EXPECT_EQ(q.e_t, combined["observations"][0]["e_t"].get<double>());

  c.sampler.fps = 30.0;
  StageSample(obs.frames, c.sampler, "obs_a", (work / "plan.json").string());
  EXPECT_EQ(ReadFile(work / "plan.json"), ReadFile(out / "sample_plans" / "obs_a.json"));

  StageDistances(obs.detections, work.string(), (work / "plan.json").string(), "obs_a",
                 c.min_valid_fraction, (work / "distances.csv").string());
  EXPECT_EQ(ReadFile(work / "distances.csv"), ReadFile(out / "distances.csv"));

  const Histogram h = StageReport({(out / "e_t_report.json").string()}, c.quality.histogram_bins,
                                  c.quality.histogram_lo, c.quality.histogram_hi,
                                  (work / "hist.csv").string());
  EXPECT_EQ(ReadFile(work / "hist.csv"), ReadFile(out / "e_t_histogram.csv"));
  std::size_t total = h.underflow + h.overflow;
  for (std::size_t n : h.counts) total += n;
  EXPECT_EQ(total, 1u);
}

TEST(StageCtdsFit, CsvAndBinnedInputsAgree) {
  TempDir dir("ctds_stage");
  std::vector<DistanceRecord> recs;
  const std::vector<int> counts = {30, 28, 25, 20, 15, 9, 4};
  const BinnedDistances bins = MakeBins(3.0, 11.0, 7);
  for (int j = 0; j < 7; ++j) {
    for (int k = 0; k < counts[j]; ++k) {
      DistanceRecord r;
      r.observation_id = "o";
      r.distance = 0.5 * (bins.edges[j] + bins.edges[j + 1]);
      r.valid_depth_fraction = 1.0;
      recs.push_back(r);
    }
  }
  DistanceRecord outside;
  outside.distance = 15.0;
  outside.valid_depth_fraction = 1.0;
  recs.push_back(outside);
  WriteFileAtomic(dir.str("d.csv"), DistanceRecordsToCsv(recs));
  const DetectionFunctionFit a =
      StageCtdsFit({dir.str("d.csv")}, CtdsConfig{}, dir.str("fit.json"), dir.str("fit.svg"));
  EXPECT_EQ(a.counts, (std::vector<std::size_t>{30, 28, 25, 20, 15, 9, 4}));
  EXPECT_TRUE(fs::exists(dir.path() / "fit.svg"));

  const DetectionFunctionFit b = StageCtdsFit({dir.str("fit.json")}, CtdsConfig{}, "", "");
  EXPECT_EQ(b.model.coefficients, a.model.coefficients);
  EXPECT_EQ(CodeOf([] { StageCtdsFit({}, CtdsConfig{}, "", ""); }), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace stereotrap
