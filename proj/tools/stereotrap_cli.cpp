#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "stereotrap.h"

namespace {

struct Override {
  std::string key;
  std::string value;
};

// Pulls "--section.field value" and "--section.field=value" out of argv so
// CLI11 only sees the fixed options.
std::vector<Override> ExtractOverrides(std::vector<std::string>& args) {
  std::vector<Override> out;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    const std::size_t eq = a.find('=');
    const std::string name = a.substr(0, eq);
    if (a.rfind("--", 0) != 0 || name.find('.') == std::string::npos) {
      rest.push_back(a);
      continue;
    }
    if (eq != std::string::npos) {
      out.push_back({name.substr(2), a.substr(eq + 1)});
    } else if (i + 1 < args.size()) {
      out.push_back({name.substr(2), args[++i]});
    } else {
      throw CLI::ValidationError(name, "missing value");
    }
  }
  args = std::move(rest);
  return out;
}

class Config {
 public:
  ~Config() { st_config_destroy(cfg_); }
  st_config* get() const { return cfg_; }

  bool Build(const std::string& path, const std::vector<Override>& overrides) {
    const st_status s = path.empty() ? st_config_create(&cfg_) : st_config_load(path.c_str(), &cfg_);
    if (s != ST_OK) return Report(s, "loading configuration");
    for (const auto& o : overrides) {
      if (const st_status e = st_config_set(cfg_, o.key.c_str(), o.value.c_str()); e != ST_OK) {
        return Report(e, "--" + o.key);
      }
    }
    return true;
  }

  static bool Report(st_status s, const std::string& what) {
    std::fprintf(stderr, "stereotrap: %s failed: %s (%s)\n", what.c_str(), st_last_error_message(),
                 st_status_string(s));
    return false;
  }

 private:
  st_config* cfg_ = nullptr;
};

std::vector<const char*> CStrings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* OrNull(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int Check(st_status s, const char* what) { return s == ST_OK ? 0 : (Config::Report(s, what), 2); }

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<Override> overrides;
  try {
    overrides = ExtractOverrides(args);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "stereotrap: %s\n", e.what());
    return 2;
  }

  CLI::App app{"Stereo camera-trap distance sampling toolkit", "stereotrap"};
  app.fallthrough();
  app.require_subcommand(1);
  app.footer(
      "Any configuration field can be overridden with --section.field VALUE,\n"
      "e.g. --matcher.max-disparity 64 --ctds.window 3:11 --sampler.mode adaptive");
  std::string config_path, output, calibration;
  int workers = 0;
  bool quiet = false;
  bool verbose = false;
  app.add_option("--config", config_path, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--workers", workers, "Observations processed in parallel")->check(CLI::PositiveNumber);
  app.add_option("--output", output, "Output directory");
  app.add_option("--calibration", calibration, "Stereo calibration (JSON)");
  app.add_flag("-q,--quiet", quiet, "Only print errors");
  app.add_flag("-v,--verbose", verbose, "Print debug messages");

  std::string a, b, c, d, e;
  std::vector<std::string> list1, list2;
  bool append = false;

  auto* split = app.add_subcommand("split", "Split a side-by-side frame into left and right halves");
  split->add_option("frame", a, "Side-by-side frame")->required()->check(CLI::ExistingFile);
  split->add_option("--left", b, "Left output (.pfm, .png or .pgm)")->required();
  split->add_option("--right", c, "Right output")->required();

  auto* rectify = app.add_subcommand("rectify", "Rectify a stereo pair");
  rectify->add_option("--left-in", a, "Left image")->required()->check(CLI::ExistingFile);
  rectify->add_option("--right-in", b, "Right image")->required()->check(CLI::ExistingFile);
  rectify->add_option("--left-out", c, "Rectified left output")->required();
  rectify->add_option("--right-out", d, "Rectified right output")->required();

  auto* match = app.add_subcommand("match", "Census/SGM disparity of a rectified pair");
  match->add_option("--left", a, "Rectified left")->required()->check(CLI::ExistingFile);
  match->add_option("--right", b, "Rectified right")->required()->check(CLI::ExistingFile);
  match->add_option("--out", c, "Disparity output (.pfm)")->required();
  match->add_option("--png", d, "Optional 16-bit PNG, disparity x 256");

  auto* depth = app.add_subcommand("depth", "Convert disparity to metric depth");
  depth->add_option("--disparity", a, "Disparity (.pfm)")->required()->check(CLI::ExistingFile);
  depth->add_option("--out", b, "Depth output (.pfm)")->required();

  auto* flow = app.add_subcommand("flow", "Dense optical flow between two frames");
  flow->add_option("--prev", a, "Previous frame")->required()->check(CLI::ExistingFile);
  flow->add_option("--curr", b, "Current frame")->required()->check(CLI::ExistingFile);
  flow->add_option("--out", c, "Flow output (.pfm, 3 channels)")->required();

  auto* quality = app.add_subcommand("quality", "Temporal disparity error E_t");
  quality->add_option("--disparity", list1, "Disparity maps in frame order")->required()->expected(2, -1);
  quality->add_option("--flow", list2, "Flows, one per consecutive pair")->required()->expected(1, -1);
  quality->add_option("--out", a, "Report output (.json)");

  auto* sample = app.add_subcommand("sample", "Frame sampling plan");
  sample->add_option("frames", list1, "Frames in order")->required();
  sample->add_option("--video-id", a, "Video identifier");
  sample->add_option("--out", b, "Plan output (.json)");

  auto* distances = app.add_subcommand("distances", "Animal distances from detections and depth");
  distances->add_option("--detections", a, "Detections JSON")->required()->check(CLI::ExistingFile);
  distances->add_option("--depth-dir", b, "Directory with depth_NNNNNN.pfm")->required()->check(CLI::ExistingDirectory);
  distances->add_option("--plan", c, "Sample plan restricting the frames")->check(CLI::ExistingFile);
  distances->add_option("--observation-id", d, "Observation id (default: video_id)");
  distances->add_option("--out", e, "Distance CSV")->required();
  distances->add_flag("--append", append, "Append to an existing CSV");

  auto* ctds = app.add_subcommand("ctds-fit", "Fit the detection function");
  ctds->add_option("inputs", list1, "Distance CSVs or one binned JSON")->required()->check(CLI::ExistingFile);
  ctds->add_option("--out", a, "Fit output (.json)")->required();
  ctds->add_option("--svg", b, "Detection probability plot (.svg)");

  auto* report = app.add_subcommand("report", "Histogram of per-observation temporal errors");
  report->add_option("reports", list1, "E_t report files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", a, "Histogram CSV")->required();

  auto* run = app.add_subcommand("run", "Full pipeline over an observation store");
  run->add_option("store", a, "Observation store directory")->required()->check(CLI::ExistingDirectory);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  st_set_log_level(quiet ? ST_LOG_ERROR : verbose ? ST_LOG_DEBUG : ST_LOG_INFO);
  if (!calibration.empty()) overrides.insert(overrides.begin(), {"calibration", calibration});
  if (!output.empty()) overrides.insert(overrides.begin(), {"output", output});
  if (workers > 0) overrides.insert(overrides.begin(), {"workers", std::to_string(workers)});
  Config cfg;
  if (!cfg.Build(config_path, overrides)) return 2;
  st_config* cf = cfg.get();

  if (split->parsed()) return Check(st_stage_split(a.c_str(), b.c_str(), c.c_str()), "split");
  if (rectify->parsed()) {
    return Check(st_stage_rectify(cf, a.c_str(), b.c_str(), c.c_str(), d.c_str()), "rectify");
  }
  if (match->parsed()) return Check(st_stage_match(cf, a.c_str(), b.c_str(), c.c_str(), OrNull(d)), "match");
  if (depth->parsed()) return Check(st_stage_depth(cf, a.c_str(), b.c_str()), "depth");
  if (flow->parsed()) return Check(st_stage_flow(cf, a.c_str(), b.c_str(), c.c_str()), "flow");
  if (quality->parsed()) {
    const auto ds = CStrings(list1);
    const auto fs = CStrings(list2);
    double e_t = 0.0;
    const int rc = Check(st_stage_quality(cf, ds.data(), ds.size(), fs.data(), fs.size(), OrNull(a), &e_t),
                         "quality");
    if (rc == 0) std::printf("E_t = %.6f\n", e_t);
    return rc;
  }
  if (sample->parsed()) {
    const auto fs = CStrings(list1);
    std::size_t n = 0;
    const int rc = Check(st_stage_sample(cf, fs.data(), fs.size(), a.c_str(), OrNull(b), &n), "sample");
    if (rc == 0) std::printf("%zu frames sampled\n", n);
    return rc;
  }
  if (distances->parsed()) {
    std::size_t n = 0;
    const int rc = Check(st_stage_distances(cf, a.c_str(), b.c_str(), OrNull(c), OrNull(d), e.c_str(),
                                            append ? 1 : 0, &n),
                         "distances");
    if (rc == 0) std::printf("%zu distance records\n", n);
    return rc;
  }
  if (ctds->parsed()) {
    const auto in = CStrings(list1);
    return Check(st_stage_ctds_fit(cf, in.data(), in.size(), a.c_str(), OrNull(b)), "ctds-fit");
  }
  if (report->parsed()) {
    const auto in = CStrings(list1);
    return Check(st_stage_report(cf, in.data(), in.size(), a.c_str()), "report");
  }
  if (run->parsed()) {
    st_run_summary summary{};
    if (const int rc = Check(st_pipeline_run(cf, a.c_str(), &summary), "run"); rc != 0) return rc;
    std::printf("%zu observations, %zu succeeded, %zu failed, %zu distances%s\n", summary.observations,
                summary.succeeded, summary.failed, summary.distances,
                summary.fitted ? ", detection function fitted" : "");
    return summary.exit_code;
  }
  return 0;
}
