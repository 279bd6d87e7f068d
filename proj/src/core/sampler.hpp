#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "core/raster.hpp"

namespace stereotrap {

struct SamplePlan {
  std::string video_id;
  std::string mode;  // "fixed" or "adaptive"
  double threshold = 0.0;
  std::vector<std::size_t> indices;  // strictly increasing
  std::vector<double> ratios;        // per-frame foreground ratio (adaptive only)
};

// Frames round(k * fps / rate) for k = 0, 1, ... below n_frames.
SamplePlan FixedRateSample(std::size_t n_frames, double fps, double rate);

struct GmmParams {
  int components = 4;
  double learning_rate = 0.01;
  double match_sigmas = 2.5;
  double background_fraction = 0.8;
  double initial_variance = 0.01;  // intensity units squared
  double variance_floor = 1e-4;
  double initial_weight = 0.05;

  void validate() const;
};

// Per-pixel Stauffer-Grimson mixture of Gaussians over grayscale intensities.
class GmmBackgroundModel {
 public:
  GmmBackgroundModel(int width, int height, GmmParams params = {});

  // Classifies the frame and updates the mixture with the configured learning
  // rate. Returns the foreground mask (1 = foreground).
  std::vector<std::uint8_t> Apply(const GrayImage& frame);
  // Same, with an explicit learning rate; 0 classifies without modifying the
  // model.
  std::vector<std::uint8_t> Apply(const GrayImage& frame, double learning_rate);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const GmmParams& params() const noexcept { return params_; }
  std::size_t frames_seen() const noexcept { return frames_seen_; }

  struct Component {
    double weight = 0.0;
    double mean = 0.0;
    double variance = 0.0;
  };
  // Components of one pixel (inactive ones carry zero weight).
  std::vector<Component> PixelComponents(int x, int y) const;
  double WeightSum(int x, int y) const;

 private:
  int width_;
  int height_;
  GmmParams params_;
  std::size_t frames_seen_ = 0;
  std::vector<Component> mix_;  // components per pixel, contiguous
};

double ForegroundRatio(const std::vector<std::uint8_t>& mask);

inline constexpr std::size_t kDefaultBurnInFrames = 30;

// Accumulates per-frame ratios; emits frame n once the running sum reaches the
// threshold and resets the sum to zero. Frames before burn_in are never
// emitted and do not accumulate.
std::vector<std::size_t> AccumulateRatios(const std::vector<double>& ratios, double threshold,
                                          std::size_t burn_in = kDefaultBurnInFrames);

// Runs the mixture model over the frames and accumulates foreground ratios.
SamplePlan AdaptiveSample(const std::vector<GrayImage>& frames, double threshold = 0.10,
                          const GmmParams& params = {},
                          std::size_t burn_in = kDefaultBurnInFrames);

std::string SamplePlanToJson(const SamplePlan& plan);
SamplePlan SamplePlanFromJson(const std::string& text);

}  // namespace stereotrap
