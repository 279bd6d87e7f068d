#include "core/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "core/error.hpp"

namespace stereotrap {

SamplePlan FixedRateSample(std::size_t n_frames, double fps, double rate) {
  if (!(fps > 0.0) || !(rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fixed-rate sampling needs fps > 0 and rate > 0");
  }
  SamplePlan plan;
  plan.mode = "fixed";
  const double stride = fps / rate;
  for (std::size_t k = 0;; ++k) {
    const double idx = std::round(static_cast<double>(k) * stride);
    if (idx >= static_cast<double>(n_frames)) break;
    const auto i = static_cast<std::size_t>(idx);
    if (plan.indices.empty() || plan.indices.back() != i) plan.indices.push_back(i);
  }
  return plan;
}

void GmmParams::validate() const {
  if (components < 1 || !(learning_rate >= 0.0 && learning_rate <= 1.0) ||
      !(match_sigmas > 0.0) || !(background_fraction > 0.0 && background_fraction <= 1.0) ||
      !(initial_variance > 0.0) || !(variance_floor > 0.0) ||
      !(initial_weight > 0.0 && initial_weight < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid mixture model parameters");
  }
}

GmmBackgroundModel::GmmBackgroundModel(int width, int height, GmmParams params)
    : width_(width), height_(height), params_(params) {
  params_.validate();
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidArgument, "model dimensions must be non-negative");
  }
  mix_.assign(static_cast<std::size_t>(width) * height * params_.components, Component{});
}

std::vector<std::uint8_t> GmmBackgroundModel::Apply(const GrayImage& frame) {
  return Apply(frame, params_.learning_rate);
}

std::vector<std::uint8_t> GmmBackgroundModel::Apply(const GrayImage& frame, double alpha) {
  if (frame.width != width_ || frame.height != height_) {
    throw Error(ErrorCode::kDimensionMismatch, "frame does not match the background model");
  }
  const int k_count = params_.components;
  const bool first = frames_seen_ == 0;
  const bool learn = alpha > 0.0 || first;
  std::vector<std::uint8_t> mask(frame.size(), 0);
  std::vector<int> order(k_count);

  for (std::size_t p = 0; p < frame.size(); ++p) {
    Component* comp = &mix_[p * k_count];
    const double x = frame.values[p];
    if (first) {
      comp[0] = {1.0, x, params_.initial_variance};
      for (int k = 1; k < k_count; ++k) comp[k] = {};
      continue;
    }

    // Rank by weight / sigma; the leading components up to the background
    // fraction form the background.
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const double fa = comp[a].weight > 0 ? comp[a].weight / std::sqrt(comp[a].variance) : -1.0;
      const double fb = comp[b].weight > 0 ? comp[b].weight / std::sqrt(comp[b].variance) : -1.0;
      return fa > fb;
    });
    int background_count = 0;
    double cumulative = 0.0;
    for (int r = 0; r < k_count; ++r) {
      if (comp[order[r]].weight <= 0) break;
      cumulative += comp[order[r]].weight;
      ++background_count;
      if (cumulative > params_.background_fraction) break;
    }

    int matched_rank = -1;
    for (int r = 0; r < k_count; ++r) {
      const Component& c = comp[order[r]];
      if (c.weight <= 0) break;
      const double dist = std::abs(x - c.mean);
      if (dist <= params_.match_sigmas * std::sqrt(c.variance)) {
        matched_rank = r;
        break;
      }
    }
    mask[p] = (matched_rank < 0 || matched_rank >= background_count) ? 1 : 0;
    if (!learn) continue;

    if (matched_rank >= 0) {
      const int m = order[matched_rank];
      for (int k = 0; k < k_count; ++k) {
        comp[k].weight = (1.0 - alpha) * comp[k].weight + (k == m ? alpha : 0.0);
      }
      Component& c = comp[m];
      const double diff = x - c.mean;
      c.mean += alpha * diff;
      c.variance = std::max(params_.variance_floor,
                            (1.0 - alpha) * c.variance + alpha * diff * diff);
    } else {
      // Replace the least probable component (an unused slot if available).
      const int victim = order[k_count - 1];
      comp[victim] = {params_.initial_weight, x, params_.initial_variance};
    }
    double sum = 0.0;
    for (int k = 0; k < k_count; ++k) sum += comp[k].weight;
    if (sum > 0.0) {
      for (int k = 0; k < k_count; ++k) comp[k].weight /= sum;
    }
  }
  ++frames_seen_;
  return mask;
}

std::vector<GmmBackgroundModel::Component> GmmBackgroundModel::PixelComponents(int x,
                                                                                 int y) const {
  const std::size_t p = static_cast<std::size_t>(y) * width_ + x;
  return {mix_.begin() + p * params_.components, mix_.begin() + (p + 1) * params_.components};
}

double GmmBackgroundModel::WeightSum(int x, int y) const {
  double sum = 0.0;
  for (const auto& c : PixelComponents(x, y)) sum += c.weight;
  return sum;
}

double ForegroundRatio(const std::vector<std::uint8_t>& mask) {
  if (mask.empty()) return 0.0;
  const auto fg = std::count(mask.begin(), mask.end(), std::uint8_t{1});
  return static_cast<double>(fg) / static_cast<double>(mask.size());
}

std::vector<std::size_t> AccumulateRatios(const std::vector<double>& ratios, double threshold,
                                          std::size_t burn_in) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "accumulation threshold must be positive");
  }
  // Sums such as 0.01 + 0.09 land a few ulps below 0.1.
  const double reach = threshold * (1.0 - 1e-12);
  std::vector<std::size_t> emitted;
  double acc = 0.0;
  for (std::size_t n = burn_in; n < ratios.size(); ++n) {
    acc += ratios[n];
    if (acc >= reach) {
      emitted.push_back(n);
      acc = 0.0;
    }
  }
  return emitted;
}

SamplePlan AdaptiveSample(const std::vector<GrayImage>& frames, double threshold,
                          const GmmParams& params, std::size_t burn_in) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "accumulation threshold must be positive");
  }
  SamplePlan plan;
  plan.mode = "adaptive";
  plan.threshold = threshold;
  if (frames.empty()) return plan;
  GmmBackgroundModel model(frames.front().width, frames.front().height, params);
  for (const auto& f : frames) plan.ratios.push_back(ForegroundRatio(model.Apply(f)));
  plan.indices = AccumulateRatios(plan.ratios, threshold, burn_in);
  return plan;
}

std::string SamplePlanToJson(const SamplePlan& plan) {
  nlohmann::json j = {{"video_id", plan.video_id},
                      {"mode", plan.mode},
                      {"threshold", plan.threshold},
                      {"indices", plan.indices},
                      {"ratios", plan.ratios}};
  return j.dump(2);
}

SamplePlan SamplePlanFromJson(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SamplePlan plan;
    plan.video_id = j.value("video_id", std::string{});
    plan.mode = j.value("mode", std::string{"fixed"});
    plan.threshold = j.value("threshold", 0.0);
    plan.indices = j.at("indices").get<std::vector<std::size_t>>();
    plan.ratios = j.value("ratios", std::vector<double>{});
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("sample plan: ") + e.what());
  }
}

}  // namespace stereotrap
