#include "core/quality.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "core/error.hpp"

namespace stereotrap {

TemporalErrorAccumulator::TemporalErrorAccumulator(PixelCountConvention convention)
    : convention_(convention) {}

double TemporalErrorAccumulator::AddFrame(const DisparityMap& disparity, const FlowField* flow) {
  if (frames_ == 0) {
    width_ = disparity.width;
    height_ = disparity.height;
    if (flow != nullptr) {
      throw Error(ErrorCode::kLengthMismatch, "the first frame has no flow to its predecessor");
    }
    prev_ = disparity;
    frames_ = 1;
    return 0.0;
  }
  if (disparity.width != width_ || disparity.height != height_) {
    throw Error(ErrorCode::kDimensionMismatch, "disparity frames differ in size");
  }
  if (flow == nullptr) {
    throw Error(ErrorCode::kLengthMismatch, "temporal error needs one flow per frame pair");
  }
  if (flow->width != width_ || flow->height != height_) {
    throw Error(ErrorCode::kDimensionMismatch, "flow does not match the disparity size");
  }

  // Same lookup as WarpBackward, kept in double precision.
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t i = disparity.index(x, y);
      if (!disparity.valid[i]) continue;
      double warped;
      if (!SampleBilinear(prev_, x - static_cast<double>(flow->dx[i]),
                          y - static_cast<double>(flow->dy[i]), &warped)) {
        continue;
      }
      sum += std::abs(static_cast<double>(disparity.values[i]) - warped);
      ++count;
    }
  }
  counted_total_ += count;
  const std::size_t n_pixels = static_cast<std::size_t>(width_) * height_;
  double err = 0.0;
  if (convention_ == PixelCountConvention::kFullFrame) {
    err = n_pixels > 0 ? sum / static_cast<double>(n_pixels) : 0.0;
    ++frames_counted_;
    frame_sum_ += err;
  } else if (count > 0) {
    err = sum / static_cast<double>(count);
    ++frames_counted_;
    frame_sum_ += err;
  }
  per_frame_.push_back(err);
  prev_ = disparity;
  ++frames_;
  return err;
}

TemporalErrorReport TemporalErrorAccumulator::Report() const {
  if (frames_ < 2) {
    throw Error(ErrorCode::kEmptySequence, "temporal error needs at least two frames");
  }
  TemporalErrorReport report;
  report.n_frames = frames_;
  report.n_pixels = static_cast<std::size_t>(width_) * height_;
  report.per_frame_errors = per_frame_;
  report.e_t = frames_counted_ > 0 ? frame_sum_ / static_cast<double>(frames_counted_) : 0.0;
  const double denom = static_cast<double>(report.n_pixels) * (report.n_frames - 1);
  report.valid_pixel_fraction = denom > 0 ? static_cast<double>(counted_total_) / denom : 0.0;
  return report;
}

TemporalErrorReport TemporalError(const std::vector<DisparityMap>& disparities,
                                  const std::vector<FlowField>& flows,
                                  PixelCountConvention convention) {
  if (disparities.size() < 2) {
    throw Error(ErrorCode::kEmptySequence, "temporal error needs at least two frames");
  }
  if (flows.size() != disparities.size() - 1) {
    throw Error(ErrorCode::kLengthMismatch, "temporal error needs one flow per frame pair");
  }
  TemporalErrorAccumulator acc(convention);
  acc.AddFrame(disparities.front());
  for (std::size_t n = 1; n < disparities.size(); ++n) acc.AddFrame(disparities[n], &flows[n - 1]);
  return acc.Report();
}

std::string TemporalErrorReportToJson(const TemporalErrorReport& report) {
  nlohmann::json j = {{"e_t", report.e_t},
                      {"per_frame_errors", report.per_frame_errors},
                      {"n_frames", report.n_frames},
                      {"n_pixels", report.n_pixels},
                      {"valid_pixel_fraction", report.valid_pixel_fraction}};
  return j.dump(2);
}

TemporalErrorReport TemporalErrorReportFromJson(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TemporalErrorReport r;
    r.e_t = j.at("e_t").get<double>();
    r.per_frame_errors = j.at("per_frame_errors").get<std::vector<double>>();
    r.n_frames = j.at("n_frames").get<std::size_t>();
    r.n_pixels = j.value("n_pixels", std::size_t{0});
    r.valid_pixel_fraction = j.at("valid_pixel_fraction").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("temporal error report: ") + e.what());
  }
}

Histogram ErrorHistogram(const std::vector<double>& values, std::size_t n_bins, double lo,
                         double hi) {
  if (n_bins < 1 || !(lo < hi)) {
    throw Error(ErrorCode::kInvalidArgument, "histogram needs n_bins >= 1 and lo < hi");
  }
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(n_bins, 0);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
      continue;
    }
    if (v > hi) {
      ++h.overflow;
      continue;
    }
    std::size_t idx = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * n_bins));
    // Correct rounding so the edge rule holds exactly against bin_lo/bin_hi.
    if (idx >= n_bins) idx = n_bins - 1;
    while (idx + 1 < n_bins && v >= h.bin_hi(idx)) ++idx;
    while (idx > 0 && v < h.bin_lo(idx)) --idx;
    ++h.counts[idx];
  }
  return h;
}

Histogram ErrorHistogram(const std::vector<TemporalErrorReport>& reports, std::size_t n_bins,
                         double lo, double hi) {
  std::vector<double> values;
  values.reserve(reports.size());
  for (const auto& r : reports) values.push_back(r.e_t);
  return ErrorHistogram(values, n_bins, lo, hi);
}

std::string HistogramToCsv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  char line[128];
  std::snprintf(line, sizeof line, "-inf,%.9g,%zu\n", h.lo, h.underflow);
  out += line;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%zu\n", h.bin_lo(i), h.bin_hi(i), h.counts[i]);
    out += line;
  }
  std::snprintf(line, sizeof line, "%.9g,inf,%zu\n", h.hi, h.overflow);
  out += line;
  return out;
}

}  // namespace stereotrap
