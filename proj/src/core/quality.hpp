#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "core/raster.hpp"

namespace stereotrap {

// How the per-frame pixel count is chosen.
enum class PixelCountConvention {
  kValidOnly,  // mean over pixels valid in both D(n) and the warped D(n-1)
  kFullFrame,  // divide by width * height as in the original metric definition
};

struct TemporalErrorReport {
  double e_t = 0.0;
  std::vector<double> per_frame_errors;  // length n_frames - 1
  std::size_t n_frames = 0;
  std::size_t n_pixels = 0;  // pixels per frame
  double valid_pixel_fraction = 0.0;
};

// Mean temporal disparity error:
//   E_t = 1/(N_T - 1) * sum_n [ 1/N_P(n) * sum_xy |D(x,y,n) - D(x - m_x, y - m_y, n - 1)| ]
// where flows[n - 1] is the flow from frame n to frame n - 1. With the
// valid-only convention N_P(n) is the number of counted pixels of frame n, and
// frames without any counted pixel are excluded from the mean (their entry in
// per_frame_errors is 0).
TemporalErrorReport TemporalError(const std::vector<DisparityMap>& disparities,
                                  const std::vector<FlowField>& flows,
                                  PixelCountConvention convention = PixelCountConvention::kValidOnly);

// Streaming form of TemporalError that keeps only the previous disparity.
class TemporalErrorAccumulator {
 public:
  explicit TemporalErrorAccumulator(
      PixelCountConvention convention = PixelCountConvention::kValidOnly);

  // `flow` maps this frame to the previous one and must be null for the first
  // frame. Returns the frame error (0 for the first frame).
  double AddFrame(const DisparityMap& disparity, const FlowField* flow = nullptr);
  std::size_t frames() const noexcept { return frames_; }
  TemporalErrorReport Report() const;

 private:
  PixelCountConvention convention_;
  int width_ = 0;
  int height_ = 0;
  std::size_t frames_ = 0;
  std::size_t counted_total_ = 0;
  std::size_t frames_counted_ = 0;
  double frame_sum_ = 0.0;
  std::vector<double> per_frame_;
  DisparityMap prev_;
};

std::string TemporalErrorReportToJson(const TemporalErrorReport& report);
TemporalErrorReport TemporalErrorReportFromJson(const std::string& text);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  double bin_lo(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / counts.size(); }
  double bin_hi(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i + 1) / counts.size(); }
};

// Values on an inner edge go to the upper bin; hi itself closes the last bin.
Histogram ErrorHistogram(const std::vector<double>& values, std::size_t n_bins, double lo, double hi);
Histogram ErrorHistogram(const std::vector<TemporalErrorReport>& reports, std::size_t n_bins,
                         double lo, double hi);

// CSV with header bin_lo,bin_hi,count; underflow/overflow rows use -inf/inf bounds.
std::string HistogramToCsv(const Histogram& h);

}  // namespace stereotrap
