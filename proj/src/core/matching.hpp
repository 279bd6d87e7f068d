#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "core/geometry.hpp"
#include "core/raster.hpp"

namespace stereotrap {

struct MatcherParams {
  int max_disparity = 192;
  int census_window = 5;  // odd, 3..7
  int p1 = 10;
  int p2 = 120;
  double lr_tolerance = 1.0;

  void validate() const;
};

// Matching costs indexed [(y * width + x) * num_disparities + d], computed for
// the left view: cost(x, y, d) compares left(x, y) against right(x - d, y).
struct CostVolume {
  int width = 0;
  int height = 0;
  int num_disparities = 0;
  std::uint16_t out_of_range_cost = 0;
  std::vector<std::uint16_t> costs;
  std::vector<std::uint8_t> valid;  // per pixel; false where the left pixel is masked

  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * num_disparities;
  }
  std::uint16_t at(int x, int y, int d) const noexcept { return costs[offset(x, y) + d]; }
};

// Census transform with the given odd window; bit set where the neighbour is
// darker than the centre. Neighbours outside the image or masked contribute 0.
std::vector<std::uint64_t> CensusTransform(const GrayImage& img, int window);

CostVolume CensusCostVolume(const GrayImage& left, const GrayImage& right, int max_disparity,
                            int census_window = 5);

// Sum of the eight scanline path costs. For a pixel without neighbours every
// path equals the raw cost, so the result is 8 * cost.
CostVolume SgmAggregate(const CostVolume& volume, int p1, int p2);

inline constexpr int kSgmPathCount = 8;

// Winner-take-all with parabolic sub-pixel refinement. Ties resolve to the
// smallest disparity; minima on the range borders stay integer.
DisparityMap ExtractDisparity(const CostVolume& aggregated, Side view = Side::kLeft);

// Sub-pixel offset in [-0.5, 0.5] of the minimum of a parabola through three
// neighbouring costs.
double SubpixelOffset(double c_minus, double c_center, double c_plus) noexcept;

DisparityMap LrConsistency(const DisparityMap& left_disp, const DisparityMap& right_disp,
                           double tol = 1.0);

// census -> SGM -> left/right extraction -> consistency check.
DisparityMap ComputeDisparity(const GrayImage& left, const GrayImage& right,
                              const MatcherParams& params);

}  // namespace stereotrap
