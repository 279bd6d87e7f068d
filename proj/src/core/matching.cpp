#include "core/matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "core/error.hpp"

namespace stereotrap {

void MatcherParams::validate() const {
  if (max_disparity < 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_disparity must be >= 0");
  }
  if (census_window < 3 || census_window > 7 || census_window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "census window must be odd and in [3, 7]");
  }
  if (!(p1 > 0) || p2 < p1 || p2 > 4000) {
    throw Error(ErrorCode::kInvalidArgument, "SGM penalties need 0 < p1 <= p2 <= 4000");
  }
  if (!(lr_tolerance >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lr tolerance must be non-negative");
  }
}

std::vector<std::uint64_t> CensusTransform(const GrayImage& img, int window) {
  const int r = window / 2;
  std::vector<std::uint64_t> out(img.size(), 0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t ci = img.index(x, y);
      if (!img.valid[ci]) continue;
      const float center = img.values[ci];
      std::uint64_t bits = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          bits <<= 1;
          const int nx = x + dx;
          const int ny = y + dy;
          if (!img.in_bounds(nx, ny)) continue;
          const std::size_t ni = img.index(nx, ny);
          if (img.valid[ni] && img.values[ni] < center) bits |= 1;
        }
      }
      out[ci] = bits;
    }
  }
  return out;
}

CostVolume CensusCostVolume(const GrayImage& left, const GrayImage& right, int max_disparity,
                            int census_window) {
  if (!left.same_shape(right)) {
    throw Error(ErrorCode::kDimensionMismatch, "census: left and right differ in size");
  }
  if (max_disparity < 0) {
    throw Error(ErrorCode::kInvalidArgument, "census: max_disparity must be >= 0");
  }
  const auto census_left = CensusTransform(left, census_window);
  const auto census_right = CensusTransform(right, census_window);
  const int bits = census_window * census_window - 1;

  CostVolume vol;
  vol.width = left.width;
  vol.height = left.height;
  vol.num_disparities = max_disparity + 1;
  vol.out_of_range_cost = static_cast<std::uint16_t>(2 * bits);
  vol.costs.assign(left.size() * vol.num_disparities, vol.out_of_range_cost);
  vol.valid.assign(left.size(), 0);

  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      const std::size_t li = left.index(x, y);
      if (!left.valid[li]) continue;
      vol.valid[li] = 1;
      std::uint16_t* costs = &vol.costs[vol.offset(x, y)];
      const int d_end = std::min(max_disparity, x);
      for (int d = 0; d <= d_end; ++d) {
        const std::size_t ri = right.index(x - d, y);
        if (!right.valid[ri]) continue;
        costs[d] = static_cast<std::uint16_t>(std::popcount(census_left[li] ^ census_right[ri]));
      }
    }
  }
  return vol;
}

namespace {

// One scanline step of the SGM recurrence; prev == nullptr starts a path.
inline void PathStep(const std::uint16_t* cost, const std::uint16_t* prev, std::uint16_t prev_min,
                     int nd, int p1, int p2, std::uint16_t* out, std::uint16_t* out_min) {
  std::uint16_t best = std::numeric_limits<std::uint16_t>::max();
  if (prev == nullptr) {
    for (int d = 0; d < nd; ++d) {
      out[d] = cost[d];
      best = std::min(best, out[d]);
    }
  } else {
    const int jump = prev_min + p2;
    for (int d = 0; d < nd; ++d) {
      int m = std::min<int>(prev[d], jump);
      if (d > 0) m = std::min(m, prev[d - 1] + p1);
      if (d + 1 < nd) m = std::min(m, prev[d + 1] + p1);
      out[d] = static_cast<std::uint16_t>(cost[d] + m - prev_min);
      best = std::min(best, out[d]);
    }
  }
  *out_min = best;
}

// Aggregates the four directions whose predecessors lie in the previous row
// or the previous pixel of the same row. The forward pass runs top-left to
// bottom-right, the backward pass mirrors it.
void AggregatePass(const CostVolume& vol, int p1, int p2, bool forward,
                   std::vector<std::uint32_t>& sum) {
  const int w = vol.width;
  const int h = vol.height;
  const int nd = vol.num_disparities;
  const int step = forward ? 1 : -1;
  // Directions: 0 = along the row, 1 = diagonal from the column behind,
  // 2 = vertical, 3 = diagonal from the column ahead.
  const int dir_dx[4] = {-step, -step, 0, step};
  const std::size_t row_len = static_cast<std::size_t>(w) * nd;
  std::vector<std::uint16_t> prev_row(4 * row_len), cur_row(4 * row_len);
  std::vector<std::uint16_t> prev_min(4 * static_cast<std::size_t>(w)),
      cur_min(4 * static_cast<std::size_t>(w));

  for (int yi = 0; yi < h; ++yi) {
    const int y = forward ? yi : h - 1 - yi;
    for (int xi = 0; xi < w; ++xi) {
      const int x = forward ? xi : w - 1 - xi;
      const std::uint16_t* cost = &vol.costs[vol.offset(x, y)];
      for (int dir = 0; dir < 4; ++dir) {
        const int px = x + dir_dx[dir];
        const std::uint16_t* prev = nullptr;
        std::uint16_t pmin = 0;
        if (px >= 0 && px < w) {
          if (dir == 0) {
            prev = &cur_row[dir * row_len + static_cast<std::size_t>(px) * nd];
            pmin = cur_min[dir * w + px];
          } else if (yi > 0) {
            prev = &prev_row[dir * row_len + static_cast<std::size_t>(px) * nd];
            pmin = prev_min[dir * w + px];
          }
        }
        std::uint16_t* out = &cur_row[dir * row_len + static_cast<std::size_t>(x) * nd];
        PathStep(cost, prev, pmin, nd, p1, p2, out, &cur_min[dir * w + x]);
        std::uint32_t* s = &sum[vol.offset(x, y)];
        for (int d = 0; d < nd; ++d) s[d] += out[d];
      }
    }
    std::swap(prev_row, cur_row);
    std::swap(prev_min, cur_min);
  }
}

}  // namespace

CostVolume SgmAggregate(const CostVolume& volume, int p1, int p2) {
  if (!(p1 > 0) || p2 < p1) {
    throw Error(ErrorCode::kInvalidArgument, "SGM penalties need p2 >= p1 > 0");
  }
  std::vector<std::uint32_t> sum(volume.costs.size(), 0);
  if (!sum.empty()) {
    AggregatePass(volume, p1, p2, true, sum);
    AggregatePass(volume, p1, p2, false, sum);
  }
  CostVolume out;
  out.width = volume.width;
  out.height = volume.height;
  out.num_disparities = volume.num_disparities;
  out.out_of_range_cost = static_cast<std::uint16_t>(
      std::min<std::uint32_t>(65535u, kSgmPathCount * static_cast<std::uint32_t>(volume.out_of_range_cost)));
  out.valid = volume.valid;
  out.costs.resize(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    out.costs[i] = static_cast<std::uint16_t>(std::min<std::uint32_t>(sum[i], 65535u));
  }
  return out;
}

double SubpixelOffset(double c_minus, double c_center, double c_plus) noexcept {
  const double denom = c_minus - 2.0 * c_center + c_plus;
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(0.5 * (c_minus - c_plus) / denom, -0.5, 0.5);
}

DisparityMap ExtractDisparity(const CostVolume& vol, Side view) {
  const int nd = vol.num_disparities;
  DisparityMap out(vol.width, vol.height, std::max(0, nd - 1));
  for (int y = 0; y < vol.height; ++y) {
    for (int x = 0; x < vol.width; ++x) {
      // For the right view, candidate d at column x lives at left column x + d.
      auto cost_at = [&](int d) -> int {
        if (view == Side::kLeft) return vol.at(x, y, d);
        const int lx = x + d;
        if (lx >= vol.width || !vol.valid[static_cast<std::size_t>(y) * vol.width + lx]) return -1;
        return vol.at(lx, y, d);
      };
      if (view == Side::kLeft && !vol.valid[static_cast<std::size_t>(y) * vol.width + x]) continue;
      int best_d = -1;
      int best_c = 0;
      for (int d = 0; d < nd; ++d) {
        const int c = cost_at(d);
        if (c < 0) continue;
        if (best_d < 0 || c < best_c) {
          best_c = c;
          best_d = d;
        }
      }
      if (best_d < 0) continue;
      // Left view: the match must land inside the right image.
      if (view == Side::kLeft && x - best_d < 0) continue;
      double disp = best_d;
      if (best_d > 0 && best_d < nd - 1) {
        const int cm = cost_at(best_d - 1);
        const int cp = cost_at(best_d + 1);
        if (cm >= 0 && cp >= 0) disp += SubpixelOffset(cm, best_c, cp);
      }
      const std::size_t i = out.index(x, y);
      out.values[i] = static_cast<float>(disp);
      out.valid[i] = 1;
    }
  }
  return out;
}

DisparityMap LrConsistency(const DisparityMap& left_disp, const DisparityMap& right_disp,
                           double tol) {
  if (!left_disp.same_shape(right_disp)) {
    throw Error(ErrorCode::kDimensionMismatch, "lr check: maps differ in size");
  }
  DisparityMap out = left_disp;
  if (std::isinf(tol) && tol > 0) return out;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const std::size_t i = out.index(x, y);
      if (!out.valid[i]) continue;
      const double dl = left_disp.values[i];
      const long xr = std::lround(x - dl);
      bool keep = false;
      if (xr >= 0 && xr < out.width) {
        const std::size_t ri = right_disp.index(static_cast<int>(xr), y);
        keep = right_disp.valid[ri] && std::abs(dl - right_disp.values[ri]) <= tol;
      }
      out.valid[i] = keep ? 1 : 0;
    }
  }
  return out;
}

DisparityMap ComputeDisparity(const GrayImage& left, const GrayImage& right,
                              const MatcherParams& params) {
  params.validate();
  const CostVolume raw = CensusCostVolume(left, right, params.max_disparity, params.census_window);
  const CostVolume agg = SgmAggregate(raw, params.p1, params.p2);
  const DisparityMap dl = ExtractDisparity(agg, Side::kLeft);
  const DisparityMap dr = ExtractDisparity(agg, Side::kRight);
  return LrConsistency(dl, dr, params.lr_tolerance);
}

}  // namespace stereotrap
