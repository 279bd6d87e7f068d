#include "core/raster.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace stereotrap {

const char* ErrorCodeName(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kOddWidth: return "OddWidth";
    case ErrorCode::kNoValidDepth: return "NoValidDepth";
    case ErrorCode::kEmptyBins: return "EmptyBins";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInvalidWindow: return "InvalidWindow";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kParse: return "Parse";
  }
  return "Unknown";
}

Raster::Raster(int w, int h, float fill, bool fill_valid) : width(w), height(h) {
  if (w < 0 || h < 0) {
    throw Error(ErrorCode::kInvalidArgument, "raster dimensions must be non-negative");
  }
  values.assign(size(), fill);
  valid.assign(size(), fill_valid ? 1 : 0);
}

std::size_t Raster::count_valid() const noexcept {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

FlowField::FlowField(int w, int h) : width(w), height(h) {
  dx.assign(size(), 0.0f);
  dy.assign(size(), 0.0f);
  valid.assign(size(), 1);
}

bool SampleBilinear(const Raster& r, double x, double y, double* out) noexcept {
  if (!(x >= 0.0) || !(y >= 0.0) || x > r.width - 1 || y > r.height - 1) {
    return false;
  }
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double ax = x - x0;
  double ay = y - y0;
  int x1 = std::min(x0 + 1, r.width - 1);
  int y1 = std::min(y0 + 1, r.height - 1);

  const double w00 = (1.0 - ax) * (1.0 - ay);
  const double w10 = ax * (1.0 - ay);
  const double w01 = (1.0 - ax) * ay;
  const double w11 = ax * ay;

  double acc = 0.0;
  const auto take = [&](int px, int py, double w) {
    if (w == 0.0) return true;
    std::size_t i = r.index(px, py);
    if (!r.valid[i]) return false;
    acc += w * r.values[i];
    return true;
  };
  if (!take(x0, y0, w00) || !take(x1, y0, w10) || !take(x0, y1, w01) ||
      !take(x1, y1, w11)) {
    return false;
  }
  *out = acc;
  return true;
}

bool SampleBilinear(const Raster& r, double x, double y, float* out) noexcept {
  double v;
  if (!SampleBilinear(r, x, y, &v)) return false;
  *out = static_cast<float>(v);
  return true;
}

}  // namespace stereotrap
