#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace stereotrap {

// Dense single-channel float raster with a per-pixel validity mask. Storage is
// row-major. Invalid pixels keep whatever value was last written; consumers
// must consult the mask.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> valid;

  Raster() = default;
  Raster(int w, int h, float fill = 0.0f, bool fill_valid = true);

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  bool in_bounds(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  float& at(int x, int y) { return values[index(x, y)]; }
  float at(int x, int y) const { return values[index(x, y)]; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  void set_valid(int x, int y, bool v) { valid[index(x, y)] = v ? 1 : 0; }

  std::size_t count_valid() const noexcept;
  bool same_shape(const Raster& other) const noexcept {
    return width == other.width && height == other.height;
  }
};

// Intensities in [0,1].
struct GrayImage : Raster {
  using Raster::Raster;
  GrayImage() = default;
  explicit GrayImage(Raster r) : Raster(std::move(r)) {}
};

// Depth in meters.
struct DepthMap : Raster {
  using Raster::Raster;
  DepthMap() = default;
  explicit DepthMap(Raster r) : Raster(std::move(r)) {}
};

// Disparity in pixels; valid entries lie in [0, max_disparity].
struct DisparityMap : Raster {
  double max_disparity = 0.0;

  DisparityMap() = default;
  DisparityMap(int w, int h, double max_disp)
      : Raster(w, h, 0.0f, false), max_disparity(max_disp) {}
  DisparityMap(Raster r, double max_disp)
      : Raster(std::move(r)), max_disparity(max_disp) {}
};

// Per-pixel displacement (dx, dy) such that prev(x - dx, y - dy) ~ curr(x, y).
// The mask flags confident vectors; low-confidence vectors are stored as zero.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dx;
  std::vector<float> dy;
  std::vector<std::uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h);

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
};

// Bilinear sample at (x, y). Returns false when the sample falls outside the
// raster or any contributing neighbour with non-zero weight is invalid.
bool SampleBilinear(const Raster& r, double x, double y, double* out) noexcept;
bool SampleBilinear(const Raster& r, double x, double y, float* out) noexcept;

}  // namespace stereotrap
