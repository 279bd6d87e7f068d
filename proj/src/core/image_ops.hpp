#pragma once

#include <span>
#include <vector>

#include "core/raster.hpp"

namespace stereotrap {

// Plain double-precision plane used by the dense kernels.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

Plane ToPlane(const Raster& r, double scale = 1.0);

// Correlates rows (horizontal) or columns (vertical) with a symmetric-indexed
// kernel of odd length, replicating borders.
Plane CorrelateRows(const Plane& in, std::span<const double> kernel);
Plane CorrelateCols(const Plane& in, std::span<const double> kernel);

std::vector<double> GaussianKernel(double sigma, int radius);
Plane GaussianBlur(const Plane& in, double sigma);

// Bilinear sample with coordinates clamped to the plane.
double SampleClamped(const Plane& p, double x, double y) noexcept;

// Bilinear resize with pixel-centre alignment; the caller pre-smooths.
Plane Resize(const Plane& in, int new_width, int new_height);

}  // namespace stereotrap
