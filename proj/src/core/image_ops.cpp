#include "core/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace stereotrap {

Plane ToPlane(const Raster& r, double scale) {
  Plane p(r.width, r.height);
  for (std::size_t i = 0; i < r.size(); ++i) p.data[i] = scale * r.values[i];
  return p;
}

Plane CorrelateRows(const Plane& in, std::span<const double> kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int sx = std::clamp(x + k, 0, in.width - 1);
        acc += kernel[k + radius] * in(sx, y);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

Plane CorrelateCols(const Plane& in, std::span<const double> kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  Plane out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int k = -radius; k <= radius; ++k) {
      const int sy = std::clamp(y + k, 0, in.height - 1);
      const double w = kernel[k + radius];
      const double* src = &in.data[static_cast<std::size_t>(sy) * in.width];
      double* dst = &out.data[static_cast<std::size_t>(y) * in.width];
      for (int x = 0; x < in.width; ++x) dst[x] += w * src[x];
    }
  }
  return out;
}

std::vector<double> GaussianKernel(double sigma, int radius) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Plane GaussianBlur(const Plane& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto k = GaussianKernel(sigma, radius);
  return CorrelateCols(CorrelateRows(in, k), k);
}

double SampleClamped(const Plane& p, double x, double y) noexcept {
  x = std::clamp(x, 0.0, static_cast<double>(p.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(p.height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, p.width - 1);
  const int y1 = std::min(y0 + 1, p.height - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  return (1 - ay) * ((1 - ax) * p(x0, y0) + ax * p(x1, y0)) +
         ay * ((1 - ax) * p(x0, y1) + ax * p(x1, y1));
}

Plane Resize(const Plane& in, int new_width, int new_height) {
  Plane out(new_width, new_height);
  const double sx = static_cast<double>(in.width) / new_width;
  const double sy = static_cast<double>(in.height) / new_height;
  for (int y = 0; y < new_height; ++y) {
    for (int x = 0; x < new_width; ++x) {
      out(x, y) = SampleClamped(in, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    }
  }
  return out;
}

}  // namespace stereotrap
