#pragma once

#include "core/raster.hpp"

namespace stereotrap {

// Dense polynomial-expansion optical flow (Farneback). Defaults: 3 pyramid
// levels at scale 0.5, expansion neighbourhood radius 5 with sigma 1.1,
// 3 iterations per level, 15 px Gaussian averaging window.
struct FlowParams {
  int levels = 3;
  double pyr_scale = 0.5;
  int poly_n = 5;
  double poly_sigma = 1.1;
  int iterations = 3;
  int window = 15;
  // Vectors whose local structure tensor has a smallest eigenvalue below this
  // (intensity scale 0..255) are zeroed and flagged invalid.
  double min_eigenvalue = 1e-2;

  void validate() const;
};

// Flow such that prev(x - dx, y - dy) ~ curr(x, y). Textureless regions yield
// zero vectors marked invalid.
FlowField EstimateFlow(const GrayImage& curr, const GrayImage& prev,
                       const FlowParams& params = {});

// out(x, y) = in(x - dx, y - dy) with bilinear interpolation. Samples that fall
// outside the raster or touch invalid source pixels are invalid. The flow
// mask is a confidence flag and does not gate the lookup.
Raster WarpBackward(const Raster& in, const FlowField& flow);

}  // namespace stereotrap
