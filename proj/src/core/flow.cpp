#include "core/flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

#include "core/error.hpp"
#include "core/image_ops.hpp"

namespace stereotrap {
namespace {

// Quadratic model f(p) = p'Ap + b'p + c per pixel, stored as
// (b_x, b_y, a_xx, a_yy, a_xy) with A = [[a_xx, a_xy/2], [a_xy/2, a_yy]].
struct Expansion {
  int width = 0;
  int height = 0;
  std::array<Plane, 5> coeff;
};

Expansion PolyExpand(const Plane& img, int n, double sigma) {
  std::vector<double> g(2 * n + 1), xg(2 * n + 1), xxg(2 * n + 1);
  for (int t = -n; t <= n; ++t) {
    const double w = std::exp(-0.5 * t * t / (sigma * sigma));
    g[t + n] = w;
    xg[t + n] = t * w;
    xxg[t + n] = t * t * w;
  }
  // Weighted least squares over the basis {1, x, y, x^2, y^2, xy}. The normal
  // matrix is identical for every pixel, so only the moments vary.
  Eigen::Matrix<double, 6, 6> gram = Eigen::Matrix<double, 6, 6>::Zero();
  for (int dy = -n; dy <= n; ++dy) {
    for (int dx = -n; dx <= n; ++dx) {
      const double w = g[dx + n] * g[dy + n];
      Eigen::Matrix<double, 6, 1> basis;
      basis << 1.0, dx, dy, dx * dx, dy * dy, dx * dy;
      gram += w * basis * basis.transpose();
    }
  }
  const Eigen::Matrix<double, 6, 6> inv = gram.inverse();

  const Plane h0 = CorrelateRows(img, g);
  const Plane h1 = CorrelateRows(img, xg);
  const Plane h2 = CorrelateRows(img, xxg);
  const std::array<Plane, 6> moments = {CorrelateCols(h0, g),  CorrelateCols(h1, g),
                                        CorrelateCols(h0, xg), CorrelateCols(h2, g),
                                        CorrelateCols(h0, xxg), CorrelateCols(h1, xg)};
  Expansion e;
  e.width = img.width;
  e.height = img.height;
  for (auto& c : e.coeff) c = Plane(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    Eigen::Matrix<double, 6, 1> m;
    for (int k = 0; k < 6; ++k) m(k) = moments[k].data[i];
    const Eigen::Matrix<double, 6, 1> c = inv * m;
    e.coeff[0].data[i] = c(1);
    e.coeff[1].data[i] = c(2);
    e.coeff[2].data[i] = c(3);
    e.coeff[3].data[i] = c(4);
    e.coeff[4].data[i] = c(5);
  }
  return e;
}

struct Displacement {
  Plane ux, uy;
  Plane min_eig;
};

// One refinement step: given the current estimate u (I1(x) ~ I2(x + u)),
// builds the per-pixel normal equations, averages them over the window and
// solves for the new displacement.
void RefineOnce(const Expansion& e1, const Expansion& e2, int window, Displacement& d) {
  const int w = e1.width;
  const int h = e1.height;
  std::array<Plane, 5> terms;  // G11, G12, G22, h1, h2
  for (auto& t : terms) t = Plane(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ux = d.ux(x, y);
      const double uy = d.uy(x, y);
      const double sx = x + ux;
      const double sy = y + uy;
      if (sx < 0.0 || sy < 0.0 || sx > w - 1 || sy > h - 1) continue;
      std::array<double, 5> c2;
      for (int k = 0; k < 5; ++k) c2[k] = SampleClamped(e2.coeff[k], sx, sy);
      const double a11 = 0.5 * (e1.coeff[2](x, y) + c2[2]);
      const double a22 = 0.5 * (e1.coeff[3](x, y) + c2[3]);
      const double a12 = 0.25 * (e1.coeff[4](x, y) + c2[4]);
      const double b1 = -0.5 * (c2[0] - e1.coeff[0](x, y)) + a11 * ux + a12 * uy;
      const double b2 = -0.5 * (c2[1] - e1.coeff[1](x, y)) + a12 * ux + a22 * uy;
      terms[0](x, y) = a11 * a11 + a12 * a12;
      terms[1](x, y) = a11 * a12 + a12 * a22;
      terms[2](x, y) = a12 * a12 + a22 * a22;
      terms[3](x, y) = a11 * b1 + a12 * b2;
      terms[4](x, y) = a12 * b1 + a22 * b2;
    }
  }
  const int radius = window / 2;
  const auto k = GaussianKernel(0.3 * (radius - 1) + 0.8, radius);
  for (auto& t : terms) t = CorrelateCols(CorrelateRows(t, k), k);

  for (std::size_t i = 0; i < d.ux.data.size(); ++i) {
    const double g11 = terms[0].data[i];
    const double g12 = terms[1].data[i];
    const double g22 = terms[2].data[i];
    const double det = g11 * g22 - g12 * g12;
    const double inv_det = 1.0 / (det + 1e-3);
    d.ux.data[i] = (g22 * terms[3].data[i] - g12 * terms[4].data[i]) * inv_det;
    d.uy.data[i] = (g11 * terms[4].data[i] - g12 * terms[3].data[i]) * inv_det;
    const double tr = 0.5 * (g11 + g22);
    d.min_eig.data[i] = tr - std::sqrt(std::max(0.0, tr * tr - det));
  }
}

}  // namespace

void FlowParams::validate() const {
  if (levels < 1 || !(pyr_scale > 0.0 && pyr_scale < 1.0) || poly_n < 1 ||
      !(poly_sigma > 0.0) || iterations < 1 || window < 3) {
    throw Error(ErrorCode::kInvalidArgument, "invalid flow parameters");
  }
}

FlowField EstimateFlow(const GrayImage& curr, const GrayImage& prev, const FlowParams& params) {
  if (!curr.same_shape(prev)) {
    throw Error(ErrorCode::kDimensionMismatch, "flow: frames differ in size");
  }
  params.validate();
  FlowField out(curr.width, curr.height);
  if (curr.size() == 0) return out;

  // Work on the 0..255 intensity scale so the regularisation constants are
  // meaningful. I1 is the frame the flow is indexed by.
  std::vector<Plane> pyr1{ToPlane(curr, 255.0)};
  std::vector<Plane> pyr2{ToPlane(prev, 255.0)};
  const double pre_sigma = 0.5 / params.pyr_scale;
  for (int l = 1; l < params.levels; ++l) {
    const int nw = static_cast<int>(std::lround(pyr1.back().width * params.pyr_scale));
    const int nh = static_cast<int>(std::lround(pyr1.back().height * params.pyr_scale));
    if (nw < 2 * params.poly_n + 1 || nh < 2 * params.poly_n + 1) break;
    pyr1.push_back(Resize(GaussianBlur(pyr1.back(), pre_sigma), nw, nh));
    pyr2.push_back(Resize(GaussianBlur(pyr2.back(), pre_sigma), nw, nh));
  }

  Displacement d;
  for (int l = static_cast<int>(pyr1.size()) - 1; l >= 0; --l) {
    const Plane& i1 = pyr1[l];
    const Plane& i2 = pyr2[l];
    if (d.ux.data.empty()) {
      d.ux = Plane(i1.width, i1.height);
      d.uy = Plane(i1.width, i1.height);
    } else {
      const double up_x = static_cast<double>(i1.width) / d.ux.width;
      const double up_y = static_cast<double>(i1.height) / d.ux.height;
      Plane ux = Resize(d.ux, i1.width, i1.height);
      Plane uy = Resize(d.uy, i1.width, i1.height);
      for (double& v : ux.data) v *= up_x;
      for (double& v : uy.data) v *= up_y;
      d.ux = std::move(ux);
      d.uy = std::move(uy);
    }
    d.min_eig = Plane(i1.width, i1.height);
    const Expansion e1 = PolyExpand(i1, params.poly_n, params.poly_sigma);
    const Expansion e2 = PolyExpand(i2, params.poly_n, params.poly_sigma);
    for (int it = 0; it < params.iterations; ++it) RefineOnce(e1, e2, params.window, d);
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    if (d.min_eig.data[i] < params.min_eigenvalue) {
      out.dx[i] = 0.0f;
      out.dy[i] = 0.0f;
      out.valid[i] = 0;
    } else {
      // u points from curr into prev; the stored flow is its negation.
      out.dx[i] = static_cast<float>(-d.ux.data[i]);
      out.dy[i] = static_cast<float>(-d.uy.data[i]);
      out.valid[i] = 1;
    }
  }
  return out;
}

Raster WarpBackward(const Raster& in, const FlowField& flow) {
  if (in.width != flow.width || in.height != flow.height) {
    throw Error(ErrorCode::kDimensionMismatch, "warp: raster and flow differ in size");
  }
  Raster out(in.width, in.height, 0.0f, false);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const std::size_t i = out.index(x, y);
      float v;
      if (SampleBilinear(in, x - static_cast<double>(flow.dx[i]),
                         y - static_cast<double>(flow.dy[i]), &v)) {
        out.values[i] = v;
        out.valid[i] = 1;
      }
    }
  }
  return out;
}

}  // namespace stereotrap
