#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace stereotrap::testing {
namespace {

// Bilinear lookup written out directly: out of bounds, or any neighbour with
// non-zero weight invalid, means no sample.
bool Lookup(const DisparityMap& d, double x, double y, double* out) {
  if (x < 0.0 || y < 0.0 || x > d.width - 1 || y > d.height - 1) return false;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0, ay = y - y0;
  double acc = 0.0;
  for (int j = 0; j <= 1; ++j) {
    for (int i = 0; i <= 1; ++i) {
      const double w = (i ? ax : 1.0 - ax) * (j ? ay : 1.0 - ay);
      if (w == 0.0) continue;
      const int px = x0 + i, py = y0 + j;
      if (!d.is_valid(px, py)) return false;
      acc += w * d.at(px, py);
    }
  }
  *out = acc;
  return true;
}

}  // namespace

bool InvertMap(const RectificationMap& map, Side side, const Eigen::Vector2d& raw,
               Eigen::Vector2d* out) {
  const SourceMap& s = map.side(side);
  auto sample = [&](const Eigen::Vector2d& uv, Eigen::Vector2d* v) {
    const int x0 = static_cast<int>(std::floor(uv.x()));
    const int y0 = static_cast<int>(std::floor(uv.y()));
    if (x0 < 0 || y0 < 0 || x0 + 1 >= map.width || y0 + 1 >= map.height) return false;
    const double fx = uv.x() - x0, fy = uv.y() - y0;
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) {
        const std::size_t i = static_cast<std::size_t>(y0 + dy) * map.width + (x0 + dx);
        const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
        acc += w * Eigen::Vector2d(s.src_x[i], s.src_y[i]);
      }
    }
    *v = acc;
    return true;
  };
  Eigen::Vector2d uv = raw;
  for (int iter = 0; iter < 30; ++iter) {
    Eigen::Vector2d f, fu, fv;
    const double h = 0.25;
    if (!sample(uv, &f) || !sample(uv + Eigen::Vector2d(h, 0), &fu) ||
        !sample(uv + Eigen::Vector2d(0, h), &fv)) {
      return false;
    }
    Eigen::Matrix2d jac;
    jac.col(0) = (fu - f) / h;
    jac.col(1) = (fv - f) / h;
    const Eigen::Vector2d step = jac.inverse() * (raw - f);
    uv += step;
    if (step.norm() < 1e-7) break;
  }
  Eigen::Vector2d f;
  if (!sample(uv, &f) || (f - raw).norm() > 1e-3) return false;
  *out = uv;
  return true;
}

RowCheck CheckRectifiedRows(const CalibrationSet& cal, int n_points, std::uint32_t seed) {
  const RectificationMap map = ComputeRectification(cal);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uz(2.0, 20.0), un(-0.45, 0.45);
  RowCheck rc;
  int attempts = 0;
  while (rc.tested < n_points && attempts++ < 100000) {
    const double z = uz(rng);
    const Eigen::Vector3d pl(un(rng) * z * cal.left.width / cal.left.fx,
                             un(rng) * z * cal.left.height / cal.left.fy, z);
    const Eigen::Vector3d pr = cal.stereo.rotation * pl + cal.stereo.translation;
    if (pr.z() <= 0.1) continue;
    const Eigen::Vector2d raw_l = ProjectPoint(pl, cal.left);
    const Eigen::Vector2d raw_r = ProjectPoint(pr, cal.right);
    Eigen::Vector2d rect_l, rect_r;
    if (!InvertMap(map, Side::kLeft, raw_l, &rect_l) ||
        !InvertMap(map, Side::kRight, raw_r, &rect_r)) {
      continue;
    }
    const double diff = std::abs(rect_l.y() - rect_r.y());
    ++rc.tested;
    rc.within += diff < 0.5 ? 1 : 0;
    rc.worst = std::max(rc.worst, diff);
  }
  return rc;
}

double FractionWithin(const DisparityMap& disp, double target, double tol, int x_from, int margin) {
  int total = 0, good = 0;
  for (int y = margin; y < disp.height - margin; ++y) {
    for (int x = x_from; x < disp.width - margin; ++x) {
      if (!disp.is_valid(x, y)) continue;
      ++total;
      good += std::abs(disp.at(x, y) - target) <= tol ? 1 : 0;
    }
  }
  return total > 0 ? static_cast<double>(good) / total : 0.0;
}

FlowStats Interior(const FlowField& f, double tx, double ty, int margin) {
  FlowStats s;
  for (int y = margin; y < f.height - margin; ++y) {
    for (int x = margin; x < f.width - margin; ++x) {
      const std::size_t i = f.index(x, y);
      s.mean_dx += f.dx[i];
      s.mean_dy += f.dy[i];
      s.mean_endpoint_error += std::hypot(f.dx[i] - tx, f.dy[i] - ty);
      s.max_magnitude = std::max<double>(s.max_magnitude, std::hypot(f.dx[i], f.dy[i]));
      ++s.count;
    }
  }
  s.mean_dx /= s.count;
  s.mean_dy /= s.count;
  s.mean_endpoint_error /= s.count;
  return s;
}

double ReferenceTemporalError(const std::vector<DisparityMap>& d, const std::vector<FlowField>& f,
                              bool full_frame) {
  double frames_sum = 0.0;
  int frames_used = 0;
  for (std::size_t n = 1; n < d.size(); ++n) {
    double sum = 0.0;
    int count = 0;
    for (int y = 0; y < d[n].height; ++y) {
      for (int x = 0; x < d[n].width; ++x) {
        if (!d[n].is_valid(x, y)) continue;
        const std::size_t i = f[n - 1].index(x, y);
        double prev;
        if (!Lookup(d[n - 1], x - static_cast<double>(f[n - 1].dx[i]),
                    y - static_cast<double>(f[n - 1].dy[i]), &prev)) {
          continue;
        }
        sum += std::abs(d[n].at(x, y) - prev);
        ++count;
      }
    }
    if (full_frame) {
      frames_sum += sum / (d[n].width * d[n].height);
      ++frames_used;
    } else if (count > 0) {
      frames_sum += sum / count;
      ++frames_used;
    }
  }
  return frames_used ? frames_sum / frames_used : 0.0;
}

double AnalyticCell(double a, double lo, double hi, double w_l, double w) {
  const double k = std::numbers::pi / (w - w_l);
  auto prim = [&](double r) {
    const double u = k * (r - w_l);
    return 0.5 * r * r + a * (r * std::sin(u) / k + std::cos(u) / (k * k));
  };
  return prim(hi) - prim(lo);
}

std::vector<double> AnalyticProbs(double a, const std::vector<double>& edges) {
  std::vector<double> p(edges.size() - 1);
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    p[j] = AnalyticCell(a, edges[j], edges[j + 1], edges.front(), edges.back());
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

double GridSearchA1(const BinnedDistances& bins) {
  double best_a = 0.0;
  double best_ll = -INFINITY;
  for (int i = -1000; i <= 1000; ++i) {
    const double a = i * 1e-3;
    bool feasible = true;
    for (int k = 0; k < kConstraintGridPoints && feasible; ++k) {
      const double u = std::numbers::pi * k / (kConstraintGridPoints - 1);
      const double raw = 1.0 + a * std::cos(u);
      feasible = raw >= 0.0 && raw / (1.0 + a) <= 1.0 + 1e-9;
    }
    if (!feasible) continue;
    const auto p = AnalyticProbs(a, bins.edges);
    double ll = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) ll += bins.counts[j] * std::log(p[j]);
    if (ll > best_ll) {
      best_ll = ll;
      best_a = a;
    }
  }
  return best_a;
}

}  // namespace stereotrap::testing
