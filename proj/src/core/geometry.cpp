#include "core/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"

namespace stereotrap {
namespace {

Intrinsics ParseIntrinsics(const nlohmann::json& j) {
  Intrinsics intr;
  intr.fx = j.at("fx").get<double>();
  intr.fy = j.at("fy").get<double>();
  intr.cx = j.at("cx").get<double>();
  intr.cy = j.at("cy").get<double>();
  intr.k1 = j.value("k1", 0.0);
  intr.k2 = j.value("k2", 0.0);
  intr.p1 = j.value("p1", 0.0);
  intr.p2 = j.value("p2", 0.0);
  intr.width = j.at("width").get<int>();
  intr.height = j.at("height").get<int>();
  return intr;
}

nlohmann::json IntrinsicsJson(const Intrinsics& intr) {
  return {{"fx", intr.fx}, {"fy", intr.fy}, {"cx", intr.cx}, {"cy", intr.cy},
          {"k1", intr.k1}, {"k2", intr.k2}, {"p1", intr.p1}, {"p2", intr.p2},
          {"width", intr.width}, {"height", intr.height}};
}

Eigen::Matrix2d DistortionJacobian(const Eigen::Vector2d& xy, const Intrinsics& intr) {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  const double dradial = 2.0 * intr.k1 + 4.0 * intr.k2 * r2;  // d(radial)/d(r2) * 2
  Eigen::Matrix2d jac;
  jac(0, 0) = radial + x * dradial * x + 2.0 * intr.p1 * y + 6.0 * intr.p2 * x;
  jac(0, 1) = x * dradial * y + 2.0 * intr.p1 * x + 2.0 * intr.p2 * y;
  jac(1, 0) = y * dradial * x + 2.0 * intr.p1 * x + 2.0 * intr.p2 * y;
  jac(1, 1) = radial + y * dradial * y + 6.0 * intr.p1 * y + 2.0 * intr.p2 * x;
  return jac;
}

Eigen::Matrix3d RotationFromVector(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

Eigen::Vector3d VectorFromRotation(const Eigen::Matrix3d& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

SourceMap BuildSourceMap(const Intrinsics& intr, const Eigen::Matrix3d& rect_rotation,
                         int width, int height, double f, double cx, double cy) {
  SourceMap out;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  out.src_x.assign(n, 0.0f);
  out.src_y.assign(n, 0.0f);
  out.valid.assign(n, 0);
  const Eigen::Matrix3d back = rect_rotation.transpose();
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Eigen::Vector3d ray((u - cx) / f, (v - cy) / f, 1.0);
      const Eigen::Vector3d p = back * ray;
      const std::size_t i = static_cast<std::size_t>(v) * width + u;
      if (p.z() <= 0.0) continue;
      const Eigen::Vector2d px = ProjectPoint(p, intr);
      out.src_x[i] = static_cast<float>(px.x());
      out.src_y[i] = static_cast<float>(px.y());
      out.valid[i] = px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= intr.width - 1 &&
                     px.y() <= intr.height - 1;
    }
  }
  return out;
}

Eigen::Vector3d Triangulate(const Eigen::Matrix<double, 3, 4>& p1,
                            const Eigen::Matrix<double, 3, 4>& p2,
                            const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  Eigen::Matrix4d a;
  a.row(0) = x1.x() * p1.row(2) - p1.row(0);
  a.row(1) = x1.y() * p1.row(2) - p1.row(1);
  a.row(2) = x2.x() * p2.row(2) - p2.row(0);
  a.row(3) = x2.y() * p2.row(2) - p2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  return h.head<3>() / h(3);
}

// Similarity transform moving the centroid to the origin with mean distance
// sqrt(2).
Eigen::Matrix3d NormalizingTransform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

}  // namespace

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "sensor size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point outside the sensor");
  }
}

void Extrinsics::validate() const {
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "rotation is not orthonormal");
  }
  if (!(translation.norm() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "translation must be non-zero");
  }
}

void CalibrationSet::validate() const {
  left.validate();
  right.validate();
  stereo.validate();
  if (left.width != right.width || left.height != right.height) {
    throw Error(ErrorCode::kDimensionMismatch, "left and right sensors differ in size");
  }
}

CalibrationSet ParseCalibrationJson(const std::string& text) {
  CalibrationSet cal;
  try {
    const auto j = nlohmann::json::parse(text);
    cal.left = ParseIntrinsics(j.at("left"));
    cal.right = ParseIntrinsics(j.at("right"));
    const auto rot = j.at("rotation").get<std::vector<double>>();
    const auto trans = j.at("translation_m").get<std::vector<double>>();
    if (rot.size() != 9 || trans.size() != 3) {
      throw Error(ErrorCode::kParse, "rotation needs 9 values and translation_m 3");
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cal.stereo.rotation(r, c) = rot[r * 3 + c];
      cal.stereo.translation(r) = trans[r];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("calibration: ") + e.what());
  }
  cal.validate();
  return cal;
}

CalibrationSet LoadCalibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open calibration file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCalibrationJson(ss.str());
}

std::string CalibrationToJson(const CalibrationSet& cal) {
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cal.stereo.rotation(r, c);
  nlohmann::json j = {
      {"left", IntrinsicsJson(cal.left)},
      {"right", IntrinsicsJson(cal.right)},
      {"rotation", rot},
      {"translation_m",
       {cal.stereo.translation.x(), cal.stereo.translation.y(), cal.stereo.translation.z()}}};
  return j.dump(2);
}

RectificationMap IdentityRectification(int width, int height, double fx, double cx,
                                       double cy, double baseline) {
  RectificationMap map;
  map.width = width;
  map.height = height;
  map.rectified_fx = fx;
  map.rectified_cx = cx;
  map.rectified_cy = cy;
  map.rectified_baseline = baseline;
  SourceMap s;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  s.src_x.resize(n);
  s.src_y.resize(n);
  s.valid.assign(n, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      s.src_x[static_cast<std::size_t>(y) * width + x] = static_cast<float>(x);
      s.src_y[static_cast<std::size_t>(y) * width + x] = static_cast<float>(y);
    }
  }
  map.left = s;
  map.right = std::move(s);
  return map;
}

Eigen::Vector2d DistortNormalized(const Eigen::Vector2d& xy, const Intrinsics& intr) {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  return {x * radial + 2.0 * intr.p1 * x * y + intr.p2 * (r2 + 2.0 * x * x),
          y * radial + intr.p1 * (r2 + 2.0 * y * y) + 2.0 * intr.p2 * x * y};
}

Eigen::Vector2d ProjectPoint(const Eigen::Vector3d& point, const Intrinsics& intr) {
  const Eigen::Vector2d d = DistortNormalized(point.head<2>() / point.z(), intr);
  return {intr.fx * d.x() + intr.cx, intr.fy * d.y() + intr.cy};
}

Eigen::Vector2d UndistortPoint(const Eigen::Vector2d& pixel, const Intrinsics& intr) {
  if (!pixel.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "undistort: non-finite pixel");
  }
  const Eigen::Vector2d target((pixel.x() - intr.cx) / intr.fx,
                               (pixel.y() - intr.cy) / intr.fy);
  const Eigen::Vector2d scale(intr.fx, intr.fy);
  Eigen::Vector2d xy = target;
  double residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= 20; ++iter) {
    const Eigen::Vector2d err = DistortNormalized(xy, intr) - target;
    residual = err.cwiseProduct(scale).norm();
    if (residual < 1e-6 || iter == 20) break;
    const Eigen::Matrix2d jac = DistortionJacobian(xy, intr);
    if (std::abs(jac.determinant()) < 1e-15) break;
    xy -= jac.inverse() * err;
    if (!xy.allFinite()) break;
  }
  if (!(residual < 1e-6)) {
    throw Error(ErrorCode::kNonConvergence, "undistort: inversion did not converge");
  }
  return {intr.fx * xy.x() + intr.cx, intr.fy * xy.y() + intr.cy};
}

RectifiedCamera ComputeRectifiedCamera(const CalibrationSet& cal) {
  cal.validate();
  const Eigen::Vector3d& t_in = cal.stereo.translation;
  const double baseline = t_in.norm();
  if (baseline < 1e-9) {
    throw Error(ErrorCode::kDegenerateGeometry, "stereo baseline is zero");
  }

  // Split the relative rotation evenly between both views.
  const Eigen::Matrix3d half = RotationFromVector(-0.5 * VectorFromRotation(cal.stereo.rotation));
  const Eigen::Vector3d t = half * t_in;
  if (std::abs(t.x()) < 0.5 * baseline) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "baseline is not predominantly horizontal; cannot rectify");
  }
  const Eigen::Vector3d target(t.x() > 0.0 ? 1.0 : -1.0, 0.0, 0.0);
  Eigen::Vector3d axis = t.cross(target);
  const double axis_norm = axis.norm();
  Eigen::Matrix3d align = Eigen::Matrix3d::Identity();
  if (axis_norm > 0.0) {
    axis *= std::acos(std::min(1.0, std::abs(t.x()) / baseline)) / axis_norm;
    align = RotationFromVector(axis);
  }

  RectifiedCamera cam;
  cam.width = cal.left.width;
  cam.height = cal.left.height;
  cam.left_rotation = align * half.transpose();
  cam.right_rotation = align * half;
  cam.fx = std::min({cal.left.fx, cal.left.fy, cal.right.fx, cal.right.fy});
  cam.cx = 0.5 * (cal.left.cx + cal.right.cx);
  cam.cy = 0.5 * (cal.left.cy + cal.right.cy);
  cam.baseline = baseline;
  return cam;
}

RectificationMap ComputeRectification(const CalibrationSet& cal) {
  const RectifiedCamera cam = ComputeRectifiedCamera(cal);
  RectificationMap map;
  map.width = cam.width;
  map.height = cam.height;
  map.left_rotation = cam.left_rotation;
  map.right_rotation = cam.right_rotation;
  map.rectified_fx = cam.fx;
  map.rectified_cx = cam.cx;
  map.rectified_cy = cam.cy;
  map.rectified_baseline = cam.baseline;
  map.left = BuildSourceMap(cal.left, cam.left_rotation, cam.width, cam.height, cam.fx, cam.cx,
                            cam.cy);
  map.right = BuildSourceMap(cal.right, cam.right_rotation, cam.width, cam.height, cam.fx, cam.cx,
                             cam.cy);
  return map;
}

Eigen::Vector2d ProjectRectified(const Eigen::Vector3d& point_in_camera,
                                 const RectificationMap& map, Side side) {
  const Eigen::Matrix3d& r = side == Side::kLeft ? map.left_rotation : map.right_rotation;
  const Eigen::Vector3d p = r * point_in_camera;
  return {map.rectified_fx * p.x() / p.z() + map.rectified_cx,
          map.rectified_fx * p.y() / p.z() + map.rectified_cy};
}

GrayImage Remap(const GrayImage& img, const RectificationMap& map, Side side) {
  if (img.width != map.width || img.height != map.height) {
    throw Error(ErrorCode::kDimensionMismatch, "remap: image does not match the map");
  }
  const SourceMap& src = map.side(side);
  GrayImage out(map.width, map.height, 0.0f, false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!src.valid[i]) continue;
    float v;
    if (SampleBilinear(img, src.src_x[i], src.src_y[i], &v)) {
      out.values[i] = v;
      out.valid[i] = 1;
    }
  }
  return out;
}

double DisparityToDepth(double disparity, double baseline, double focal,
                        double d_min) noexcept {
  if (!(disparity > d_min)) return std::numeric_limits<double>::quiet_NaN();
  return baseline * focal / disparity;
}

double DisparityToDepth(double disparity, const RectificationMap& map, double d_min) noexcept {
  return DisparityToDepth(disparity, map.rectified_baseline, map.rectified_fx, d_min);
}

DepthMap DisparityToDepth(const DisparityMap& disp, double baseline, double focal,
                          double d_min) {
  DepthMap out(disp.width, disp.height, 0.0f, false);
  for (std::size_t i = 0; i < disp.size(); ++i) {
    if (!disp.valid[i]) continue;
    const double z = DisparityToDepth(disp.values[i], baseline, focal, d_min);
    if (std::isnan(z)) continue;
    out.values[i] = static_cast<float>(z);
    out.valid[i] = 1;
  }
  return out;
}

DepthMap DisparityToDepth(const DisparityMap& disp, const RectificationMap& map,
                          double d_min) {
  if (disp.width != map.width || disp.height != map.height) {
    throw Error(ErrorCode::kDimensionMismatch, "disparity does not match the rectification");
  }
  return DisparityToDepth(disp, map.rectified_baseline, map.rectified_fx, d_min);
}

EssentialEstimate EstimateEssential8Point(const std::vector<Correspondence>& pairs) {
  if (pairs.size() < 8) {
    throw Error(ErrorCode::kInsufficientPoints, "8-point: need at least 8 correspondences");
  }
  std::vector<Eigen::Vector2d> first, second;
  first.reserve(pairs.size());
  second.reserve(pairs.size());
  for (const auto& c : pairs) {
    if (!c.first.allFinite() || !c.second.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "8-point: non-finite coordinate");
    }
    first.push_back(c.first);
    second.push_back(c.second);
  }
  const Eigen::Matrix3d t1 = NormalizingTransform(first);
  const Eigen::Matrix3d t2 = NormalizingTransform(second);

  const Eigen::Index rows = std::max<Eigen::Index>(9, static_cast<Eigen::Index>(pairs.size()));
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::Vector3d p1 = t1 * first[i].homogeneous();
    const Eigen::Vector3d p2 = t2 * second[i].homogeneous();
    a.row(static_cast<Eigen::Index>(i)) << p2.x() * p1.x(), p2.x() * p1.y(), p2.x(),
        p2.y() * p1.x(), p2.y() * p1.y(), p2.y(), p1.x(), p1.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(7) < 1e-10 * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "8-point: measurement matrix has a multi-dimensional null space");
  }
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Eigen::Matrix3d en;
  en << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  Eigen::Matrix3d essential = t2.transpose() * en * t1;

  // Project onto the essential manifold (two equal singular values, one zero).
  Eigen::JacobiSVD<Eigen::Matrix3d> esvd(essential, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = esvd.matrixU();
  Eigen::Matrix3d v = esvd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  essential = u * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() * v.transpose();

  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d rotations[2] = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Eigen::Vector3d base_t = u.col(2);

  Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Zero();
  p1.leftCols<3>().setIdentity();
  int best = -1;
  EssentialEstimate result;
  for (const auto& r : rotations) {
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector3d t = sign * base_t;
      Eigen::Matrix<double, 3, 4> p2;
      p2.leftCols<3>() = r;
      p2.col(3) = t;
      int in_front = 0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Eigen::Vector3d x = Triangulate(p1, p2, first[i], second[i]);
        if (x.z() > 0.0 && (r * x + t).z() > 0.0) ++in_front;
      }
      if (in_front > best) {
        best = in_front;
        result.pose.rotation = r;
        result.pose.translation = t;
      }
    }
  }
  result.points_in_front = best;
  result.essential = essential;
  double residual = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    residual += std::abs(second[i].homogeneous().dot(essential * first[i].homogeneous()));
  }
  result.mean_epipolar_residual = residual / static_cast<double>(pairs.size());
  return result;
}

}  // namespace stereotrap
