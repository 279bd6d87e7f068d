#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "core/raster.hpp"

namespace stereotrap {

// Pinhole camera with 4-coefficient radial-tangential distortion.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
};

// Transform from the left camera frame to the right camera frame:
// X_right = rotation * X_left + translation (meters).
struct Extrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  double baseline() const { return translation.norm(); }
  void validate() const;
};

struct CalibrationSet {
  Intrinsics left;
  Intrinsics right;
  Extrinsics stereo;

  void validate() const;
};

CalibrationSet ParseCalibrationJson(const std::string& text);
CalibrationSet LoadCalibration(const std::string& path);
std::string CalibrationToJson(const CalibrationSet& cal);

enum class Side { kLeft, kRight };

// Per-pixel source coordinates into the unrectified image.
struct SourceMap {
  std::vector<float> src_x;
  std::vector<float> src_y;
  std::vector<std::uint8_t> valid;
};

struct RectificationMap {
  int width = 0;
  int height = 0;
  SourceMap left;
  SourceMap right;
  double rectified_fx = 0.0;
  double rectified_cx = 0.0;
  double rectified_cy = 0.0;
  double rectified_baseline = 0.0;
  // Rotations taking each original camera frame into its rectified frame.
  Eigen::Matrix3d left_rotation = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d right_rotation = Eigen::Matrix3d::Identity();

  const SourceMap& side(Side s) const { return s == Side::kLeft ? left : right; }
};

// Identity map of the given size with the supplied rectified camera model.
RectificationMap IdentityRectification(int width, int height, double fx, double cx,
                                       double cy, double baseline);

Eigen::Vector2d DistortNormalized(const Eigen::Vector2d& xy, const Intrinsics& intr);

// Pixel coordinate of a 3D point in the camera frame (with distortion).
Eigen::Vector2d ProjectPoint(const Eigen::Vector3d& point, const Intrinsics& intr);

// Undistorted (ideal pinhole) pixel position of a distorted pixel, inverting
// the distortion model by Gauss-Newton. Throws NonConvergence if the pixel
// residual is still above 1e-6 after 20 iterations.
Eigen::Vector2d UndistortPoint(const Eigen::Vector2d& pixel, const Intrinsics& intr);

// Shared rectified pinhole model (Bouguet-style: the relative rotation is
// split between both views, then both are turned so the baseline is
// horizontal).
struct RectifiedCamera {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double baseline = 0.0;
  Eigen::Matrix3d left_rotation = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d right_rotation = Eigen::Matrix3d::Identity();
};

RectifiedCamera ComputeRectifiedCamera(const CalibrationSet& cal);
RectificationMap ComputeRectification(const CalibrationSet& cal);

// Pixel coordinate in the rectified image of a point given in the original
// camera frame of `side`.
Eigen::Vector2d ProjectRectified(const Eigen::Vector3d& point_in_camera,
                                 const RectificationMap& map, Side side);

GrayImage Remap(const GrayImage& img, const RectificationMap& map, Side side);

inline constexpr double kDefaultMinDisparity = 0.1;

// z = baseline * f / d. Returns NaN for d <= d_min.
double DisparityToDepth(double disparity, double baseline, double focal,
                        double d_min = kDefaultMinDisparity) noexcept;
double DisparityToDepth(double disparity, const RectificationMap& map,
                        double d_min = kDefaultMinDisparity) noexcept;
DepthMap DisparityToDepth(const DisparityMap& disp, const RectificationMap& map,
                          double d_min = kDefaultMinDisparity);
DepthMap DisparityToDepth(const DisparityMap& disp, double baseline, double focal,
                          double d_min = kDefaultMinDisparity);

struct Correspondence {
  Eigen::Vector2d first;   // normalized coordinates in the left camera
  Eigen::Vector2d second;  // normalized coordinates in the right camera
};

struct EssentialEstimate {
  Extrinsics pose;  // translation has unit norm
  Eigen::Matrix3d essential = Eigen::Matrix3d::Zero();
  double mean_epipolar_residual = 0.0;  // mean |x2' E x1|
  int points_in_front = 0;
};

EssentialEstimate EstimateEssential8Point(const std::vector<Correspondence>& pairs);

}  // namespace stereotrap
