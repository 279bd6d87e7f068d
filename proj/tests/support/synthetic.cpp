#include "support/synthetic.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "core/io.hpp"

namespace stereotrap::testing {
namespace {

double Hash(std::int64_t ix, std::int64_t iy, std::uint32_t seed) {
  std::uint64_t h = static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
                    static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4FULL ^
                    static_cast<std::uint64_t>(seed) * 0x165667B19E3779F9ULL;
  h ^= h >> 33;
  h *= 0xFF51AFD7ED558CCDULL;
  h ^= h >> 33;
  h *= 0xC4CEB9FE1A85EC53ULL;
  h ^= h >> 33;
  return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

// Bilinear value noise with the given cell size (meters).
double ValueNoise(double u, double v, double cell, std::uint32_t seed) {
  const double fu = u / cell;
  const double fv = v / cell;
  const auto iu = static_cast<std::int64_t>(std::floor(fu));
  const auto iv = static_cast<std::int64_t>(std::floor(fv));
  const double a = fu - iu;
  const double b = fv - iv;
  return (1 - a) * (1 - b) * Hash(iu, iv, seed) + a * (1 - b) * Hash(iu + 1, iv, seed) +
         (1 - a) * b * Hash(iu, iv + 1, seed) + a * b * Hash(iu + 1, iv + 1, seed);
}

// Ray/box slab test; returns entry distance or +inf and the hit face axis.
double HitBox(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
              const Eigen::Vector3d& hi, int* axis) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < lo[k] || o[k] > hi[k]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double a = (lo[k] - o[k]) / d[k];
    double b = (hi[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    if (a > t0) {
      t0 = a;
      enter_axis = k;
    }
    t1 = std::min(t1, b);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  *axis = enter_axis;
  return enter_axis < 0 ? std::numeric_limits<double>::infinity() : t0;
}

}  // namespace

StereoPair RandomDotStereo(int width, int height, int disparity, double salt_fraction,
                           std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  StereoPair p{GrayImage(width, height), GrayImage(width, height)};
  for (auto& v : p.left.values) v = u(rng) < 0.5f ? 0.0f : 1.0f;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int sx = x + disparity;
      p.right.at(x, y) = sx < width ? p.left.at(sx, y) : (u(rng) < 0.5f ? 0.0f : 1.0f);
    }
  }
  if (salt_fraction > 0.0) {
    for (auto& v : p.left.values) if (u(rng) < salt_fraction) v = 1.0f;
    for (auto& v : p.right.values) if (u(rng) < salt_fraction) v = 1.0f;
  }
  return p;
}

SineTexture::SineTexture(std::uint32_t seed, int waves, double amplitude, double k_min,
                         double k_max)
    : amplitude_(amplitude) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < waves; ++i) {
    const double k = k_min + (k_max - k_min) * u(rng);
    const double th = 2.0 * std::numbers::pi * u(rng);
    kx_.push_back(k * std::cos(th));
    ky_.push_back(k * std::sin(th));
    phase_.push_back(2.0 * std::numbers::pi * u(rng));
  }
}

double SineTexture::operator()(double x, double y) const {
  double s = 0.5;
  for (std::size_t i = 0; i < kx_.size(); ++i) s += amplitude_ * std::sin(kx_[i] * x + ky_[i] * y + phase_[i]);
  return s;
}

GrayImage RenderTexture(const SineTexture& texture, int width, int height, double tx, double ty) {
  GrayImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.at(x, y) = static_cast<float>(texture(x - tx, y - ty));
  }
  return img;
}

Eigen::Matrix3d RotationXYZ(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

CalibrationSet MakeRig(int width, int height, double focal, double baseline,
                       const Eigen::Matrix3d& rotation, double k1, double k2) {
  CalibrationSet cal;
  for (Intrinsics* intr : {&cal.left, &cal.right}) {
    intr->fx = focal;
    intr->fy = focal;
    intr->cx = (width - 1) / 2.0;
    intr->cy = (height - 1) / 2.0;
    intr->k1 = k1;
    intr->k2 = k2;
    intr->width = width;
    intr->height = height;
  }
  cal.right.fx = focal * 1.01;
  cal.right.cx += 1.5;
  cal.stereo.rotation = rotation;
  // Right camera centre at (baseline, 0, 0) in left coordinates.
  cal.stereo.translation = -rotation * Eigen::Vector3d(baseline, 0.0, 0.0);
  return cal;
}

double BoxScene::Trace(int frame, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                       bool* on_box) const {
  const double cx = box_x0 + box_dx * frame;
  const Eigen::Vector3d lo(cx - box_half_width, box_y - box_half_height, box_z);
  const Eigen::Vector3d hi(cx + box_half_width, box_y + box_half_height, box_z + box_depth);
  int axis = -1;
  const double t = HitBox(origin, dir, lo, hi, &axis);
  if (on_box != nullptr) *on_box = std::isfinite(t);
  if (std::isfinite(t)) {
    const Eigen::Vector3d p = origin + t * dir;
    // Texture moves with the box.
    const double u = axis == 2 ? p.x() - cx : p.z();
    return 0.15 + 0.7 * ValueNoise(u, p.y(), box_cell, 11u + static_cast<unsigned>(axis));
  }
  if (dir.z() <= 0.0) return 0.0;
  const Eigen::Vector3d p = origin + (wall_z - origin.z()) / dir.z() * dir;
  return 0.1 + 0.8 * ValueNoise(p.x(), p.y(), wall_cell, 5u);
}

StereoPair RenderRawPair(const CalibrationSet& cal, const BoxScene& scene, int frame) {
  const RectifiedCamera rect = ComputeRectifiedCamera(cal);
  const Eigen::Matrix3d r_l = rect.left_rotation;
  const Eigen::Vector3d right_centre = -cal.stereo.rotation.transpose() * cal.stereo.translation;
  StereoPair pair{GrayImage(cal.left.width, cal.left.height),
                  GrayImage(cal.right.width, cal.right.height)};
  for (int side = 0; side < 2; ++side) {
    const Intrinsics& intr = side == 0 ? cal.left : cal.right;
    GrayImage& img = side == 0 ? pair.left : pair.right;
    const Eigen::Matrix3d to_rect =
        side == 0 ? r_l : Eigen::Matrix3d(r_l * cal.stereo.rotation.transpose());
    const Eigen::Vector3d origin = side == 0 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(r_l * right_centre);
    for (int v = 0; v < img.height; ++v) {
      for (int u = 0; u < img.width; ++u) {
        double acc = 0.0;
        for (int s = 0; s < 4; ++s) {
          const double su = u - 0.25 + 0.5 * (s % 2);
          const double sv = v - 0.25 + 0.5 * (s / 2);
          const Eigen::Vector2d px = UndistortPoint({su, sv}, intr);
          const Eigen::Vector3d dir =
              to_rect * Eigen::Vector3d((px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy, 1.0);
          acc += scene.Trace(frame, origin, dir);
        }
        img.at(u, v) = static_cast<float>(acc / 4.0);
      }
    }
  }
  return pair;
}

BinaryMask RenderBoxMask(const CalibrationSet& cal, const BoxScene& scene, int frame) {
  const RectifiedCamera rect = ComputeRectifiedCamera(cal);
  BinaryMask mask{rect.width, rect.height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(rect.width) * rect.height, 0)};
  for (int v = 0; v < rect.height; ++v) {
    for (int u = 0; u < rect.width; ++u) {
      const Eigen::Vector3d dir((u - rect.cx) / rect.fx, (v - rect.cy) / rect.fx, 1.0);
      bool hit = false;
      scene.Trace(frame, Eigen::Vector3d::Zero(), dir, &hit);
      mask.bits[static_cast<std::size_t>(v) * rect.width + u] = hit ? 1 : 0;
    }
  }
  return mask;
}

BoundingBox MaskBounds(const BinaryMask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.bits[static_cast<std::size_t>(y) * mask.width + x]) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
          static_cast<double>(y1 - y0 + 1)};
}

void WriteBoxObservation(const std::filesystem::path& dir, const CalibrationSet& cal,
                         const BoxScene& scene, int n_frames, double fps,
                         const std::vector<int>& mask_frames, const std::vector<int>& bbox_frames) {
  std::filesystem::create_directories(dir / "frames");
  for (int f = 0; f < n_frames; ++f) {
    const StereoPair raw = RenderRawPair(cal, scene, f);
    const int w = raw.left.width;
    GrayImage sbs(2 * w, raw.left.height);
    for (int y = 0; y < sbs.height; ++y) {
      for (int x = 0; x < w; ++x) {
        sbs.at(x, y) = raw.left.at(x, y);
        sbs.at(x + w, y) = raw.right.at(x, y);
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.png", f);
    WriteGrayPng16(sbs, (dir / "frames" / name).string());
  }
  WriteFileAtomic((dir / "meta.json").string(),
                  nlohmann::json({{"fps", fps}, {"timestamp", "2023-05-01T06:00:00Z"},
                                  {"camera_id", "synthetic-rig"}})
                      .dump(2));

  nlohmann::json frames = nlohmann::json::array();
  for (int f = 0; f < n_frames; ++f) {
    const bool with_mask = std::count(mask_frames.begin(), mask_frames.end(), f) > 0;
    const bool with_bbox = std::count(bbox_frames.begin(), bbox_frames.end(), f) > 0;
    if (!with_mask && !with_bbox) continue;
    const BinaryMask mask = RenderBoxMask(cal, scene, f);
    const BoundingBox b = MaskBounds(mask);
    nlohmann::json det = {{"bbox", {b.x, b.y, b.w, b.h}}, {"confidence", 0.93}, {"category", "animal"}};
    if (with_mask) det["mask_rle"] = {{"size", {mask.height, mask.width}}, {"counts", EncodeRle(mask)}};
    frames.push_back({{"frame_index", f}, {"detections", nlohmann::json::array({det})}});
  }
  WriteFileAtomic((dir / "detections.json").string(),
                  nlohmann::json({{"video_id", dir.filename().string()}, {"frames", frames}}).dump(2));
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("stereotrap_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string TempDir::str(const std::string& child) const {
  return child.empty() ? path_.string() : (path_ / child).string();
}

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace stereotrap::testing
