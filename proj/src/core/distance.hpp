#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/raster.hpp"

namespace stereotrap {

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

// Binary raster in row-major order, 1 = animal.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
};

struct Detection {
  std::size_t frame_index = 0;
  BoundingBox bbox;
  double confidence = 1.0;
  std::string category;
  std::optional<BinaryMask> mask;
};

struct DetectionsFile {
  std::string video_id;
  std::vector<Detection> detections;  // flattened over frames, file order
};

// COCO run-length encoding over column-major pixels, starting with a run of
// zeros. Accepts either explicit counts or the compact string form.
BinaryMask DecodeRle(const std::vector<std::uint32_t>& counts, int width, int height);
BinaryMask DecodeRleString(const std::string& counts, int width, int height);
std::vector<std::uint32_t> EncodeRle(const BinaryMask& mask);

// Parses {video_id, frames: [{frame_index, detections: [{bbox, confidence,
// category, mask_rle?}]}]}. Masks need the frame size; `width`/`height` come
// from the mask_rle "size" field ([height, width]) or the arguments.
DetectionsFile ParseDetectionsJson(const std::string& text, int width = 0, int height = 0);

enum class DistanceMethod { kMaskMedian, kBboxSampled };
const char* DistanceMethodName(DistanceMethod m) noexcept;

struct DistanceRecord {
  std::string observation_id;
  std::size_t frame_index = 0;
  double distance = 0.0;  // meters
  DistanceMethod method = DistanceMethod::kMaskMedian;
  double valid_depth_fraction = 0.0;
};

inline constexpr double kMinValidDepthFraction = 0.2;

// Median of valid depths under the mask. Throws NoValidDepth if fewer than
// min_fraction of the mask pixels carry depth.
DistanceRecord DistanceFromMask(const DepthMap& depth, const Detection& det,
                                double min_fraction = kMinValidDepthFraction);

// Median of valid depths inside the central 50% (per axis) of the box.
DistanceRecord DistanceFromBbox(const DepthMap& depth, const Detection& det,
                                double min_fraction = kMinValidDepthFraction);

// Mask wins when present.
DistanceRecord ExtractDistance(const DepthMap& depth, const Detection& det,
                               double min_fraction = kMinValidDepthFraction);

struct TruncationResult {
  std::vector<DistanceRecord> kept;
  std::size_t discarded_left = 0;
  std::size_t discarded_right = 0;
};

// Keeps records with left <= distance <= right.
TruncationResult CollectDistances(const std::vector<DistanceRecord>& records,
                                  double truncation_left, double truncation_right);

// observation_id,frame_index,distance_m,method,valid_depth_fraction
std::string DistanceRecordsToCsv(const std::vector<DistanceRecord>& records);
std::vector<DistanceRecord> DistanceRecordsFromCsv(const std::string& text);

}  // namespace stereotrap
