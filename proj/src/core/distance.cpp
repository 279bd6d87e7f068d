#include "core/distance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"

namespace stereotrap {
namespace {

double Median(std::vector<float>& values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

void CheckBbox(const BoundingBox& b, int width, int height) {
  if (!(b.w > 0.0) || !(b.h > 0.0) || b.x < 0.0 || b.y < 0.0 || b.x + b.w > width + 1e-9 ||
      b.y + b.h > height + 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "detection box lies outside the frame");
  }
}

DistanceRecord Finish(const Detection& det, std::vector<float>& depths, std::size_t region,
                      DistanceMethod method, double min_fraction) {
  const double fraction =
      region > 0 ? static_cast<double>(depths.size()) / static_cast<double>(region) : 0.0;
  if (depths.empty() || fraction < min_fraction) {
    throw Error(ErrorCode::kNoValidDepth, "too few valid depth pixels under the detection");
  }
  DistanceRecord rec;
  rec.frame_index = det.frame_index;
  rec.method = method;
  rec.valid_depth_fraction = fraction;
  rec.distance = Median(depths);
  return rec;
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BinaryMask DecodeRle(const std::vector<std::uint32_t>& counts, int width, int height) {
  BinaryMask mask{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  const std::size_t total = mask.bits.size();
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (std::uint32_t run : counts) {
    if (pos + run > total) {
      throw Error(ErrorCode::kParse, "mask RLE runs past the frame");
    }
    for (std::size_t k = 0; k < run; ++k, ++pos) {
      // Column-major position -> row-major storage.
      const std::size_t col = pos / static_cast<std::size_t>(height);
      const std::size_t row = pos % static_cast<std::size_t>(height);
      mask.bits[row * width + col] = value;
    }
    value ^= 1;
  }
  if (pos != total) throw Error(ErrorCode::kParse, "mask RLE does not cover the frame");
  return mask;
}

BinaryMask DecodeRleString(const std::string& s, int width, int height) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw Error(ErrorCode::kParse, "truncated compressed RLE");
      const int c = s[p] - 48;
      x |= static_cast<long long>(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0) throw Error(ErrorCode::kParse, "negative run in compressed RLE");
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return DecodeRle(counts, width, height);
}

std::vector<std::uint32_t> EncodeRle(const BinaryMask& mask) {
  std::vector<std::uint32_t> counts;
  std::uint8_t value = 0;
  std::uint32_t run = 0;
  for (int col = 0; col < mask.width; ++col) {
    for (int row = 0; row < mask.height; ++row) {
      const std::uint8_t b = mask.bits[static_cast<std::size_t>(row) * mask.width + col] ? 1 : 0;
      if (b != value) {
        counts.push_back(run);
        run = 0;
        value = b;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

DetectionsFile ParseDetectionsJson(const std::string& text, int width, int height) {
  DetectionsFile file;
  try {
    const auto j = nlohmann::json::parse(text);
    file.video_id = j.value("video_id", std::string{});
    for (const auto& frame : j.at("frames")) {
      const auto frame_index = frame.at("frame_index").get<std::size_t>();
      for (const auto& d : frame.at("detections")) {
        Detection det;
        det.frame_index = frame_index;
        const auto box = d.at("bbox").get<std::vector<double>>();
        if (box.size() != 4) throw Error(ErrorCode::kParse, "bbox needs 4 numbers");
        det.bbox = {box[0], box[1], box[2], box[3]};
        det.confidence = d.value("confidence", 1.0);
        det.category = d.value("category", std::string{});
        if (d.contains("mask_rle") && !d["mask_rle"].is_null()) {
          const auto& rle = d["mask_rle"];
          int w = width;
          int h = height;
          nlohmann::json counts = rle;
          if (rle.is_object()) {
            if (rle.contains("size")) {
              const auto size = rle["size"].get<std::vector<int>>();
              if (size.size() != 2) throw Error(ErrorCode::kParse, "mask size needs [h, w]");
              h = size[0];
              w = size[1];
            }
            counts = rle.at("counts");
          }
          if (w <= 0 || h <= 0) {
            throw Error(ErrorCode::kParse, "mask_rle without a frame size");
          }
          det.mask = counts.is_string()
                         ? DecodeRleString(counts.get<std::string>(), w, h)
                         : DecodeRle(counts.get<std::vector<std::uint32_t>>(), w, h);
        }
        file.detections.push_back(std::move(det));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("detections: ") + e.what());
  }
  return file;
}

const char* DistanceMethodName(DistanceMethod m) noexcept {
  return m == DistanceMethod::kMaskMedian ? "mask-median" : "bbox-sampled";
}

DistanceRecord DistanceFromMask(const DepthMap& depth, const Detection& det, double min_fraction) {
  if (!det.mask) throw Error(ErrorCode::kInvalidArgument, "detection has no mask");
  const BinaryMask& mask = *det.mask;
  if (mask.width != depth.width || mask.height != depth.height) {
    throw Error(ErrorCode::kDimensionMismatch, "mask does not match the depth map");
  }
  std::vector<float> depths;
  std::size_t region = 0;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    ++region;
    if (depth.valid[i] && std::isfinite(depth.values[i]) && depth.values[i] > 0.0f) {
      depths.push_back(depth.values[i]);
    }
  }
  return Finish(det, depths, region, DistanceMethod::kMaskMedian, min_fraction);
}

DistanceRecord DistanceFromBbox(const DepthMap& depth, const Detection& det, double min_fraction) {
  CheckBbox(det.bbox, depth.width, depth.height);
  const BoundingBox& b = det.bbox;
  const double cx0 = b.x + 0.25 * b.w;
  const double cx1 = b.x + 0.75 * b.w;
  const double cy0 = b.y + 0.25 * b.h;
  const double cy1 = b.y + 0.75 * b.h;
  const int x0 = std::clamp(static_cast<int>(std::floor(cx0)), 0, depth.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(cy0)), 0, depth.height - 1);
  const int x1 = std::clamp(std::max(x0 + 1, static_cast<int>(std::ceil(cx1))), 1, depth.width);
  const int y1 = std::clamp(std::max(y0 + 1, static_cast<int>(std::ceil(cy1))), 1, depth.height);
  std::vector<float> depths;
  std::size_t region = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      ++region;
      const std::size_t i = depth.index(x, y);
      if (depth.valid[i] && std::isfinite(depth.values[i]) && depth.values[i] > 0.0f) {
        depths.push_back(depth.values[i]);
      }
    }
  }
  return Finish(det, depths, region, DistanceMethod::kBboxSampled, min_fraction);
}

DistanceRecord ExtractDistance(const DepthMap& depth, const Detection& det, double min_fraction) {
  return det.mask ? DistanceFromMask(depth, det, min_fraction)
                  : DistanceFromBbox(depth, det, min_fraction);
}

TruncationResult CollectDistances(const std::vector<DistanceRecord>& records,
                                  double truncation_left, double truncation_right) {
  if (!(truncation_left >= 0.0) || !(truncation_left < truncation_right)) {
    throw Error(ErrorCode::kInvalidWindow, "truncation needs 0 <= left < right");
  }
  TruncationResult out;
  for (const auto& r : records) {
    if (r.distance < truncation_left) {
      ++out.discarded_left;
    } else if (r.distance > truncation_right) {
      ++out.discarded_right;
    } else {
      out.kept.push_back(r);
    }
  }
  return out;
}

std::string DistanceRecordsToCsv(const std::vector<DistanceRecord>& records) {
  std::string out = "observation_id,frame_index,distance_m,method,valid_depth_fraction\n";
  for (const auto& r : records) {
    out += r.observation_id + "," + std::to_string(r.frame_index) + "," + FormatDouble(r.distance) +
           "," + DistanceMethodName(r.method) + "," + FormatDouble(r.valid_depth_fraction) + "\n";
  }
  return out;
}

std::vector<DistanceRecord> DistanceRecordsFromCsv(const std::string& text) {
  std::vector<DistanceRecord> records;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("observation_id", 0) == 0) continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw Error(ErrorCode::kParse, "distance CSV row needs 5 fields");
    DistanceRecord r;
    try {
      r.observation_id = fields[0];
      r.frame_index = static_cast<std::size_t>(std::stoull(fields[1]));
      r.distance = std::stod(fields[2]);
      if (fields[3] == "mask-median") {
        r.method = DistanceMethod::kMaskMedian;
      } else if (fields[3] == "bbox-sampled") {
        r.method = DistanceMethod::kBboxSampled;
      } else {
        throw Error(ErrorCode::kParse, "unknown distance method " + fields[3]);
      }
      r.valid_depth_fraction = std::stod(fields[4]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "malformed distance CSV row: " + line);
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace stereotrap
