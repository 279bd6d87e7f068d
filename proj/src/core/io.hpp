#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/raster.hpp"

namespace stereotrap {

// Interleaved image with samples scaled to [0, 1].
struct ColorImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;
};

// PGM (P2/P5) and PPM (P3/P6) with maxval up to 65535, and 8/16-bit PNG.
ColorImage ReadImage(const std::string& path);

// Unweighted mean of the first three bands; single-band input passes through
// and alpha is ignored.
GrayImage ToGrayscale(const ColorImage& img);

// Reads any supported image and converts to grayscale. PFM files keep their
// NaN-as-invalid mask.
GrayImage LoadGray(const std::string& path);

std::pair<GrayImage, GrayImage> SplitSbs(const GrayImage& frame);

// Single-channel 32-bit float, NaN marks invalid pixels.
void WritePfm(const Raster& raster, const std::string& path);
Raster ReadPfm(const std::string& path);

// Three-channel PFM holding dx, dy and the validity flag (0/1).
void WriteFlowPfm(const FlowField& flow, const std::string& path);
FlowField ReadFlowPfm(const std::string& path);

// 16-bit grayscale PNG; invalid pixels are written as 0.
void WritePng16(const std::vector<std::uint16_t>& pixels, int width, int height,
                const std::string& path);
// Values clamped to [0, 1] and scaled to 65535.
void WriteGrayPng16(const GrayImage& img, const std::string& path);
// Disparity times 256, 0 = invalid.
void WriteDisparityPng(const DisparityMap& disp, const std::string& path);

// Chooses the writer from the extension: .pfm, .png (16-bit) or .pgm (16-bit).
void WriteGray(const GrayImage& img, const std::string& path);

std::string ReadTextFile(const std::string& path);
// Writes to a sibling temporary file and renames it into place. Parent
// directories are created as needed.
void WriteFileAtomic(const std::string& path, const std::string& contents);

}  // namespace stereotrap
