#include "core/io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/error.hpp"

namespace stereotrap {
namespace {

namespace fs = std::filesystem;

std::string Extension(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// Netpbm header token reader that skips whitespace and comments.
class HeaderReader {
 public:
  HeaderReader(const std::string& data, std::size_t pos) : data_(data), pos_(pos) {}

  std::string Token() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorCode::kParse, "truncated image header");
    return data_.substr(start, pos_ - start);
  }

  long Number() {
    const std::string t = Token();
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (*end != '\0') throw Error(ErrorCode::kParse, "bad number in image header: " + t);
    return v;
  }

  // Consumes exactly one whitespace byte ending the header.
  std::size_t BodyStart() {
    if (pos_ >= data_.size()) throw Error(ErrorCode::kParse, "missing image data");
    return pos_ + 1;
  }

 private:
  const std::string& data_;
  std::size_t pos_;
};

ColorImage ReadNetpbm(const std::string& data) {
  const std::string magic = data.substr(0, 2);
  int channels = 0;
  bool ascii = false;
  if (magic == "P2" || magic == "P5") channels = 1;
  if (magic == "P3" || magic == "P6") channels = 3;
  ascii = magic == "P2" || magic == "P3";
  if (channels == 0) throw Error(ErrorCode::kParse, "unsupported netpbm type " + magic);

  HeaderReader header(data, 2);
  const long w = header.Number();
  const long h = header.Number();
  const long maxval = header.Number();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::kParse, "invalid netpbm header");
  }
  ColorImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = channels;
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  img.data.resize(n);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(header.Number() * scale);
    return img;
  }
  const std::size_t start = header.BodyStart();
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  if (data.size() < start + n * bytes) throw Error(ErrorCode::kParse, "truncated netpbm data");
  const auto* p = reinterpret_cast<const unsigned char*>(data.data() + start);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes == 2 ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
    img.data[i] = static_cast<float>(v * scale);
  }
  return img;
}

struct PngReadState {
  const std::string* data;
  std::size_t pos;
};

void PngReadCallback(png_structp png, png_bytep out, png_size_t length) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + length > st->data->size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->data->data() + st->pos, length);
  st->pos += length;
}

void PngErrorCallback(png_structp, png_const_charp msg) { throw Error(ErrorCode::kParse, msg); }
void PngWarningCallback(png_structp, png_const_charp) {}

ColorImage ReadPng(const std::string& data) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, PngErrorCallback,
                                           PngWarningCallback);
  if (!png) throw Error(ErrorCode::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ColorImage img;
  try {
    PngReadState st{&data, 0};
    png_set_read_fn(png, &st, PngReadCallback);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = png_get_channels(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(rowbytes * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = buf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.data.resize(n);
    if (out_depth == 16) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t v;
        std::memcpy(&v, buf.data() + 2 * i, 2);
        img.data[i] = static_cast<float>(v / 65535.0);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(buf[i] / 255.0);
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  return img;
}

void PngWriteCallback(png_structp png, png_bytep in, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(in), length);
}

void PngFlushCallback(png_structp) {}

std::string EncodePng16(const std::vector<std::uint16_t>& pixels, int width, int height) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, PngErrorCallback,
                                            PngWarningCallback);
  if (!png) throw Error(ErrorCode::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  try {
    png_set_write_fn(png, &out, PngWriteCallback, PngFlushCallback);
    png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::uint16_t v = pixels[static_cast<std::size_t>(y) * width + x];
        row[2 * x] = static_cast<unsigned char>(v >> 8);
        row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  return out;
}

bool HostIsLittleEndian() {
  const std::uint16_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

// PFM rows are stored bottom to top; a negative scale means little endian.
std::string EncodePfm(int width, int height, int channels, const std::vector<float>& interleaved) {
  std::ostringstream os;
  os << (channels == 3 ? "PF" : "Pf") << '\n' << width << ' ' << height << '\n'
     << (HostIsLittleEndian() ? "-1.0" : "1.0") << '\n';
  std::string out = os.str();
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  for (int y = height - 1; y >= 0; --y) {
    out.append(reinterpret_cast<const char*>(interleaved.data() + row * y), row * sizeof(float));
  }
  return out;
}

std::vector<float> DecodePfm(const std::string& data, int* width, int* height, int* channels) {
  const std::string magic = data.substr(0, 2);
  if (magic == "Pf") {
    *channels = 1;
  } else if (magic == "PF") {
    *channels = 3;
  } else {
    throw Error(ErrorCode::kParse, "not a PFM file");
  }
  HeaderReader header(data, 2);
  const long w = header.Number();
  const long h = header.Number();
  const double scale = std::stod(header.Token());
  const std::size_t start = header.BodyStart();
  if (w <= 0 || h <= 0 || scale == 0.0) throw Error(ErrorCode::kParse, "invalid PFM header");
  const std::size_t row = static_cast<std::size_t>(w) * *channels;
  const std::size_t n = row * h;
  if (data.size() < start + n * sizeof(float)) throw Error(ErrorCode::kParse, "truncated PFM");
  const bool swap = (scale < 0.0) != HostIsLittleEndian();
  std::vector<float> out(n);
  for (long y = 0; y < h; ++y) {
    const char* src = data.data() + start + (h - 1 - y) * row * sizeof(float);
    for (std::size_t i = 0; i < row; ++i) {
      char bytes[4];
      std::memcpy(bytes, src + i * 4, 4);
      if (swap) {
        std::swap(bytes[0], bytes[3]);
        std::swap(bytes[1], bytes[2]);
      }
      std::memcpy(&out[y * row + i], bytes, 4);
    }
  }
  *width = static_cast<int>(w);
  *height = static_cast<int>(h);
  return out;
}

std::string EncodePgm16(const GrayImage& img) {
  std::ostringstream os;
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::string out = os.str();
  out.reserve(out.size() + img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.valid[i] ? std::clamp(static_cast<double>(img.values[i]), 0.0, 1.0) : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

std::vector<std::uint16_t> QuantizeGray(const GrayImage& img) {
  std::vector<std::uint16_t> px(img.size(), 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!img.valid[i]) continue;
    const double v = std::clamp(static_cast<double>(img.values[i]), 0.0, 1.0);
    px[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  return px;
}

}  // namespace

ColorImage ReadImage(const std::string& path) {
  const std::string data = ReadTextFile(path);
  if (data.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(data.data()), 0, 8) == 0) {
    return ReadPng(data);
  }
  if (data.size() >= 2 && data[0] == 'P') {
    if (data[1] == 'f' || data[1] == 'F') {
      ColorImage img;
      img.data = DecodePfm(data, &img.width, &img.height, &img.channels);
      return img;
    }
    return ReadNetpbm(data);
  }
  throw Error(ErrorCode::kParse, "unrecognised image format: " + path);
}

GrayImage ToGrayscale(const ColorImage& img) {
  if (img.channels < 1 || img.channels > 4) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported channel count");
  }
  GrayImage out(img.width, img.height);
  const int bands = img.channels >= 3 ? 3 : 1;
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const float* px = img.data.data() + i * img.channels;
    if (bands == 3) {
      out.values[i] = (px[0] + px[1] + px[2]) / 3.0f;
    } else {
      out.values[i] = px[0];
    }
  }
  return out;
}

GrayImage LoadGray(const std::string& path) {
  if (Extension(path) == ".pfm") return GrayImage(ReadPfm(path));
  return ToGrayscale(ReadImage(path));
}

std::pair<GrayImage, GrayImage> SplitSbs(const GrayImage& frame) {
  if (frame.width % 2 != 0) {
    throw Error(ErrorCode::kOddWidth,
                "side-by-side frame width " + std::to_string(frame.width) + " is odd");
  }
  const int w = frame.width / 2;
  GrayImage left(w, frame.height);
  GrayImage right(w, frame.height);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t l = frame.index(x, y);
      const std::size_t r = frame.index(x + w, y);
      left.values[left.index(x, y)] = frame.values[l];
      left.valid[left.index(x, y)] = frame.valid[l];
      right.values[right.index(x, y)] = frame.values[r];
      right.valid[right.index(x, y)] = frame.valid[r];
    }
  }
  return {std::move(left), std::move(right)};
}

void WritePfm(const Raster& raster, const std::string& path) {
  std::vector<float> data(raster.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = raster.valid[i] ? raster.values[i] : std::numeric_limits<float>::quiet_NaN();
  }
  WriteFileAtomic(path, EncodePfm(raster.width, raster.height, 1, data));
}

Raster ReadPfm(const std::string& path) {
  int w = 0, h = 0, c = 0;
  std::vector<float> data = DecodePfm(ReadTextFile(path), &w, &h, &c);
  if (c != 1) throw Error(ErrorCode::kParse, "expected a single-channel PFM: " + path);
  Raster r(w, h);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (std::isnan(data[i])) {
      r.values[i] = 0.0f;
      r.valid[i] = 0;
    } else {
      r.values[i] = data[i];
    }
  }
  return r;
}

void WriteFlowPfm(const FlowField& flow, const std::string& path) {
  std::vector<float> data(flow.size() * 3);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    data[3 * i] = flow.dx[i];
    data[3 * i + 1] = flow.dy[i];
    data[3 * i + 2] = flow.valid[i] ? 1.0f : 0.0f;
  }
  WriteFileAtomic(path, EncodePfm(flow.width, flow.height, 3, data));
}

FlowField ReadFlowPfm(const std::string& path) {
  int w = 0, h = 0, c = 0;
  std::vector<float> data = DecodePfm(ReadTextFile(path), &w, &h, &c);
  if (c != 3) throw Error(ErrorCode::kParse, "expected a three-channel flow PFM: " + path);
  FlowField flow(w, h);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    flow.dx[i] = data[3 * i];
    flow.dy[i] = data[3 * i + 1];
    flow.valid[i] = data[3 * i + 2] > 0.5f;
  }
  return flow;
}

void WritePng16(const std::vector<std::uint16_t>& pixels, int width, int height,
                const std::string& path) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimensionMismatch, "pixel buffer does not match image size");
  }
  WriteFileAtomic(path, EncodePng16(pixels, width, height));
}

void WriteGrayPng16(const GrayImage& img, const std::string& path) {
  WritePng16(QuantizeGray(img), img.width, img.height, path);
}

void WriteDisparityPng(const DisparityMap& disp, const std::string& path) {
  std::vector<std::uint16_t> px(disp.size(), 0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!disp.valid[i]) continue;
    const double v = std::clamp(disp.values[i] * 256.0, 0.0, 65535.0);
    px[i] = static_cast<std::uint16_t>(std::lround(v));
  }
  WritePng16(px, disp.width, disp.height, path);
}

void WriteGray(const GrayImage& img, const std::string& path) {
  const std::string ext = Extension(path);
  if (ext == ".pfm") {
    WritePfm(img, path);
  } else if (ext == ".png") {
    WriteGrayPng16(img, path);
  } else if (ext == ".pgm") {
    WriteFileAtomic(path, EncodePgm16(img));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unsupported output extension: " + path);
  }
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename into " + path + ": " + ec.message());
}

}  // namespace stereotrap
