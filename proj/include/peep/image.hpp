//
// Copyright 2026 The PEEP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Raster images normalized to [0,1], binary/ASCII PNM reading and writing,
// and corner-aligned bilinear resampling.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peep/error.hpp"

namespace peep {

struct ImageShape {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;

  std::size_t size() const { return width * height * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Pixel grid with values in [0,1], stored row-major and channel-interleaved:
/// index = (y * width + x) * channels + c.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  ImageShape shape() const { return {width, height, channels}; }

  double& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  double at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
};

inline Eigen::VectorXd Flatten(const Image& img) {
  return Eigen::Map<const Eigen::VectorXd>(img.pixels.data(),
                                           static_cast<Eigen::Index>(img.pixels.size()));
}

inline Image Unflatten(const Eigen::VectorXd& v, const ImageShape& shape) {
  Require(static_cast<std::size_t>(v.size()) == shape.size(), ErrorCode::kDimensionMismatch,
          "vector length does not match image shape");
  Image img(shape.width, shape.height, shape.channels);
  std::copy(v.data(), v.data() + v.size(), img.pixels.begin());
  return img;
}

inline void ClampUnit(Image& img) {
  for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
}

namespace internal {

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::string& data, std::size_t pos) : data_(data), pos_(pos) {}

  // Reads one unsigned decimal token, skipping whitespace and '#' comments.
  long long NextInt() {
    SkipSeparators();
    if (pos_ >= data_.size() || !std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      Fail(ErrorCode::kCorruptFile, "malformed PNM header");
    }
    long long value = 0;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      value = value * 10 + (data_[pos_] - '0');
      if (value > (1LL << 40)) Fail(ErrorCode::kCorruptFile, "PNM header value too large");
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void Advance() { ++pos_; }

  void SkipSeparators() {
    while (pos_ < data_.size()) {
      const char ch = data_[pos_];
      if (ch == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

 private:
  const std::string& data_;
  std::size_t pos_;
};

}  // namespace internal

/// Decodes an in-memory PNM file (P2, P3, P5 or P6).
inline Image DecodePnm(const std::string& data) {
  if (data.size() < 2 || data[0] != 'P' ||
      (data[1] != '2' && data[1] != '3' && data[1] != '5' && data[1] != '6')) {
    Fail(ErrorCode::kUnsupportedFormat, "not a P2/P3/P5/P6 file");
  }
  const bool binary = data[1] == '5' || data[1] == '6';
  const std::size_t channels = (data[1] == '3' || data[1] == '6') ? 3 : 1;

  internal::PnmHeaderReader reader(data, 2);
  const long long width = reader.NextInt();
  const long long height = reader.NextInt();
  const long long maxval = reader.NextInt();
  if (width <= 0 || height <= 0) Fail(ErrorCode::kCorruptFile, "non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) Fail(ErrorCode::kCorruptFile, "maxval out of range");

  Image img(static_cast<std::size_t>(width), static_cast<std::size_t>(height), channels);
  const std::size_t count = img.pixels.size();
  const double scale = static_cast<double>(maxval);

  if (binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t pos = reader.pos();
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
      Fail(ErrorCode::kCorruptFile, "missing raster separator");
    }
    ++pos;
    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    if (data.size() - pos < count * bytes_per_sample) {
      Fail(ErrorCode::kCorruptFile, "truncated raster");
    }
    for (std::size_t i = 0; i < count; ++i) {
      unsigned value = static_cast<unsigned char>(data[pos + i * bytes_per_sample]);
      if (bytes_per_sample == 2) {
        value = (value << 8) | static_cast<unsigned char>(data[pos + i * 2 + 1]);
      }
      if (value > maxval) Fail(ErrorCode::kCorruptFile, "sample exceeds maxval");
      img.pixels[i] = value / scale;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      reader.SkipSeparators();
      if (reader.pos() >= data.size()) Fail(ErrorCode::kCorruptFile, "truncated raster");
      const long long value = reader.NextInt();
      if (value > maxval) Fail(ErrorCode::kCorruptFile, "sample exceeds maxval");
      img.pixels[i] = static_cast<double>(value) / scale;
    }
  }
  return img;
}

inline std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Image LoadImage(const std::filesystem::path& path) {
  return DecodePnm(ReadFileBytes(path));
}

/// Encodes as binary P5 (gray) or P6 (RGB) with maxval 255.
inline std::string EncodePnm(const Image& img) {
  Require(img.channels == 1 || img.channels == 3, ErrorCode::kInvalidArgument,
          "only 1- or 3-channel images can be written");
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double p : img.pixels) {
    out.push_back(static_cast<char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
  }
  return out;
}

inline void SaveImage(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  const std::string bytes = EncodePnm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Bilinear resampling on a corner-aligned grid: output column x samples
/// source coordinate x * (w_in - 1) / (w_out - 1); a single output column
/// samples the source centre.
inline Image ResizeBilinear(const Image& img, std::size_t width, std::size_t height) {
  Require(width >= 1 && height >= 1, ErrorCode::kInvalidArgument, "target size must be >= 1");
  Require(img.width >= 1 && img.height >= 1, ErrorCode::kInvalidArgument, "empty source image");
  if (width == img.width && height == img.height) return img;

  auto source_coord = [](std::size_t out, std::size_t n_out, std::size_t n_in) {
    if (n_out == 1) return (static_cast<double>(n_in) - 1.0) / 2.0;
    return static_cast<double>(out) * static_cast<double>(n_in - 1) /
           static_cast<double>(n_out - 1);
  };

  Image out(width, height, img.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const double sy = source_coord(y, height, img.height);
    const auto y0 = std::min(static_cast<std::size_t>(sy), img.height - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double ty = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = source_coord(x, width, img.width);
      const auto x0 = std::min(static_cast<std::size_t>(sx), img.width - 1);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double tx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(x0, y0, c) + tx * (img.at(x1, y0, c) - img.at(x0, y0, c));
        const double bottom = img.at(x0, y1, c) + tx * (img.at(x1, y1, c) - img.at(x0, y1, c));
        out.at(x, y, c) = std::clamp(top + ty * (bottom - top), 0.0, 1.0);
      }
    }
  }
  return out;
}

inline Image FlipHorizontal(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
      }
    }
  }
  return out;
}

}  // namespace peep
