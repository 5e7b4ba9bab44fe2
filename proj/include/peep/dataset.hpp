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
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "peep/error.hpp"
#include "peep/image.hpp"

namespace peep {

struct PipelineConfig {
  std::size_t width = 47;   // irw
  std::size_t height = 62;  // irh
  std::size_t nc = 128;
  std::size_t imthresh = 1;
  double epsilon = 8.0;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;

  void Validate() const {
    Require(width >= 1 && height >= 1, ErrorCode::kInvalidArgument, "width/height must be >= 1");
    Require(nc >= 1, ErrorCode::kInvalidArgument, "nc must be >= 1");
    Require(imthresh >= 1, ErrorCode::kInvalidArgument, "imthresh must be >= 1");
    Require(epsilon > 0.0, ErrorCode::kInvalidArgument, "epsilon must be > 0");
    Require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::kInvalidArgument,
            "train_fraction must lie in (0,1)");
  }

  /// The conventional acceptable privacy range is 0 < epsilon <= 9.
  bool EpsilonInRecommendedRange() const { return epsilon > 0.0 && epsilon <= 9.0; }
};

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::size_t> per_class_counts;
  ImageShape shape;

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  /// One flattened image per row.
  Eigen::MatrixXd SampleMatrix(const std::vector<std::size_t>& indices) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()),
                        static_cast<Eigen::Index>(shape.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
      out.row(static_cast<Eigen::Index>(r)) = Flatten(images.at(indices[r])).transpose();
    }
    return out;
  }

  Eigen::MatrixXd SampleMatrix() const {
    std::vector<std::size_t> all(images.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return SampleMatrix(all);
  }
};

/// Raises the target resolution to the corpus minimum when the requested
/// size falls below it (both axes are replaced together).
inline std::pair<std::size_t, std::size_t> ApplyResolutionGuard(std::size_t width,
                                                                std::size_t height,
                                                                std::size_t min_width,
                                                                std::size_t min_height) {
  if (width < min_width || height < min_height) return {min_width, min_height};
  return {width, height};
}

struct ComponentClamp {
  std::size_t requested = 0;
  std::size_t after_resolution_guard = 0;
  std::size_t effective = 0;
};

/// nc is capped at min(width, height) whenever it exceeds either side, and is
/// then bounded by min(samples, dimension), the rank limit of the data.
inline ComponentClamp ClampComponents(std::size_t nc, std::size_t width, std::size_t height,
                                      std::size_t samples, std::size_t dimension) {
  ComponentClamp out;
  out.requested = nc;
  if (nc > width || nc > height) nc = std::min(width, height);
  out.after_resolution_guard = nc;
  out.effective = std::max<std::size_t>(1, std::min({nc, samples, dimension}));
  return out;
}

inline bool IsImageFile(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// Loads root/<class>/<image> into a dataset. Classes with fewer than
/// imthresh images are dropped; survivors are ordered lexicographically.
/// The returned dataset's shape reflects the resolution guard.
inline LabeledDataset BuildDataset(const std::filesystem::path& root, const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.Validate();
  Require(fs::is_directory(root), ErrorCode::kIo, "dataset root is not a directory: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().front() != '.') {
      class_dirs.push_back(entry.path());
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  struct ClassFiles {
    std::string name;
    std::vector<fs::path> files;
  };
  std::vector<ClassFiles> kept;
  for (const auto& dir : class_dirs) {
    ClassFiles cls{dir.filename().string(), {}};
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && IsImageFile(entry.path())) cls.files.push_back(entry.path());
    }
    std::sort(cls.files.begin(), cls.files.end());
    if (!cls.files.empty() && cls.files.size() >= cfg.imthresh) kept.push_back(std::move(cls));
  }
  if (kept.empty()) {
    Fail(ErrorCode::kEmptyDataset, "no class has at least " + std::to_string(cfg.imthresh) +
                                       " images under " + root.string());
  }

  LabeledDataset ds;
  std::vector<Image> raw;
  std::size_t min_w = SIZE_MAX, min_h = SIZE_MAX, channels = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    ds.class_names.push_back(kept[k].name);
    ds.per_class_counts.push_back(kept[k].files.size());
    for (const auto& file : kept[k].files) {
      Image img = LoadImage(file);
      if (channels == 0) channels = img.channels;
      Require(img.channels == channels, ErrorCode::kCorruptFile,
              "mixed gray and color images in one dataset: " + file.string());
      min_w = std::min(min_w, img.width);
      min_h = std::min(min_h, img.height);
      raw.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(k));
    }
  }

  const auto [w, h] = ApplyResolutionGuard(cfg.width, cfg.height, min_w, min_h);
  ds.shape = {w, h, channels};
  ds.images.reserve(raw.size());
  for (const Image& img : raw) ds.images.push_back(ResizeBilinear(img, w, h));
  return ds;
}

}  // namespace peep
