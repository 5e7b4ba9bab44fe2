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
// Deterministic synthetic face corpus. Every identity is a shared face
// template plus identity-specific Gaussian features; each image adds pose
// jitter, illumination changes, expression and sensor noise.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "peep/error.hpp"
#include "peep/image.hpp"
#include "peep/rng.hpp"

namespace peep {

struct SynthSpec {
  std::size_t classes = 10;
  std::size_t per_class = 20;
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t channels = 1;
  std::uint64_t seed = 1;
  double pixel_noise = 0.03;
  double shift_pixels = 1.0;
};

namespace internal {

struct Blob {
  double x, y, sigma_x, sigma_y, amplitude;

  double At(double px, double py) const {
    const double dx = (px - x) / sigma_x;
    const double dy = (py - y) / sigma_y;
    return amplitude * std::exp(-0.5 * (dx * dx + dy * dy));
  }
};

struct Identity {
  std::vector<Blob> features;
  double face_width = 0.36;
  double face_height = 0.44;
  double eye_spacing = 0.15;
  double eye_height = 0.40;
  double skin = 0.60;
  double tint[3] = {1.0, 1.0, 1.0};
};

inline double UniformIn(Rng& rng, double lo, double hi) { return lo + (hi - lo) * UniformUnit(rng); }

inline Identity MakeIdentity(Rng& rng) {
  Identity id;
  id.face_width = UniformIn(rng, 0.30, 0.42);
  id.face_height = UniformIn(rng, 0.38, 0.48);
  id.eye_spacing = UniformIn(rng, 0.11, 0.19);
  id.eye_height = UniformIn(rng, 0.34, 0.46);
  id.skin = UniformIn(rng, 0.45, 0.75);
  for (double& t : id.tint) t = UniformIn(rng, 0.8, 1.2);
  for (int k = 0; k < 7; ++k) {
    id.features.push_back({UniformIn(rng, 0.25, 0.75), UniformIn(rng, 0.2, 0.85),
                           UniformIn(rng, 0.04, 0.12), UniformIn(rng, 0.04, 0.12),
                           UniformIn(rng, -0.3, 0.3)});
  }
  return id;
}

}  // namespace internal

struct SynthCorpus {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

inline SynthCorpus GenerateSyntheticFaces(const SynthSpec& spec) {
  Require(spec.classes >= 1 && spec.per_class >= 1 && spec.width >= 4 && spec.height >= 4,
          ErrorCode::kInvalidArgument, "synthetic corpus is too small");
  Require(spec.channels == 1 || spec.channels == 3, ErrorCode::kInvalidArgument,
          "channels must be 1 or 3");
  SynthCorpus corpus;
  const double w = static_cast<double>(spec.width);
  const double h = static_cast<double>(spec.height);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    Rng id_rng = DeriveStream(spec.seed, k);
    const internal::Identity id = internal::MakeIdentity(id_rng);
    std::ostringstream name;
    name << "person_" << std::setw(3) << std::setfill('0') << k;
    corpus.class_names.push_back(name.str());

    for (std::size_t i = 0; i < spec.per_class; ++i) {
      Rng rng = DeriveStream(spec.seed, (k + 1) * 1000003ULL + i);
      const double shift_x = spec.shift_pixels * (2.0 * UniformUnit(rng) - 1.0) / w;
      const double shift_y = spec.shift_pixels * (2.0 * UniformUnit(rng) - 1.0) / h;
      const double brightness = 0.06 * Gaussian(rng);
      const double gradient = 0.10 * Gaussian(rng);
      const double smile = 0.08 * Gaussian(rng);
      const double blink = 0.5 + 0.5 * UniformUnit(rng);

      const internal::Blob eyes[2] = {
          {0.5 - id.eye_spacing, id.eye_height, 0.045, 0.03, -0.35 * blink},
          {0.5 + id.eye_spacing, id.eye_height, 0.045, 0.03, -0.35 * blink}};
      const internal::Blob mouth{0.5, 0.72, 0.11, 0.03 + 0.02 * std::abs(smile), -0.25 - smile};
      const internal::Blob nose{0.5, 0.56, 0.03, 0.07, 0.12};

      Image img(spec.width, spec.height, spec.channels);
      for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
          const double px = (static_cast<double>(x) + 0.5) / w - shift_x;
          const double py = (static_cast<double>(y) + 0.5) / h - shift_y;
          const double ex = (px - 0.5) / id.face_width;
          const double ey = (py - 0.52) / id.face_height;
          // Soft-edged ellipse.
          const double inside = 1.0 / (1.0 + std::exp((std::sqrt(ex * ex + ey * ey) - 1.0) * 12.0));
          double value = 0.15 + inside * (id.skin - 0.15);
          value += inside * (eyes[0].At(px, py) + eyes[1].At(px, py) + mouth.At(px, py) + nose.At(px, py));
          for (const auto& f : id.features) value += inside * f.At(px, py);
          value += brightness + gradient * (px - 0.5);
          for (std::size_t c = 0; c < spec.channels; ++c) {
            const double tinted = spec.channels == 3 ? value * id.tint[c] : value;
            img.at(x, y, c) = std::clamp(tinted + spec.pixel_noise * Gaussian(rng), 0.0, 1.0);
          }
        }
      }
      corpus.images.push_back(std::move(img));
      corpus.labels.push_back(static_cast<int>(k));
    }
  }
  return corpus;
}

/// Writes root/<class>/<NNN>.pgm (or .ppm) in the directory-per-class layout.
inline void WriteSyntheticCorpus(const std::filesystem::path& root, const SynthSpec& spec) {
  namespace fs = std::filesystem;
  const SynthCorpus corpus = GenerateSyntheticFaces(spec);
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    const fs::path dir = root / corpus.class_names[static_cast<std::size_t>(corpus.labels[i])];
    fs::create_directories(dir);
    std::ostringstream file;
    file << std::setw(3) << std::setfill('0') << (i % spec.per_class)
         << (spec.channels == 1 ? ".pgm" : ".ppm");
    SaveImage(corpus.images[i], dir / file.str());
  }
}

}  // namespace peep
