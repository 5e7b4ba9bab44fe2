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
// Eigenface reconstruction attack. An adversary holding the eigen basis
// rebuilds a face from a (possibly perturbed) representation; the RMSE to
// the original image measures how much the representation still leaks.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "peep/dp.hpp"
#include "peep/eigenfaces.hpp"
#include "peep/error.hpp"
#include "peep/image.hpp"
#include "peep/rng.hpp"

namespace peep {

struct ReconstructionResult {
  Image image;  // clamped to [0,1]
  double rmse = 0.0;
  std::optional<double> epsilon;  // empty for the no-privacy baseline
};

/// mean_face + sum_i coefficients_i * eigenface_i, without clamping.
inline Eigen::VectorXd ReconstructUnclamped(const EigenModel& model,
                                            const Eigen::VectorXd& coefficients) {
  Require(static_cast<std::size_t>(coefficients.size()) == model.nc(),
          ErrorCode::kDimensionMismatch, "coefficient count does not match the eigen model");
  return model.mean_face + model.eigenfaces.transpose() * coefficients;
}

inline Image Reconstruct(const EigenModel& model, const Eigen::VectorXd& coefficients) {
  Image out = Unflatten(ReconstructUnclamped(model, coefficients), model.shape);
  ClampUnit(out);
  return out;
}

inline double Rmse(const Image& a, const Image& b) {
  Require(a.shape() == b.shape(), ErrorCode::kDimensionMismatch, "images differ in shape");
  Require(!a.pixels.empty(), ErrorCode::kEmptyInput, "empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double diff = a.pixels[i] - b.pixels[i];
    sum += diff * diff;
  }
  return std::sqrt(sum / static_cast<double>(a.pixels.size()));
}

/// Pixel-domain attack: the centered pixel vector gets per-element Laplace
/// noise (sensitivity 1, scale 1/epsilon; pixels are already bounded to
/// [0,1] so no rescaling), is projected onto every eigenface, and the face
/// is rebuilt with the mean added back.
inline ReconstructionResult AttackPipeline(const EigenModel& model, const Image& img,
                                           std::optional<double> epsilon, Rng& rng) {
  Require(img.shape() == model.shape, ErrorCode::kDimensionMismatch,
          "image shape does not match the attack model");
  Eigen::VectorXd centered = Flatten(img) - model.mean_face;
  if (epsilon) {
    const double scale = PrivacyParams::WithEpsilon(*epsilon).NoiseScale();
    for (Eigen::Index j = 0; j < centered.size(); ++j) {
      centered(j) = LaplaceSample(rng, centered(j), scale);
    }
  }
  const Eigen::VectorXd coefficients = model.eigenfaces * centered;
  ReconstructionResult out{Reconstruct(model, coefficients), 0.0, epsilon};
  out.rmse = Rmse(out.image, img);
  return out;
}

/// Attack on what the deployed pipeline actually emits: scaled eigenface
/// coefficients with Laplace noise. The adversary knows the scaler (it ships
/// with the model) and inverts it before reconstructing.
inline ReconstructionResult AttackDeployment(const EigenModel& model, const Scaler& scaler,
                                             const Image& img, std::optional<double> epsilon,
                                             Rng& rng) {
  Eigen::VectorXd released = Scale(scaler, Project(model, img));
  if (epsilon) released = Perturb(released, PrivacyParams::WithEpsilon(*epsilon), rng);
  ReconstructionResult out{Reconstruct(model, Unscale(scaler, released)), 0.0, epsilon};
  out.rmse = Rmse(out.image, img);
  return out;
}

/// Attack basis from a corpus augmented with the horizontal mirror of every
/// image.
inline EigenModel FitAttackModel(const std::vector<Image>& images, std::size_t nc) {
  Require(!images.empty(), ErrorCode::kTooFewImages, "no images for the attack basis");
  const ImageShape shape = images.front().shape();
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(2 * images.size()),
                          static_cast<Eigen::Index>(shape.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    Require(images[i].shape() == shape, ErrorCode::kDimensionMismatch, "attack corpus shapes differ");
    samples.row(static_cast<Eigen::Index>(2 * i)) = Flatten(images[i]).transpose();
    samples.row(static_cast<Eigen::Index>(2 * i + 1)) = Flatten(FlipHorizontal(images[i])).transpose();
  }
  return FitEigenfaces(samples, nc, shape);
}

}  // namespace peep
