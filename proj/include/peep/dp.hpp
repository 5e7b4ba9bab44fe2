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
// Local differential privacy for eigenface coefficient vectors: per-index
// min-max scaling into [0,1] followed by independent Laplace noise on every
// index, with sensitivity 1 and scale 1/epsilon.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "peep/error.hpp"
#include "peep/rng.hpp"

namespace peep {

struct PrivacyParams {
  double epsilon = 1.0;
  double sensitivity = 1.0;

  static PrivacyParams WithEpsilon(double epsilon) {
    Require(epsilon > 0.0 && std::isfinite(epsilon), ErrorCode::kInvalidArgument,
            "epsilon must be a positive finite number");
    return {epsilon, 1.0};
  }

  double NoiseScale() const { return sensitivity / epsilon; }
};

/// What a release of nc perturbed indices costs. Each index gets the full
/// epsilon, so sequential composition over the vector gives nc * epsilon.
struct PrivacyReport {
  double per_index_epsilon = 0.0;
  double composed_epsilon = 0.0;
  double per_index_sensitivity = 1.0;
  double l2_sensitivity_bound = 0.0;  // sqrt(nc) for vectors in [0,1]^nc
  std::size_t nc = 0;
};

inline PrivacyReport MakePrivacyReport(const PrivacyParams& params, std::size_t nc) {
  return {params.epsilon, params.epsilon * static_cast<double>(nc), params.sensitivity,
          std::sqrt(static_cast<double>(nc)), nc};
}

/// Per-index extremes of the training coefficients.
struct Scaler {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  std::size_t size() const { return static_cast<std::size_t>(min.size()); }
};

inline Scaler FitScaler(const Eigen::MatrixXd& train_coeffs) {
  Require(train_coeffs.rows() >= 1, ErrorCode::kEmptyInput, "no training vectors");
  return {train_coeffs.colwise().minCoeff().transpose(),
          train_coeffs.colwise().maxCoeff().transpose()};
}

inline Scaler FitScaler(const std::vector<Eigen::VectorXd>& train_coeffs) {
  Require(!train_coeffs.empty(), ErrorCode::kEmptyInput, "no training vectors");
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(train_coeffs.size()), train_coeffs.front().size());
  for (std::size_t i = 0; i < train_coeffs.size(); ++i) {
    Require(train_coeffs[i].size() == stacked.cols(), ErrorCode::kDimensionMismatch,
            "training vectors differ in length");
    stacked.row(static_cast<Eigen::Index>(i)) = train_coeffs[i].transpose();
  }
  return FitScaler(stacked);
}

/// Maps index j to (v_j - min_j) / (max_j - min_j), clamped to [0,1]. A
/// constant index maps to 0.
inline Eigen::VectorXd Scale(const Scaler& scaler, const Eigen::VectorXd& v) {
  Require(v.size() == scaler.min.size(), ErrorCode::kDimensionMismatch,
          "vector length does not match scaler");
  Eigen::VectorXd out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double range = scaler.max(j) - scaler.min(j);
    out(j) = range > 0.0 ? std::clamp((v(j) - scaler.min(j)) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

/// Inverse of Scale on the unclamped range.
inline Eigen::VectorXd Unscale(const Scaler& scaler, const Eigen::VectorXd& s) {
  Require(s.size() == scaler.min.size(), ErrorCode::kDimensionMismatch,
          "vector length does not match scaler");
  return scaler.min.array() + s.array() * (scaler.max - scaler.min).array();
}

/// Inverse-CDF Laplace transform of u in (-1/2, 1/2).
inline double LaplaceFromUniform(double u, double location, double scale) {
  const double sign = (u > 0.0) - (u < 0.0);
  return location - scale * sign * std::log1p(-2.0 * std::abs(u));
}

inline double LaplaceSample(Rng& rng, double location, double scale) {
  Require(scale > 0.0, ErrorCode::kInvalidArgument, "Laplace scale must be > 0");
  double u;
  do {
    u = UniformUnit(rng) - 0.5;
  } while (u == -0.5);
  return LaplaceFromUniform(u, location, scale);
}

/// Adds Laplace(0, sensitivity/epsilon) noise to every index. Outputs are
/// left unclamped so the noise stays unbiased.
inline Eigen::VectorXd Perturb(const Eigen::VectorXd& scaled, const PrivacyParams& params,
                               Rng& rng) {
  Require(params.epsilon > 0.0 && params.sensitivity > 0.0, ErrorCode::kInvalidArgument,
          "invalid privacy parameters");
  const double noise_scale = params.NoiseScale();
  Eigen::VectorXd out(scaled.size());
  for (Eigen::Index j = 0; j < scaled.size(); ++j) {
    Require(scaled(j) >= 0.0 && scaled(j) <= 1.0, ErrorCode::kInvalidArgument,
            "perturbation input must be scaled into [0,1]");
    out(j) = LaplaceSample(rng, scaled(j), noise_scale);
  }
  return out;
}

}  // namespace peep
