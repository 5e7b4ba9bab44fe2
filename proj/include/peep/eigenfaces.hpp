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
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "peep/dataset.hpp"
#include "peep/error.hpp"
#include "peep/image.hpp"
#include "peep/linalg.hpp"

namespace peep {

/// Mean face plus the top-nc unit-norm eigenfaces of the face covariance.
/// Eigenvalues follow the population (1/n) covariance convention.
struct EigenModel {
  ImageShape shape;
  Eigen::VectorXd mean_face;    // length d
  Eigen::MatrixXd eigenfaces;   // nc x d, one eigenface per row
  Eigen::VectorXd eigenvalues;  // length nc, non-increasing, >= 0
  // Components [rank, nc) had zero variance and hold deterministic
  // orthonormal completions instead of data-driven directions.
  std::size_t rank = 0;

  std::size_t dimension() const { return static_cast<std::size_t>(mean_face.size()); }
  std::size_t nc() const { return static_cast<std::size_t>(eigenfaces.rows()); }
  bool degenerate() const { return rank < nc(); }
};

// Relative threshold below which a covariance eigenvalue counts as zero.
inline constexpr double kRankTolerance = 1e-10;
// Absolute floor, in units of the squared data magnitude, that absorbs the
// roundoff left by centering (near-)identical samples.
inline constexpr double kRankFloor = 1e-24;

namespace internal {

// Fills rows [first, nc) of basis with unit vectors orthogonal to all earlier
// rows, drawn from the standard basis in index order.
inline void CompleteBasis(Eigen::MatrixXd& basis, Eigen::Index first) {
  const Eigen::Index d = basis.cols();
  Eigen::Index candidate = 0;
  for (Eigen::Index row = first; row < basis.rows(); ++row) {
    bool placed = false;
    while (!placed && candidate < d) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(d, candidate++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < row; ++k) {
          v -= basis.row(k).dot(v) * basis.row(k).transpose();
        }
      }
      const double norm = v.norm();
      if (norm > 1e-3) {
        v /= norm;
        CanonicalizeSign(v);
        basis.row(row) = v.transpose();
        placed = true;
      }
    }
    Require(placed, ErrorCode::kInvalidArgument, "cannot complete basis beyond dimension");
  }
}

inline std::size_t CountRank(const Eigen::VectorXd& values, std::size_t limit,
                             double magnitude) {
  const double top = values.size() > 0 ? values(0) : 0.0;
  const double threshold =
      std::max(kRankTolerance * top, kRankFloor * std::max(1.0, magnitude * magnitude));
  if (!(top > threshold)) return 0;
  std::size_t rank = 0;
  while (rank < limit && values(static_cast<Eigen::Index>(rank)) > threshold) ++rank;
  return rank;
}

}  // namespace internal

/// Batch eigenfaces from one flattened sample per row. The d x d covariance
/// is never formed: eigenvectors u of the n x n Gram matrix A^T A map to
/// eigenfaces A u / |A u|.
inline EigenModel FitEigenfaces(const Eigen::MatrixXd& samples, std::size_t nc,
                                const ImageShape& shape) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  Require(n >= 2, ErrorCode::kTooFewImages, "need at least two images");
  Require(static_cast<std::size_t>(d) == shape.size(), ErrorCode::kDimensionMismatch,
          "sample length does not match image shape");
  Require(nc >= 1, ErrorCode::kInvalidArgument, "nc must be >= 1");
  nc = std::min<std::size_t>({nc, static_cast<std::size_t>(n), static_cast<std::size_t>(d)});

  EigenModel model;
  model.shape = shape;
  model.mean_face = samples.colwise().mean().transpose();
  // Centered samples as columns: A is d x n.
  const Eigen::MatrixXd centered = (samples.rowwise() - model.mean_face.transpose()).transpose();
  const Eigen::MatrixXd gram = centered.transpose() * centered;
  const SymmetricEigen eig = SymmetricEig(gram);

  const Eigen::VectorXd covariance_values =
      (eig.values / static_cast<double>(n)).cwiseMax(0.0);
  model.rank = internal::CountRank(covariance_values, nc, samples.cwiseAbs().maxCoeff());
  model.eigenfaces.resize(static_cast<Eigen::Index>(nc), d);
  model.eigenvalues = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nc));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(model.rank); ++k) {
    Eigen::VectorXd face = centered * eig.vectors.col(k);
    face /= face.norm();
    CanonicalizeSign(face);
    model.eigenfaces.row(k) = face.transpose();
    model.eigenvalues(k) = covariance_values(k);
  }
  internal::CompleteBasis(model.eigenfaces, static_cast<Eigen::Index>(model.rank));
  return model;
}

inline EigenModel FitEigenfaces(const LabeledDataset& dataset, std::size_t nc) {
  return FitEigenfaces(dataset.SampleMatrix(), nc, dataset.shape);
}

/// Eigenfaces from an explicit d x d covariance (1/n convention), as used by
/// the partition-merging path. Selection, sign and completion rules are the
/// same as for the Gram route.
inline EigenModel EigenModelFromCovariance(const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& covariance, std::size_t nc,
                                           const ImageShape& shape) {
  const Eigen::Index d = mean.size();
  Require(covariance.rows() == d && covariance.cols() == d, ErrorCode::kDimensionMismatch,
          "covariance shape does not match mean");
  Require(static_cast<std::size_t>(d) == shape.size(), ErrorCode::kDimensionMismatch,
          "mean length does not match image shape");
  nc = std::min<std::size_t>(nc, static_cast<std::size_t>(d));
  const SymmetricEigen eig = SymmetricEig(covariance);
  const Eigen::VectorXd values = eig.values.cwiseMax(0.0);

  EigenModel model;
  model.shape = shape;
  model.mean_face = mean;
  model.rank = internal::CountRank(values, nc, mean.size() > 0 ? mean.cwiseAbs().maxCoeff() : 0.0);
  model.eigenfaces.resize(static_cast<Eigen::Index>(nc), d);
  model.eigenvalues = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nc));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(model.rank); ++k) {
    model.eigenfaces.row(k) = eig.vectors.col(k).transpose();
    model.eigenvalues(k) = values(k);
  }
  internal::CompleteBasis(model.eigenfaces, static_cast<Eigen::Index>(model.rank));
  return model;
}

/// Coefficients of (x - mean) on each eigenface.
inline Eigen::VectorXd Project(const EigenModel& model, const Eigen::VectorXd& flat) {
  Require(static_cast<std::size_t>(flat.size()) == model.dimension(),
          ErrorCode::kDimensionMismatch, "image dimension does not match the eigen model");
  return model.eigenfaces * (flat - model.mean_face);
}

inline Eigen::VectorXd Project(const EigenModel& model, const Image& img) {
  Require(img.shape() == model.shape, ErrorCode::kDimensionMismatch,
          "image shape does not match the eigen model");
  return Project(model, Flatten(img));
}

}  // namespace peep
