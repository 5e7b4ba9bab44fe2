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
// Mergeable (count, mean, co-moment) statistics for computing eigenfaces
// over partitioned data. A partition's statistics can be produced on a
// separate node and folded into the global estimate at a coordinator.
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "peep/eigenfaces.hpp"
#include "peep/error.hpp"
#include "peep/image.hpp"

namespace peep {

// Largest dimension for which a full d x d co-moment is materialized.
inline constexpr std::size_t kDefaultComomentCap = 16384;

struct PartitionStats {
  std::size_t count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd comoment;  // sum over samples of (x - mean)(x - mean)^T

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }

  /// Unbiased (m - 1) covariance; zero for a single sample.
  Eigen::MatrixXd SampleCovariance() const {
    if (count < 2) return Eigen::MatrixXd::Zero(comoment.rows(), comoment.cols());
    return comoment / static_cast<double>(count - 1);
  }

  /// Population (1/m) covariance, the convention used by EigenModel.
  Eigen::MatrixXd PopulationCovariance() const {
    return comoment / static_cast<double>(count);
  }
};

enum class MergeRule {
  // C = C_a + C_b + (mu_a - mu_b)(mu_a - mu_b)^T * m_a m_b / (m_a + m_b).
  kComoment,
  // The variant that rescales each co-moment by its own (m - 1) before
  // adding the cross term. It disagrees with the pooled data whenever the
  // partition sizes differ; kept only for comparison.
  kRescaledPartitions,
};

/// Two-pass mean and co-moment of one sample per row.
inline PartitionStats ComputePartitionStats(const Eigen::MatrixXd& samples,
                                            std::size_t comoment_cap = kDefaultComomentCap) {
  Require(samples.rows() >= 1, ErrorCode::kEmptyPartition, "partition has no samples");
  Require(static_cast<std::size_t>(samples.cols()) <= comoment_cap, ErrorCode::kInvalidArgument,
          "dimension exceeds the co-moment cap; use the batch Gram path");
  PartitionStats out;
  out.count = static_cast<std::size_t>(samples.rows());
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  out.comoment = centered.transpose() * centered;
  return out;
}

/// Count-weighted mean of partition means.
inline Eigen::VectorXd MergeMeans(const std::vector<std::pair<std::size_t, Eigen::VectorXd>>& parts) {
  Require(!parts.empty(), ErrorCode::kEmptyPartition, "no partitions to merge");
  const Eigen::Index d = parts.front().second.size();
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(d);
  double total = 0.0;
  for (const auto& [count, mean] : parts) {
    Require(mean.size() == d, ErrorCode::kDimensionMismatch, "partition means differ in length");
    Require(count >= 1, ErrorCode::kEmptyPartition, "partition count must be >= 1");
    weighted += static_cast<double>(count) * mean;
    total += static_cast<double>(count);
  }
  return weighted / total;
}

inline PartitionStats MergeStats(const PartitionStats& a, const PartitionStats& b,
                                 MergeRule rule = MergeRule::kComoment) {
  Require(a.dimension() == b.dimension(), ErrorCode::kDimensionMismatch,
          "partitions have different dimensions");
  Require(a.count >= 1 && b.count >= 1, ErrorCode::kEmptyPartition, "cannot merge empty stats");
  const double ma = static_cast<double>(a.count);
  const double mb = static_cast<double>(b.count);
  const double mx = ma + mb;

  PartitionStats out;
  out.count = a.count + b.count;
  out.mean = MergeMeans({{a.count, a.mean}, {b.count, b.mean}});
  const Eigen::VectorXd gap = a.mean - b.mean;
  const Eigen::MatrixXd cross = gap * gap.transpose() * (ma * mb / mx);

  if (rule == MergeRule::kComoment) {
    out.comoment = a.comoment + b.comoment + cross;
  } else {
    // A single-sample partition has no (m - 1) covariance; its term is zero.
    const Eigen::MatrixXd cov_a = a.count > 1 ? Eigen::MatrixXd(a.comoment / (ma - 1.0))
                                              : Eigen::MatrixXd::Zero(a.comoment.rows(), a.comoment.cols());
    const Eigen::MatrixXd cov_b = b.count > 1 ? Eigen::MatrixXd(b.comoment / (mb - 1.0))
                                              : Eigen::MatrixXd::Zero(b.comoment.rows(), b.comoment.cols());
    // Stored so that SampleCovariance() reproduces the literal expression.
    out.comoment = cov_a + cov_b + cross;
  }
  return out;
}

/// Left fold over partitions in index order.
inline PartitionStats FoldStats(const std::vector<PartitionStats>& parts,
                                MergeRule rule = MergeRule::kComoment) {
  Require(!parts.empty(), ErrorCode::kEmptyPartition, "no partitions to merge");
  PartitionStats acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = MergeStats(acc, parts[i], rule);
  return acc;
}

inline EigenModel FitEigenfacesFromStats(const PartitionStats& global, std::size_t nc,
                                         const ImageShape& shape) {
  Require(global.count >= 2, ErrorCode::kTooFewImages, "need at least two images");
  nc = std::min(nc, global.count);
  return EigenModelFromCovariance(global.mean, global.PopulationCovariance(), nc, shape);
}

/// Eigenfaces from partitioned samples (one sample per row in each block).
inline EigenModel FitEigenfacesIncremental(const std::vector<Eigen::MatrixXd>& partitions,
                                           std::size_t nc, const ImageShape& shape,
                                           std::size_t comoment_cap = kDefaultComomentCap) {
  Require(!partitions.empty(), ErrorCode::kEmptyPartition, "no partitions");
  std::vector<PartitionStats> stats;
  stats.reserve(partitions.size());
  for (const auto& block : partitions) stats.push_back(ComputePartitionStats(block, comoment_cap));
  return FitEigenfacesFromStats(FoldStats(stats), nc, shape);
}

}  // namespace peep
