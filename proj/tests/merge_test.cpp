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
#include "peep/merge.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace peep {
namespace {

Eigen::MatrixXd Column(std::initializer_list<double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

double RelativeError(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

// Textbook two-pass sample covariance, written independently of the library.
Eigen::MatrixXd TwoPassSampleCovariance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += x.row(i).transpose();
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd c = x.row(i).transpose() - mean;
    cov += c * c.transpose();
  }
  return cov / static_cast<double>(n - 1);
}

std::vector<Eigen::MatrixXd> SplitRows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& sizes) {
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index start = 0;
  for (Eigen::Index s : sizes) {
    parts.push_back(x.middleRows(start, s));
    start += s;
  }
  return parts;
}

TEST(PartitionStatsTest, SingleVector) {
  const Eigen::MatrixXd x = testing::RandomMatrix(1, 3, 1);
  const PartitionStats s = ComputePartitionStats(x);
  EXPECT_EQ(s.count, 1u);
  EXPECT_EQ(s.mean, Eigen::VectorXd(x.row(0).transpose()));
  EXPECT_EQ(s.comoment, Eigen::MatrixXd::Zero(3, 3));
}

TEST(PartitionStatsTest, TwoPointsByHand) {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 2, 2;
  const PartitionStats s = ComputePartitionStats(x);
  EXPECT_EQ(s.count, 2u);
  EXPECT_EQ(s.mean, Eigen::Vector2d(1, 1));
  Eigen::Matrix2d expected;
  expected << 2, 2, 2, 2;
  EXPECT_EQ(s.comoment, Eigen::MatrixXd(expected));
}

TEST(PartitionStatsTest, MatchesTwoPassCovariance) {
  const Eigen::MatrixXd x = testing::RandomMatrix(50, 7, 2, -3.0, 3.0);
  const PartitionStats s = ComputePartitionStats(x);
  EXPECT_LE((s.SampleCovariance() - TwoPassSampleCovariance(x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PartitionStatsTest, RejectsEmptyAndOversized) {
  try {
    ComputePartitionStats(Eigen::MatrixXd(0, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPartition);
  }
  EXPECT_THROW(ComputePartitionStats(testing::RandomMatrix(2, 10, 1), 8), Error);
}

TEST(MergeMeansTest, WeightedByCount) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd four = Eigen::VectorXd::Constant(1, 4.0);
  EXPECT_DOUBLE_EQ(MergeMeans({{2, zero}, {2, four}})(0), 2.0);
  EXPECT_DOUBLE_EQ(MergeMeans({{1, zero}, {3, four}})(0), 3.0);
  try {
    MergeMeans({{1, zero}, {1, Eigen::VectorXd::Zero(2)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(MergeMeansTest, FourPartsMatchBatchMean) {
  const Eigen::MatrixXd x = testing::RandomMatrix(100, 5, 3);
  std::vector<std::pair<std::size_t, Eigen::VectorXd>> parts;
  for (const auto& block : SplitRows(x, {10, 40, 25, 25})) {
    parts.emplace_back(static_cast<std::size_t>(block.rows()), block.colwise().mean().transpose());
  }
  const Eigen::VectorXd batch = x.colwise().mean().transpose();
  EXPECT_LE((MergeMeans(parts) - batch).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MergeStatsTest, SinglePointParts) {
  const Eigen::MatrixXd x = testing::RandomMatrix(2, 3, 4);
  const PartitionStats merged = MergeStats(ComputePartitionStats(x.topRows(1)),
                                           ComputePartitionStats(x.bottomRows(1)));
  const Eigen::VectorXd diff = (x.row(0) - x.row(1)).transpose();
  EXPECT_LE((merged.comoment - diff * diff.transpose() / 2.0).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((merged.SampleCovariance() - TwoPassSampleCovariance(x)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MergeStatsTest, EqualMeansHaveNoCrossTerm) {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 0, 2;
  b << -1, 3;
  const PartitionStats sa = ComputePartitionStats(a);
  const PartitionStats sb = ComputePartitionStats(b);
  EXPECT_EQ(MergeStats(sa, sb).comoment, sa.comoment + sb.comoment);
}

TEST(MergeStatsTest, UnequalPartitionsMatchBruteForce) {
  const PartitionStats a = ComputePartitionStats(Column({0, 1, 2}));
  const PartitionStats b = ComputePartitionStats(Column({4, 6}));
  const PartitionStats merged = MergeStats(a, b);
  EXPECT_EQ(merged.count, 5u);
  EXPECT_NEAR(merged.mean(0), 2.6, 1e-15);
  EXPECT_NEAR(merged.comoment(0, 0), 23.2, 1e-12);
  EXPECT_NEAR(merged.SampleCovariance()(0, 0), 5.8, 1e-12);
  EXPECT_NEAR(TwoPassSampleCovariance(Column({0, 1, 2, 4, 6}))(0, 0), 5.8, 1e-12);

  const PartitionStats literal = MergeStats(a, b, MergeRule::kRescaledPartitions);
  EXPECT_NEAR(literal.SampleCovariance()(0, 0), 5.55, 1e-12);
}

TEST(MergeStatsTest, RejectsDimensionMismatch) {
  try {
    MergeStats(ComputePartitionStats(testing::RandomMatrix(2, 2, 1)),
               ComputePartitionStats(testing::RandomMatrix(2, 3, 1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(MergeStatsTest, AssociativeAndPositiveSemidefinite) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd x = testing::RandomMatrix(30, 6, 100 + seed, -2.0, 5.0);
    const auto parts = SplitRows(x, {4, 11, 15});
    const PartitionStats a = ComputePartitionStats(parts[0]);
    const PartitionStats b = ComputePartitionStats(parts[1]);
    const PartitionStats c = ComputePartitionStats(parts[2]);
    const PartitionStats left = MergeStats(MergeStats(a, b), c);
    const PartitionStats right = MergeStats(a, MergeStats(b, c));
    EXPECT_LE(RelativeError(left.mean, right.mean), 1e-9);
    EXPECT_LE(RelativeError(left.comoment, right.comoment), 1e-9);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(left.comoment).eigenvalues().minCoeff();
    EXPECT_GE(min_eig, -1e-8 * left.comoment.trace());
  }
}

TEST(MergeStatsTest, RandomSplitsMatchBatch) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = testing::RandomMatrix(40, 5, 500 + static_cast<std::uint64_t>(trial));
    const Eigen::Index cut = 1 + static_cast<Eigen::Index>(UniformIndex(rng, 39));
    const PartitionStats merged =
        MergeStats(ComputePartitionStats(x.topRows(cut)), ComputePartitionStats(x.bottomRows(40 - cut)));
    const PartitionStats batch = ComputePartitionStats(x);
    EXPECT_LE(RelativeError(merged.mean, batch.mean), 1e-9);
    EXPECT_LE(RelativeError(merged.comoment, batch.comoment), 1e-9);
  }
}

TEST(IncrementalTest, SinglePartitionIsTheCovarianceRoute) {
  const Eigen::MatrixXd x = testing::RandomMatrix(12, 16, 8);
  const ImageShape shape{4, 4, 1};
  const EigenModel incremental = FitEigenfacesIncremental({x}, 5, shape);
  const EigenModel direct = FitEigenfacesFromStats(ComputePartitionStats(x), 5, shape);
  EXPECT_EQ(incremental.eigenfaces, direct.eigenfaces);
  EXPECT_EQ(incremental.eigenvalues, direct.eigenvalues);
  EXPECT_EQ(incremental.mean_face, direct.mean_face);

  const EigenModel batch = FitEigenfaces(x, 5, shape);
  EXPECT_LE((incremental.eigenvalues - batch.eigenvalues).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((incremental.eigenfaces - batch.eigenfaces).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(IncrementalTest, UnevenSplitOfImagesMatchesBatch) {
  const Eigen::MatrixXd x = testing::RandomMatrix(20, 64, 9);
  const ImageShape shape{8, 8, 1};
  const EigenModel batch = FitEigenfaces(x, 10, shape);
  const EigenModel incremental = FitEigenfacesIncremental(SplitRows(x, {7, 13}), 10, shape);
  for (Eigen::Index k = 0; k < 10; ++k) {
    EXPECT_LE(std::abs(incremental.eigenvalues(k) - batch.eigenvalues(k)),
              1e-8 * batch.eigenvalues(k));
    for (Eigen::Index j = 0; j < 64; ++j) {
      EXPECT_NEAR(incremental.eigenfaces(k, j), batch.eigenfaces(k, j), 1e-6);
    }
  }
}

TEST(IncrementalTest, PartitionOrderDoesNotMatter) {
  const Eigen::MatrixXd x = testing::RandomMatrix(200, 6, 10, -1.0, 1.0);
  const auto blocks = SplitRows(x, {30, 70, 45, 55});
  const PartitionStats batch = ComputePartitionStats(x);
  std::vector<std::size_t> order{0, 1, 2, 3};
  do {
    std::vector<PartitionStats> stats;
    for (std::size_t i : order) stats.push_back(ComputePartitionStats(blocks[i]));
    const PartitionStats merged = FoldStats(stats);
    EXPECT_LE(RelativeError(merged.mean, batch.mean), 1e-9);
    EXPECT_LE(RelativeError(merged.SampleCovariance(), TwoPassSampleCovariance(x)), 1e-9);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(IncrementalTest, ErrorCases) {
  try {
    FitEigenfacesIncremental({}, 2, {1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPartition);
  }
  try {
    FitEigenfacesIncremental({testing::RandomMatrix(1, 4, 1)}, 2, {2, 2, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewImages);
  }
}

}  // namespace
}  // namespace peep
