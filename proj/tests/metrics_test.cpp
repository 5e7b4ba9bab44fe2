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
#include "peep/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace peep {
namespace {

TEST(EvaluatePredictionsTest, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  const EvalReport r = EvaluatePredictions(y, y, 3);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_f1, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_precision, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_recall, 1.0);
}

TEST(EvaluatePredictionsTest, ConstantPredictor) {
  const EvalReport r = EvaluatePredictions({0, 0, 0, 0}, {0, 0, 1, 1}, 2);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.precision[0], 0.5);
  EXPECT_DOUBLE_EQ(r.recall[0], 1.0);
  EXPECT_DOUBLE_EQ(r.precision[1], 0.0);
  EXPECT_DOUBLE_EQ(r.f1[1], 0.0);
  EXPECT_NEAR(r.weighted_f1, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.weighted_recall, r.accuracy);
}

TEST(EvaluatePredictionsTest, ConfusionRowsSumToSupport) {
  Rng rng(3);
  std::vector<int> pred, truth;
  for (int i = 0; i < 200; ++i) {
    truth.push_back(static_cast<int>(UniformIndex(rng, 5)));
    pred.push_back(static_cast<int>(UniformIndex(rng, 5)));
  }
  const EvalReport r = EvaluatePredictions(pred, truth, 5);
  std::size_t total = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(std::accumulate(r.confusion[k].begin(), r.confusion[k].end(), std::size_t{0}), r.support[k]);
    total += r.support[k];
  }
  EXPECT_EQ(total, 200u);
  // Weighted recall is accuracy by construction.
  EXPECT_NEAR(r.weighted_recall, r.accuracy, 1e-15);
}

TEST(EvaluatePredictionsTest, InvariantToSampleOrder) {
  Rng rng(4);
  std::vector<int> pred, truth;
  for (int i = 0; i < 50; ++i) {
    truth.push_back(static_cast<int>(UniformIndex(rng, 3)));
    pred.push_back(static_cast<int>(UniformIndex(rng, 3)));
  }
  const EvalReport a = EvaluatePredictions(pred, truth, 3);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  Shuffle(perm, rng);
  std::vector<int> p2, t2;
  for (std::size_t i : perm) {
    p2.push_back(pred[i]);
    t2.push_back(truth[i]);
  }
  const EvalReport b = EvaluatePredictions(p2, t2, 3);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_NEAR(a.weighted_f1, b.weighted_f1, 1e-15);
}

TEST(EvaluatePredictionsTest, ErrorCases) {
  try {
    EvaluatePredictions({}, {}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
  EXPECT_THROW(EvaluatePredictions({0}, {0, 1}, 2), Error);
  EXPECT_THROW(EvaluatePredictions({3}, {0}, 2), Error);
}

TEST(EvaluateTest, UsesModelPredictions) {
  const MlpModel m = MlpModel::Zeros({2, 3});
  const EvalReport r = Evaluate(m, testing::RandomMatrix(4, 2, 1), {0, 0, 1, 2});
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
}

}  // namespace
}  // namespace peep
