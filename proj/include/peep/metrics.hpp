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

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "peep/error.hpp"
#include "peep/mlp.hpp"

namespace peep {

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::size_t> support;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  // confusion[truth][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

/// Per-class and support-weighted precision, recall and F1. Undefined
/// ratios (no predictions or no support for a class) count as 0.
inline EvalReport EvaluatePredictions(const std::vector<int>& predicted,
                                      const std::vector<int>& truth, std::size_t num_classes) {
  Require(!truth.empty(), ErrorCode::kEmptyInput, "empty test set");
  Require(predicted.size() == truth.size(), ErrorCode::kDimensionMismatch,
          "predictions and labels differ in count");
  EvalReport r;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < num_classes &&
                predicted[i] >= 0 && static_cast<std::size_t>(predicted[i]) < num_classes,
            ErrorCode::kInvalidArgument, "label out of range");
    ++r.confusion[truth[i]][predicted[i]];
    correct += predicted[i] == truth[i];
  }
  const double total = static_cast<double>(truth.size());
  r.accuracy = static_cast<double>(correct) / total;

  r.precision.assign(num_classes, 0.0);
  r.recall.assign(num_classes, 0.0);
  r.f1.assign(num_classes, 0.0);
  r.support.assign(num_classes, 0);
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t predicted_k = 0;
    for (std::size_t t = 0; t < num_classes; ++t) {
      predicted_k += r.confusion[t][k];
      r.support[k] += r.confusion[k][t];
    }
    const double tp = static_cast<double>(r.confusion[k][k]);
    if (predicted_k > 0) r.precision[k] = tp / static_cast<double>(predicted_k);
    if (r.support[k] > 0) r.recall[k] = tp / static_cast<double>(r.support[k]);
    if (r.precision[k] + r.recall[k] > 0) {
      r.f1[k] = 2.0 * r.precision[k] * r.recall[k] / (r.precision[k] + r.recall[k]);
    }
    const double weight = static_cast<double>(r.support[k]) / total;
    r.weighted_precision += weight * r.precision[k];
    r.weighted_recall += weight * r.recall[k];
    r.weighted_f1 += weight * r.f1[k];
  }
  return r;
}

inline EvalReport Evaluate(const MlpModel& model, const Eigen::MatrixXd& features,
                           const std::vector<int>& labels) {
  Require(features.rows() >= 1, ErrorCode::kEmptyInput, "empty test set");
  return EvaluatePredictions(PredictLabels(model, features), labels, model.num_classes());
}

}  // namespace peep
