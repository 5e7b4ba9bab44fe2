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
// Feed-forward classifier: ReLU hidden layers, softmax output, cross-entropy
// loss with an L2 penalty, trained by mini-batch Adam.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "peep/error.hpp"
#include "peep/rng.hpp"

namespace peep {

struct TrainConfig {
  std::vector<std::size_t> hidden_layers{512, 1024, 2014, 1024, 512};
  std::size_t batch_size = 100;
  std::size_t max_epochs = 200;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double alpha = 0.0001;  // L2 penalty
  double tol = 0.0001;
  std::size_t n_iter_no_change = 10;
  // Held out only when early_stopping is set.
  double validation_fraction = 0.1;
  bool shuffle = true;
  bool early_stopping = false;
  std::uint64_t seed = 0;

  void Validate() const {
    Require(batch_size >= 1 && max_epochs >= 1, ErrorCode::kInvalidArgument,
            "batch_size and max_epochs must be >= 1");
    Require(learning_rate > 0 && alpha >= 0 && tol >= 0 && adam_epsilon > 0,
            ErrorCode::kInvalidArgument, "optimizer settings must be positive");
    Require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorCode::kInvalidArgument,
            "Adam decay rates must lie in [0,1)");
    Require(validation_fraction >= 0 && validation_fraction < 1, ErrorCode::kInvalidArgument,
            "validation_fraction must lie in [0,1)");
    Require(n_iter_no_change >= 1, ErrorCode::kInvalidArgument, "n_iter_no_change must be >= 1");
    for (std::size_t width : hidden_layers) {
      Require(width >= 1, ErrorCode::kInvalidArgument, "hidden layer widths must be >= 1");
    }
  }
};

struct MlpModel {
  std::vector<std::size_t> layer_dims;   // input, hidden..., classes
  std::vector<Eigen::MatrixXd> weights;  // layer l maps dims[l] -> dims[l+1]
  std::vector<Eigen::VectorXd> biases;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_classes() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }

  static MlpModel Zeros(const std::vector<std::size_t>& dims) {
    MlpModel m;
    m.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      m.weights.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[l]),
                                                static_cast<Eigen::Index>(dims[l + 1])));
      m.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1])));
    }
    return m;
  }

  void Validate() const {
    Require(layer_dims.size() >= 2, ErrorCode::kInvalidArgument, "need input and output layers");
    Require(weights.size() + 1 == layer_dims.size() && biases.size() == weights.size(),
            ErrorCode::kDimensionMismatch, "layer count does not match layer_dims");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Require(static_cast<std::size_t>(weights[l].rows()) == layer_dims[l] &&
                  static_cast<std::size_t>(weights[l].cols()) == layer_dims[l + 1] &&
                  static_cast<std::size_t>(biases[l].size()) == layer_dims[l + 1],
              ErrorCode::kDimensionMismatch, "weight shapes do not chain with layer_dims");
    }
  }
};

/// Glorot-uniform weights and biases, bound sqrt(6 / (fan_in + fan_out)).
inline MlpModel InitializeMlp(const std::vector<std::size_t>& dims, Rng& rng) {
  MlpModel m = MlpModel::Zeros(dims);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (Eigen::Index j = 0; j < m.weights[l].cols(); ++j) {
      for (Eigen::Index i = 0; i < m.weights[l].rows(); ++i) {
        m.weights[l](i, j) = (2.0 * UniformUnit(rng) - 1.0) * bound;
      }
    }
    for (Eigen::Index j = 0; j < m.biases[l].size(); ++j) {
      m.biases[l](j) = (2.0 * UniformUnit(rng) - 1.0) * bound;
    }
  }
  return m;
}

namespace internal {

inline void SoftmaxRows(Eigen::MatrixXd& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - top).exp();
    logits.row(r) /= logits.row(r).sum();
  }
}

// activations[0] is the input; activations[l+1] the output of layer l
// (ReLU for hidden layers, raw logits for the last).
inline std::vector<Eigen::MatrixXd> ForwardPass(const MlpModel& model, const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(model.num_layers() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Eigen::MatrixXd z(x.rows(), model.weights[l].cols());
    z.noalias() = acts.back() * model.weights[l];
    z.rowwise() += model.biases[l].transpose();
    if (l + 1 < model.num_layers()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace internal

/// Class probabilities, one row per input row.
inline Eigen::MatrixXd PredictProba(const MlpModel& model, const Eigen::MatrixXd& x) {
  Require(static_cast<std::size_t>(x.cols()) == model.input_dim(), ErrorCode::kDimensionMismatch,
          "feature length does not match the model input");
  Eigen::MatrixXd logits = std::move(internal::ForwardPass(model, x).back());
  internal::SoftmaxRows(logits);
  return logits;
}

struct Prediction {
  int label = 0;
  Eigen::VectorXd probabilities;
};

/// Argmax of the softmax; ties go to the lowest class index.
inline Prediction Predict(const MlpModel& model, const Eigen::VectorXd& v) {
  Require(static_cast<std::size_t>(v.size()) == model.input_dim(), ErrorCode::kDimensionMismatch,
          "feature length does not match the model input");
  Prediction out;
  out.probabilities = PredictProba(model, v.transpose()).row(0).transpose();
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < out.probabilities.size(); ++k) {
    if (out.probabilities(k) > out.probabilities(best)) best = k;
  }
  out.label = static_cast<int>(best);
  return out;
}

inline std::vector<int> PredictLabels(const MlpModel& model, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd proba = PredictProba(model, x);
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < proba.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < proba.cols(); ++k) {
      if (proba(r, k) > proba(r, best)) best = k;
    }
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

struct MlpGradients {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Mean cross-entropy plus 0.5 * alpha * |W|^2 / n over the batch, and its
/// gradient with respect to every weight and bias.
inline MlpGradients LossAndGradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                     const std::vector<int>& y, double alpha) {
  const Eigen::Index n = x.rows();
  Require(n >= 1 && static_cast<std::size_t>(n) == y.size(), ErrorCode::kDimensionMismatch,
          "batch and labels differ in size");
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Eigen::MatrixXd> acts = internal::ForwardPass(model, x);

  MlpGradients g;
  Eigen::MatrixXd& logits = acts.back();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double top = logits.row(r).maxCoeff();
    const double log_norm = top + std::log((logits.row(r).array() - top).exp().sum());
    loss -= logits(r, y[static_cast<std::size_t>(r)]) - log_norm;
  }
  loss *= inv_n;
  double penalty = 0.0;
  for (const auto& w : model.weights) penalty += w.squaredNorm();
  g.loss = loss + 0.5 * alpha * penalty * inv_n;

  internal::SoftmaxRows(logits);
  Eigen::MatrixXd delta = std::move(logits);
  for (Eigen::Index r = 0; r < n; ++r) delta(r, y[static_cast<std::size_t>(r)]) -= 1.0;
  delta *= inv_n;

  const std::size_t layers = model.num_layers();
  g.weights.resize(layers);
  g.biases.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l].noalias() = acts[l].transpose() * delta;
    g.weights[l] += (alpha * inv_n) * model.weights[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back(n, model.weights[l].rows());
      back.noalias() = delta * model.weights[l].transpose();
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;  // one mean training loss per epoch run
};

namespace internal {

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  std::uint64_t t = 0;

  explicit AdamState(const MlpModel& model) {
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      m_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
      v_w.push_back(m_w.back());
      m_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
      v_b.push_back(m_b.back());
    }
  }

  void Step(MlpModel& model, const MlpGradients& g, const TrainConfig& cfg) {
    ++t;
    const double td = static_cast<double>(t);
    const double lr = cfg.learning_rate * std::sqrt(1.0 - std::pow(cfg.beta2, td)) /
                      (1.0 - std::pow(cfg.beta1, td));
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      Update(model.weights[l].array(), g.weights[l].array(), m_w[l].array(), v_w[l].array(), lr, cfg);
      Update(model.biases[l].array(), g.biases[l].array(), m_b[l].array(), v_b[l].array(), lr, cfg);
    }
  }

  template <typename P, typename G, typename M>
  static void Update(P&& param, const G& grad, M&& m, M&& v, double lr, const TrainConfig& cfg) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.square();
    param -= lr * m / (v.sqrt() + cfg.adam_epsilon);
  }
};

inline Eigen::MatrixXd GatherRows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows,
                                  std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), x.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace internal

/// Trains on one feature vector per row of `features`. Stops after
/// max_epochs or once the epoch loss has failed to improve on the best loss
/// by at least tol for n_iter_no_change consecutive epochs (with
/// early_stopping, the held-out accuracy plays that role instead).
inline TrainResult TrainMlp(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                            std::size_t num_classes, const TrainConfig& cfg) {
  cfg.Validate();
  Require(features.rows() >= 1, ErrorCode::kEmptyInput, "no training samples");
  Require(static_cast<std::size_t>(features.rows()) == labels.size(),
          ErrorCode::kDimensionMismatch, "features and labels differ in count");
  std::set<int> present;
  for (int y : labels) {
    Require(y >= 0 && static_cast<std::size_t>(y) < num_classes, ErrorCode::kInvalidArgument,
            "label out of range");
    present.insert(y);
  }
  Require(present.size() >= 2, ErrorCode::kSingleClass, "training data holds a single class");

  std::vector<std::size_t> dims{static_cast<std::size_t>(features.cols())};
  dims.insert(dims.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
  dims.push_back(num_classes);

  Rng init_rng = DeriveStream(cfg.seed, kMlpStream);
  Rng order_rng = DeriveStream(cfg.seed, kMlpStream + 1);
  TrainResult result{InitializeMlp(dims, init_rng), {}};

  std::vector<std::size_t> train_rows(labels.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) train_rows[i] = i;
  std::vector<std::size_t> valid_rows;
  if (cfg.early_stopping && cfg.validation_fraction > 0.0 && labels.size() >= 2) {
    Shuffle(train_rows, order_rng);
    const auto n_valid = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(labels.size())));
    valid_rows.assign(train_rows.end() - static_cast<std::ptrdiff_t>(n_valid), train_rows.end());
    train_rows.resize(train_rows.size() - n_valid);
    std::sort(train_rows.begin(), train_rows.end());
  }

  const std::size_t n = train_rows.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  internal::AdamState adam(result.model);
  double best_loss = std::numeric_limits<double>::infinity();
  double best_score = -std::numeric_limits<double>::infinity();
  MlpModel best_model;
  std::size_t stagnant = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = train_rows;
    if (cfg.shuffle) Shuffle(order, order_rng);
    double accumulated = 0.0;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(begin + batch, n);
      std::vector<int> yb;
      yb.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) yb.push_back(labels[order[i]]);
      const MlpGradients g =
          LossAndGradients(result.model, internal::GatherRows(features, order, begin, end), yb, cfg.alpha);
      accumulated += g.loss * static_cast<double>(end - begin);
      adam.Step(result.model, g, cfg);
    }
    const double epoch_loss = accumulated / static_cast<double>(n);
    result.loss_history.push_back(epoch_loss);

    if (!valid_rows.empty()) {
      const std::vector<int> predicted =
          PredictLabels(result.model, internal::GatherRows(features, valid_rows, 0, valid_rows.size()));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < valid_rows.size(); ++i) correct += predicted[i] == labels[valid_rows[i]];
      const double score = static_cast<double>(correct) / static_cast<double>(valid_rows.size());
      stagnant = score < best_score + cfg.tol ? stagnant + 1 : 0;
      if (score > best_score) {
        best_score = score;
        best_model = result.model;
      }
    } else {
      stagnant = epoch_loss > best_loss - cfg.tol ? stagnant + 1 : 0;
      best_loss = std::min(best_loss, epoch_loss);
    }
    if (stagnant >= cfg.n_iter_no_change) break;
  }
  if (!valid_rows.empty() && !best_model.weights.empty()) result.model = std::move(best_model);
  return result;
}

}  // namespace peep
