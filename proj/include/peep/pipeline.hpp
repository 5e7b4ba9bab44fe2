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
// End-to-end private recognition: eigen basis, scaling and Laplace
// perturbation of every training vector, classifier training on the
// perturbed vectors only, and recognition of perturbed test images.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "peep/bundle.hpp"
#include "peep/dataset.hpp"
#include "peep/dp.hpp"
#include "peep/eigenfaces.hpp"
#include "peep/error.hpp"
#include "peep/merge.hpp"
#include "peep/metrics.hpp"
#include "peep/mlp.hpp"
#include "peep/rng.hpp"

namespace peep {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class shuffle, then round(fraction * count) images of each class go to
/// training. A class with at least two images keeps one on each side.
inline Split StratifiedSplit(const std::vector<int>& labels, std::size_t num_classes,
                             double train_fraction, std::uint64_t seed) {
  Require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::kInvalidArgument,
          "train_fraction must lie in (0,1)");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  Split split;
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto& members = by_class[k];
    if (members.empty()) continue;
    Rng rng = DeriveStream(seed, kSplitStream + k);
    Shuffle(members, rng);
    auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(members.size())));
    n_train = members.size() >= 2 ? std::clamp<std::size_t>(n_train, 1, members.size() - 1) : 1;
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

struct TrainOptions {
  std::size_t partitions = 0;  // > 1 fits the basis by merging partition statistics
  bool perturb = true;         // false only for no-privacy baselines
  TrainConfig mlp;
};

struct TrainedPipeline {
  ModelBundle bundle;
  ComponentClamp clamp;
  PrivacyReport privacy;
  std::vector<double> loss_history;
};

inline std::vector<Eigen::MatrixXd> PartitionRows(const Eigen::MatrixXd& samples, std::size_t parts) {
  parts = std::clamp<std::size_t>(parts, 1, static_cast<std::size_t>(samples.rows()));
  std::vector<Eigen::MatrixXd> out;
  const auto n = static_cast<std::size_t>(samples.rows());
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t begin = p * n / parts;
    const std::size_t end = (p + 1) * n / parts;
    out.push_back(samples.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)));
  }
  return out;
}

inline TrainedPipeline TrainPipeline(const LabeledDataset& ds, const std::vector<std::size_t>& train_indices,
                                     const PipelineConfig& cfg, const TrainOptions& options) {
  cfg.Validate();
  Require(train_indices.size() >= 2, ErrorCode::kTooFewImages, "need at least two training images");
  const Eigen::MatrixXd samples = ds.SampleMatrix(train_indices);

  TrainedPipeline out;
  out.clamp = ClampComponents(cfg.nc, ds.shape.width, ds.shape.height, train_indices.size(), ds.shape.size());
  const std::size_t nc = out.clamp.effective;

  EigenModel eigen = options.partitions > 1
                         ? FitEigenfacesIncremental(PartitionRows(samples, options.partitions), nc, ds.shape)
                         : FitEigenfaces(samples, nc, ds.shape);

  // Clean coefficients never leave this scope.
  const Eigen::MatrixXd coefficients =
      (samples.rowwise() - eigen.mean_face.transpose()) * eigen.eigenfaces.transpose();
  Scaler scaler = FitScaler(coefficients);
  const PrivacyParams params = PrivacyParams::WithEpsilon(cfg.epsilon);

  Eigen::MatrixXd features(coefficients.rows(), coefficients.cols());
  std::vector<int> labels;
  labels.reserve(train_indices.size());
  for (Eigen::Index i = 0; i < coefficients.rows(); ++i) {
    Eigen::VectorXd v = Scale(scaler, coefficients.row(i).transpose());
    if (options.perturb) {
      Rng rng = DeriveStream(cfg.seed, kTrainNoiseStream + static_cast<std::uint64_t>(i));
      v = Perturb(v, params, rng);
    }
    features.row(i) = v.transpose();
    labels.push_back(ds.labels[train_indices[static_cast<std::size_t>(i)]]);
  }

  TrainConfig mlp_cfg = options.mlp;
  mlp_cfg.seed = cfg.seed;
  TrainResult trained = TrainMlp(features, labels, ds.num_classes(), mlp_cfg);

  out.bundle.config = cfg;
  out.bundle.eigen = std::move(eigen);
  out.bundle.scaler = std::move(scaler);
  out.bundle.mlp = std::move(trained.model);
  out.bundle.class_names = ds.class_names;
  out.bundle.perturbed = options.perturb;
  out.privacy = MakePrivacyReport(params, nc);
  out.loss_history = std::move(trained.loss_history);
  return out;
}

/// The representation an image is released as: projected, scaled with the
/// training scaler and, when epsilon is given, perturbed.
inline Eigen::VectorXd PrivatizeImage(const ModelBundle& bundle, const Image& img,
                                      std::optional<double> epsilon, Rng& rng) {
  Eigen::VectorXd v = Scale(bundle.scaler, Project(bundle.eigen, img));
  if (epsilon) v = Perturb(v, PrivacyParams::WithEpsilon(*epsilon), rng);
  return v;
}

/// Resizes to the bundle resolution, privatizes and classifies.
inline Prediction Recognize(const ModelBundle& bundle, const Image& raw,
                            std::optional<double> epsilon, Rng& rng) {
  Require(raw.channels == bundle.eigen.shape.channels, ErrorCode::kDimensionMismatch,
          "image channel count does not match the model");
  const Image img = ResizeBilinear(raw, bundle.eigen.shape.width, bundle.eigen.shape.height);
  return Predict(bundle.mlp, PrivatizeImage(bundle, img, epsilon, rng));
}

inline Eigen::MatrixXd PrivatizeSet(const ModelBundle& bundle, const LabeledDataset& ds,
                                    const std::vector<std::size_t>& indices,
                                    std::optional<double> epsilon, std::uint64_t seed) {
  Eigen::MatrixXd features(static_cast<Eigen::Index>(indices.size()),
                           static_cast<Eigen::Index>(bundle.nc()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Rng rng = DeriveStream(seed, kTestNoiseStream + indices[i]);
    features.row(static_cast<Eigen::Index>(i)) =
        PrivatizeImage(bundle, ds.images.at(indices[i]), epsilon, rng).transpose();
  }
  return features;
}

/// Test images are perturbed exactly like training images before
/// classification.
inline EvalReport EvaluatePipeline(const ModelBundle& bundle, const LabeledDataset& ds,
                                   const std::vector<std::size_t>& test_indices,
                                   std::optional<double> epsilon, std::uint64_t seed) {
  Require(!test_indices.empty(), ErrorCode::kEmptyInput, "empty test split");
  std::vector<int> labels;
  for (std::size_t i : test_indices) labels.push_back(ds.labels[i]);
  return Evaluate(bundle.mlp, PrivatizeSet(bundle, ds, test_indices, epsilon, seed), labels);
}

struct BenchmarkRow {
  std::optional<double> epsilon;  // empty: no-privacy baseline
  std::size_t nc = 0;
  std::size_t imthresh = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double perturb_seconds = 0.0;  // project + scale + perturb, per image
  double predict_seconds = 0.0;  // per image
  std::size_t effective_nc = 0;
};

struct BenchmarkSpec {
  std::vector<double> epsilons;
  std::vector<std::size_t> ncs;
  std::vector<std::size_t> imthreshes;
  std::size_t repeats = 1;
  bool baseline = true;
  std::size_t jobs = 1;
  std::size_t timing_calls = 100;
  std::size_t partitions = 0;
  TrainConfig mlp;
};

struct PerImageTiming {
  double perturb_seconds = 0.0;
  double predict_seconds = 0.0;
};

/// Mean wall-clock cost of privatizing and of classifying one image, over
/// `calls` calls cycling through `images`.
inline PerImageTiming TimePerImage(const ModelBundle& bundle, const std::vector<Image>& images,
                                   std::optional<double> epsilon, std::size_t calls,
                                   std::uint64_t seed) {
  Require(!images.empty() && calls >= 1, ErrorCode::kEmptyInput, "nothing to time");
  using Clock = std::chrono::steady_clock;
  Rng rng = DeriveStream(seed, kTestNoiseStream);
  std::vector<Eigen::VectorXd> released;
  released.reserve(calls);
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < calls; ++i) {
    released.push_back(PrivatizeImage(bundle, images[i % images.size()], epsilon, rng));
  }
  const auto t1 = Clock::now();
  int sink = 0;
  for (std::size_t i = 0; i < calls; ++i) sink += Predict(bundle.mlp, released[i]).label;
  const auto t2 = Clock::now();
  static_cast<void>(sink);
  const double n = static_cast<double>(calls);
  return {std::chrono::duration<double>(t1 - t0).count() / n,
          std::chrono::duration<double>(t2 - t1).count() / n};
}

/// Runs `count` tasks on up to `jobs` threads; the first failure is rethrown.
template <typename Task>
void RunParallel(std::size_t count, std::size_t jobs, Task&& task) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// One row per (imthresh, nc, epsilon, repeat), with the no-privacy baseline
/// listed first for every (imthresh, nc). Repeat r uses seed base + r for the
/// split, the noise and the classifier.
inline std::vector<BenchmarkRow> RunBenchmark(const std::filesystem::path& root, const PipelineConfig& base,
                                              const BenchmarkSpec& spec) {
  Require(!spec.ncs.empty() && !spec.imthreshes.empty() && spec.repeats >= 1,
          ErrorCode::kInvalidArgument, "empty benchmark grid");
  Require(!spec.epsilons.empty() || spec.baseline, ErrorCode::kInvalidArgument, "empty benchmark grid");

  std::map<std::size_t, LabeledDataset> datasets;
  for (std::size_t imthresh : spec.imthreshes) {
    PipelineConfig cfg = base;
    cfg.imthresh = imthresh;
    if (!datasets.contains(imthresh)) datasets.emplace(imthresh, BuildDataset(root, cfg));
  }

  std::vector<BenchmarkRow> rows;
  for (std::size_t imthresh : spec.imthreshes) {
    for (std::size_t nc : spec.ncs) {
      std::vector<std::optional<double>> eps_grid;
      if (spec.baseline) eps_grid.push_back(std::nullopt);
      for (double e : spec.epsilons) eps_grid.push_back(e);
      for (const auto& eps : eps_grid) {
        for (std::size_t r = 0; r < spec.repeats; ++r) {
          BenchmarkRow row;
          row.epsilon = eps;
          row.nc = nc;
          row.imthresh = imthresh;
          row.seed = base.seed + r;
          rows.push_back(row);
        }
      }
    }
  }

  RunParallel(rows.size(), spec.jobs, [&](std::size_t i) {
    BenchmarkRow& row = rows[i];
    const LabeledDataset& ds = datasets.at(row.imthresh);
    PipelineConfig cfg = base;
    cfg.imthresh = row.imthresh;
    cfg.nc = row.nc;
    cfg.seed = row.seed;
    if (row.epsilon) cfg.epsilon = *row.epsilon;
    const Split split = StratifiedSplit(ds.labels, ds.num_classes(), cfg.train_fraction, cfg.seed);
    TrainOptions options{spec.partitions, row.epsilon.has_value(), spec.mlp};
    const TrainedPipeline trained = TrainPipeline(ds, split.train, cfg, options);
    const EvalReport report = EvaluatePipeline(trained.bundle, ds, split.test, row.epsilon, cfg.seed);
    row.accuracy = report.accuracy;
    row.weighted_precision = report.weighted_precision;
    row.weighted_recall = report.weighted_recall;
    row.weighted_f1 = report.weighted_f1;
    row.effective_nc = trained.bundle.nc();
    std::vector<Image> timing_images;
    for (std::size_t t : split.test) timing_images.push_back(ds.images[t]);
    const PerImageTiming timing =
        TimePerImage(trained.bundle, timing_images, row.epsilon, std::max<std::size_t>(100, spec.timing_calls), cfg.seed);
    row.perturb_seconds = timing.perturb_seconds;
    row.predict_seconds = timing.predict_seconds;
  });
  return rows;
}

inline constexpr std::string_view kBenchmarkCsvHeader =
    "epsilon,nc,imthresh,seed,accuracy,weighted_precision,weighted_recall,weighted_f1,"
    "perturb_seconds,predict_seconds,effective_nc";

inline std::string FormatBenchmarkCsv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  out << kBenchmarkCsvHeader << '\n' << std::setprecision(10);
  for (const auto& r : rows) {
    if (r.epsilon) {
      out << *r.epsilon;
    } else {
      out << "none";
    }
    out << ',' << r.nc << ',' << r.imthresh << ',' << r.seed << ',' << r.accuracy << ','
        << r.weighted_precision << ',' << r.weighted_recall << ',' << r.weighted_f1 << ','
        << r.perturb_seconds << ',' << r.predict_seconds << ',' << r.effective_nc << '\n';
  }
  return out.str();
}

}  // namespace peep
