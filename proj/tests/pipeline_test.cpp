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
#include "peep/pipeline.hpp"

#include <cstring>
#include <set>

#include <gtest/gtest.h>

#include "peep/synth.hpp"
#include "test_util.hpp"

namespace peep {
namespace {

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("pipeline");
    SynthSpec spec;
    spec.classes = 6;
    spec.per_class = 12;
    spec.width = 16;
    spec.height = 16;
    WriteSyntheticCorpus(dir_->path(), spec);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static PipelineConfig Config() {
    PipelineConfig cfg;
    cfg.width = 16;
    cfg.height = 16;
    cfg.nc = 16;
    cfg.epsilon = 8.0;
    cfg.seed = 3;
    return cfg;
  }

  static TrainOptions Options(bool perturb = true) {
    TrainOptions o;
    o.perturb = perturb;
    o.mlp.hidden_layers = {128, 128};
    o.mlp.max_epochs = 60;
    return o;
  }

  static const std::filesystem::path& Root() { return dir_->path(); }

  static testing::TempDir* dir_;
};

testing::TempDir* PipelineTest::dir_ = nullptr;

bool Contains(const std::string& haystack, const Eigen::VectorXd& v) {
  std::string needle(static_cast<std::size_t>(v.size()) * sizeof(double), '\0');
  std::memcpy(needle.data(), v.data(), needle.size());
  return haystack.find(needle) != std::string::npos;
}

TEST(StratifiedSplitTest, PartitionsEveryClass) {
  std::vector<int> labels;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 10 + k; ++i) labels.push_back(k);
  }
  const Split s = StratifiedSplit(labels, 4, 0.7, 5);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (std::size_t i : s.test) EXPECT_TRUE(all.insert(i).second) << "index on both sides";
  EXPECT_EQ(all.size(), labels.size());
  for (int k = 0; k < 4; ++k) {
    std::size_t in_train = 0;
    for (std::size_t i : s.train) in_train += labels[i] == k;
    EXPECT_EQ(in_train, static_cast<std::size_t>(std::lround(0.7 * (10 + k))));
  }
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  const Split again = StratifiedSplit(labels, 4, 0.7, 5);
  EXPECT_EQ(s.train, again.train);
  EXPECT_NE(s.train, StratifiedSplit(labels, 4, 0.7, 6).train);
}

TEST(StratifiedSplitTest, SmallClassesKeepBothSides) {
  const Split s = StratifiedSplit({0, 0, 1, 1, 1}, 2, 0.9, 1);
  EXPECT_EQ(s.train.size(), 3u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_THROW(StratifiedSplit({0, 1}, 2, 1.0, 1), Error);
}

TEST_F(PipelineTest, SameSeedGivesIdenticalBundles) {
  const LabeledDataset ds = BuildDataset(Root(), Config());
  const Split split = StratifiedSplit(ds.labels, ds.num_classes(), 0.7, 3);
  const std::string a = EncodeBundle(TrainPipeline(ds, split.train, Config(), Options()).bundle);
  const std::string b = EncodeBundle(TrainPipeline(ds, split.train, Config(), Options()).bundle);
  EXPECT_EQ(a, b);
}

TEST_F(PipelineTest, IncrementalBasisTrainsToo) {
  const LabeledDataset ds = BuildDataset(Root(), Config());
  const Split split = StratifiedSplit(ds.labels, ds.num_classes(), 0.7, 3);
  TrainOptions options = Options();
  options.partitions = 3;
  const TrainedPipeline inc = TrainPipeline(ds, split.train, Config(), options);
  const TrainedPipeline batch = TrainPipeline(ds, split.train, Config(), Options());
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(batch.bundle.nc()); ++k) {
    EXPECT_NEAR(inc.bundle.eigen.eigenvalues(k), batch.bundle.eigen.eigenvalues(k),
                1e-6 * batch.bundle.eigen.eigenvalues(0));
  }
}

TEST_F(PipelineTest, BundleHoldsNoRawPixelsOrCleanProjections) {
  const LabeledDataset ds = BuildDataset(Root(), Config());
  const Split split = StratifiedSplit(ds.labels, ds.num_classes(), 0.7, 3);
  const TrainedPipeline trained = TrainPipeline(ds, split.train, Config(), Options());
  const std::string bytes = EncodeBundle(trained.bundle);
  for (std::size_t i : split.train) {
    const Eigen::VectorXd pixels = Flatten(ds.images[i]);
    EXPECT_FALSE(Contains(bytes, pixels.head(8))) << "raw pixels of image " << i;
    const Eigen::VectorXd coeffs = Project(trained.bundle.eigen, ds.images[i]);
    EXPECT_FALSE(Contains(bytes, coeffs.head(4))) << "clean projection of image " << i;
    EXPECT_FALSE(Contains(bytes, Scale(trained.bundle.scaler, coeffs).head(4)))
        << "clean scaled projection of image " << i;
  }
}

TEST_F(PipelineTest, ReportsComponentClampAndPrivacy) {
  PipelineConfig cfg = Config();
  cfg.nc = 128;
  const LabeledDataset ds = BuildDataset(Root(), cfg);
  const Split split = StratifiedSplit(ds.labels, ds.num_classes(), 0.7, 3);
  const TrainedPipeline trained = TrainPipeline(ds, split.train, cfg, Options());
  EXPECT_EQ(trained.clamp.requested, 128u);
  EXPECT_EQ(trained.clamp.effective, 16u);
  EXPECT_EQ(trained.bundle.nc(), 16u);
  EXPECT_DOUBLE_EQ(trained.privacy.composed_epsilon, 8.0 * 16);
}

TEST(RecognizeTest, ZeroModelOnMeanFace) {
  ModelBundle b;
  b.eigen = FitEigenfaces(testing::RandomMatrix(5, 12, 1), 3, {4, 3, 1});
  b.scaler = FitScaler(testing::RandomMatrix(5, 3, 2));
  b.mlp = MlpModel::Zeros({3, 4});
  b.class_names = {"a", "b", "c", "d"};
  Rng rng(1);
  const Prediction p = Recognize(b, Unflatten(b.eigen.mean_face, b.eigen.shape), 4.0, rng);
  EXPECT_EQ(p.label, 0);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p.probabilities(k), 0.25);
  EXPECT_THROW(Recognize(b, Image(4, 3, 3), 4.0, rng), Error);
}

// Desk-scale corpus and the default classifier.
TEST(DeskScaleTest, RecognizesTrainingImageUnderNoise) {
  testing::TempDir dir("desk");
  WriteSyntheticCorpus(dir.path(), SynthSpec{});
  PipelineConfig cfg;
  cfg.width = 32;
  cfg.height = 32;
  cfg.epsilon = 8.0;
  const LabeledDataset ds = BuildDataset(dir.path(), cfg);
  const Split split = StratifiedSplit(ds.labels, ds.num_classes(), cfg.train_fraction, cfg.seed);
  const TrainedPipeline trained = TrainPipeline(ds, split.train, cfg, TrainOptions{});
  const std::size_t probe = split.train.front();
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = DeriveStream(seed, kTestNoiseStream);
    hits += Recognize(trained.bundle, ds.images[probe], 8.0, rng).label == ds.labels[probe];
  }
  EXPECT_GE(hits, 12);
}

TEST_F(PipelineTest, HugeEpsilonMatchesNoPrivacy) {
  PipelineConfig cfg = Config();
  const LabeledDataset ds = BuildDataset(Root(), cfg);
  const Split split = StratifiedSplit(ds.labels, ds.num_classes(), 0.7, cfg.seed);
  const TrainedPipeline clean = TrainPipeline(ds, split.train, cfg, Options(false));
  const double clean_f1 = EvaluatePipeline(clean.bundle, ds, split.test, std::nullopt, cfg.seed).weighted_f1;
  cfg.epsilon = 1e6;
  const TrainedPipeline noisy = TrainPipeline(ds, split.train, cfg, Options(true));
  const double noisy_f1 = EvaluatePipeline(noisy.bundle, ds, split.test, 1e6, cfg.seed).weighted_f1;
  EXPECT_NEAR(noisy_f1, clean_f1, 0.02);
}

TEST_F(PipelineTest, BenchmarkRowsAndCsv) {
  BenchmarkSpec spec;
  spec.epsilons = {0.5, 4.0, 8.0};
  spec.ncs = {8};
  spec.imthreshes = {1};
  spec.repeats = 5;
  spec.jobs = 2;
  spec.mlp.hidden_layers = {32};
  spec.mlp.max_epochs = 5;
  const std::vector<BenchmarkRow> rows = RunBenchmark(Root(), Config(), spec);
  ASSERT_EQ(rows.size(), 20u);
  std::size_t baseline = 0;
  for (const BenchmarkRow& r : rows) {
    baseline += !r.epsilon.has_value();
    EXPECT_GT(r.perturb_seconds, 0.0);
    EXPECT_GT(r.predict_seconds, 0.0);
    for (double m : {r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1}) {
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
    }
    EXPECT_EQ(r.effective_nc, 8u);
  }
  EXPECT_EQ(baseline, 5u);
  EXPECT_EQ(rows[0].seed, 3u);
  EXPECT_EQ(rows[4].seed, 7u);

  const std::string csv = FormatBenchmarkCsv(rows);
  EXPECT_EQ(csv.substr(0, kBenchmarkCsvHeader.size()), kBenchmarkCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  EXPECT_NE(csv.find("\nnone,8,1,3,"), std::string::npos);

  // Scheduling does not change the metrics.
  spec.jobs = 1;
  const std::vector<BenchmarkRow> serial = RunBenchmark(Root(), Config(), spec);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].weighted_f1, serial[i].weighted_f1);
}

}  // namespace
}  // namespace peep
