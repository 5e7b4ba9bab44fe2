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
#include "peep/bundle.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace peep {
namespace {

ModelBundle SmallBundle() {
  ModelBundle b;
  b.config.width = 4;
  b.config.height = 3;
  b.config.nc = 2;
  b.config.epsilon = 4.0;
  b.config.seed = 7;
  b.eigen = FitEigenfaces(testing::RandomMatrix(6, 12, 1), 2, {4, 3, 1});
  b.scaler = FitScaler(testing::RandomMatrix(6, 2, 2, -1.0, 1.0));
  Rng rng(3);
  b.mlp = InitializeMlp({2, 5, 3}, rng);
  b.class_names = {"a", "b", "c"};
  return b;
}

template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

TEST(BundleTest, SaveLoadSaveIsByteIdentical) {
  testing::TempDir dir("bundle");
  const ModelBundle b = SmallBundle();
  SaveBundle(b, dir.path() / "a.peep");
  const ModelBundle loaded = LoadBundle(dir.path() / "a.peep");
  SaveBundle(loaded, dir.path() / "b.peep");
  EXPECT_EQ(ReadFileBytes(dir.path() / "a.peep"), ReadFileBytes(dir.path() / "b.peep"));
  EXPECT_EQ(loaded.eigen.eigenfaces, b.eigen.eigenfaces);
  EXPECT_EQ(loaded.mlp.weights[1], b.mlp.weights[1]);
  EXPECT_EQ(loaded.class_names, b.class_names);
  EXPECT_EQ(loaded.config.seed, 7u);
  EXPECT_DOUBLE_EQ(loaded.config.epsilon, 4.0);
}

TEST(BundleTest, CorruptHeaderIsBadMagic) {
  std::string bytes = EncodeBundle(SmallBundle());
  bytes[0] = 'X';
  EXPECT_EQ(CodeOf([&] { DecodeBundle(bytes); }), ErrorCode::kBadMagic);
  EXPECT_EQ(CodeOf([&] { DecodeBundle(""); }), ErrorCode::kBadMagic);
}

TEST(BundleTest, TruncationDetectedAnywhere) {
  const std::string bytes = EncodeBundle(SmallBundle());
  for (std::size_t cut : {std::size_t{8}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_EQ(CodeOf([&] { DecodeBundle(bytes.substr(0, cut)); }), ErrorCode::kTruncated) << cut;
  }
}

TEST(BundleTest, TrailingBytesRejected) {
  EXPECT_EQ(CodeOf([&] { DecodeBundle(EncodeBundle(SmallBundle()) + "x"); }), ErrorCode::kBadBundle);
}

TEST(BundleTest, ComponentMismatchIsIntegrityError) {
  ModelBundle b = SmallBundle();
  Rng rng(4);
  b.mlp = InitializeMlp({3, 5, 3}, rng);
  EXPECT_EQ(CodeOf([&] { DecodeBundle(EncodeBundle(b)); }), ErrorCode::kVersionMismatch);
  testing::TempDir dir("bundle");
  EXPECT_EQ(CodeOf([&] { SaveBundle(b, dir.path() / "x.peep"); }), ErrorCode::kVersionMismatch);
}

TEST(BundleTest, UnknownVersionRejected) {
  ModelBundle b = SmallBundle();
  b.version = 99;
  EXPECT_EQ(CodeOf([&] { DecodeBundle(EncodeBundle(b)); }), ErrorCode::kVersionMismatch);
}

TEST(BundleTest, EncodingIsDeterministic) {
  EXPECT_EQ(EncodeBundle(SmallBundle()), EncodeBundle(SmallBundle()));
}

TEST(PartitionStatsFileTest, RoundTrip) {
  testing::TempDir dir("stats");
  const PartitionStats s = ComputePartitionStats(testing::RandomMatrix(5, 4, 9));
  SavePartitionStats(s, dir.path() / "p.stats");
  const PartitionStats back = LoadPartitionStats(dir.path() / "p.stats");
  EXPECT_EQ(back.count, s.count);
  EXPECT_EQ(back.mean, s.mean);
  EXPECT_EQ(back.comoment, s.comoment);
  EXPECT_EQ(CodeOf([&] { DecodePartitionStats(EncodeBundle(SmallBundle())); }), ErrorCode::kBadMagic);
}

}  // namespace
}  // namespace peep
