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
// On-disk formats.
//
// Model bundle:
//   "PEEP1\n"                      6-byte magic
//   u64 little-endian              length L of the JSON metadata
//   L bytes                        JSON metadata (keys sorted)
//   sections, each                 u64 LE count, then count IEEE-754
//                                  doubles, little-endian
// Sections, in order: mean face (d), eigenfaces (nc x d, row-major),
// eigenvalues (nc), scaler min (nc), scaler max (nc), then for every MLP
// layer its weights (in x out, row-major) and biases (out).
//
// Partition statistics use the same container with magic "PEEPS1\n" and two
// sections: mean (d) and co-moment (d x d, row-major).
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "peep/dataset.hpp"
#include "peep/dp.hpp"
#include "peep/eigenfaces.hpp"
#include "peep/error.hpp"
#include "peep/image.hpp"
#include "peep/merge.hpp"
#include "peep/mlp.hpp"

namespace peep {

inline constexpr std::string_view kBundleMagic = "PEEP1\n";
inline constexpr std::string_view kStatsMagic = "PEEPS1\n";
inline constexpr int kBundleVersion = 1;

/// Everything recognition needs. Training pixels and clean projections are
/// never part of it.
struct ModelBundle {
  int version = kBundleVersion;
  PipelineConfig config;  // as requested
  EigenModel eigen;
  Scaler scaler;
  MlpModel mlp;
  std::vector<std::string> class_names;
  bool perturbed = true;  // false only for no-privacy baselines

  std::size_t nc() const { return eigen.nc(); }
};

namespace internal {

class ByteWriter {
 public:
  void Raw(std::string_view bytes) { out_.append(bytes); }

  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void Doubles(const double* data, std::size_t count) {
    U64(count);
    for (std::size_t i = 0; i < count; ++i) U64(std::bit_cast<std::uint64_t>(data[i]));
  }

  void Vector(const Eigen::VectorXd& v) { Doubles(v.data(), static_cast<std::size_t>(v.size())); }

  void RowMajor(const Eigen::MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    Doubles(rm.data(), static_cast<std::size_t>(rm.size()));
  }

  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& data) : data_(data) {}

  std::string_view Raw(std::size_t n) {
    if (data_.size() - pos_ < n) Fail(ErrorCode::kTruncated, "unexpected end of file");
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  std::uint64_t U64() {
    const std::string_view b = Raw(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }

  std::vector<double> Doubles(std::size_t expected) {
    const std::uint64_t count = U64();
    if (count != expected) {
      Fail(ErrorCode::kBadBundle, "section holds " + std::to_string(count) + " values, expected " +
                                      std::to_string(expected));
    }
    if ((data_.size() - pos_) / 8 < count) Fail(ErrorCode::kTruncated, "section truncated");
    std::vector<double> out(count);
    for (auto& x : out) x = std::bit_cast<double>(U64());
    return out;
  }

  Eigen::VectorXd Vector(std::size_t n) {
    const std::vector<double> v = Doubles(n);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
  }

  Eigen::MatrixXd RowMajor(std::size_t rows, std::size_t cols) {
    const std::vector<double> v = Doubles(rows * cols);
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }

  bool AtEnd() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

inline nlohmann::json ParseMetadata(ByteReader& reader) {
  const std::uint64_t length = reader.U64();
  const std::string_view text = reader.Raw(length);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kBadBundle, std::string("metadata is not valid JSON: ") + e.what());
  }
}

inline void WriteFile(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace internal

/// Checks that nc agrees across the eigen basis, scaler and MLP input and
/// that all shapes chain.
inline void ValidateBundle(const ModelBundle& b) {
  const std::size_t nc = b.eigen.nc();
  const std::size_t d = b.eigen.dimension();
  Require(d == b.eigen.shape.size() && static_cast<std::size_t>(b.eigen.eigenfaces.cols()) == d &&
              static_cast<std::size_t>(b.eigen.eigenvalues.size()) == nc,
          ErrorCode::kVersionMismatch, "integrity: eigen model shapes are inconsistent");
  Require(b.scaler.size() == nc && static_cast<std::size_t>(b.scaler.max.size()) == nc,
          ErrorCode::kVersionMismatch, "integrity: scaler length differs from nc");
  Require(!b.mlp.layer_dims.empty() && b.mlp.input_dim() == nc, ErrorCode::kVersionMismatch,
          "integrity: MLP input width differs from nc");
  Require(b.mlp.num_classes() == b.class_names.size(), ErrorCode::kVersionMismatch,
          "integrity: MLP output width differs from the class count");
  b.mlp.Validate();
}

/// Serializes without validation.
inline std::string EncodeBundle(const ModelBundle& b) {
  nlohmann::json meta;
  meta["format"] = "PEEP1";
  meta["version"] = b.version;
  meta["config"] = {{"width", b.config.width},         {"height", b.config.height},
                    {"nc", b.config.nc},               {"imthresh", b.config.imthresh},
                    {"epsilon", b.config.epsilon},     {"seed", b.config.seed},
                    {"train_fraction", b.config.train_fraction}};
  meta["shape"] = {{"width", b.eigen.shape.width},
                   {"height", b.eigen.shape.height},
                   {"channels", b.eigen.shape.channels}};
  meta["nc"] = b.eigen.nc();
  meta["scaler_size"] = b.scaler.size();
  meta["eigen_rank"] = b.eigen.rank;
  meta["layer_dims"] = b.mlp.layer_dims;
  meta["class_names"] = b.class_names;
  meta["perturbed"] = b.perturbed;
  const PrivacyReport privacy =
      MakePrivacyReport(PrivacyParams{b.config.epsilon, 1.0}, b.eigen.nc());
  meta["privacy"] = {{"per_index_epsilon", privacy.per_index_epsilon},
                     {"composed_epsilon", privacy.composed_epsilon},
                     {"per_index_sensitivity", privacy.per_index_sensitivity},
                     {"l2_sensitivity_bound", privacy.l2_sensitivity_bound}};
  const std::string text = meta.dump();

  internal::ByteWriter w;
  w.Raw(kBundleMagic);
  w.U64(text.size());
  w.Raw(text);
  w.Vector(b.eigen.mean_face);
  w.RowMajor(b.eigen.eigenfaces);
  w.Vector(b.eigen.eigenvalues);
  w.Vector(b.scaler.min);
  w.Vector(b.scaler.max);
  for (std::size_t l = 0; l < b.mlp.num_layers(); ++l) {
    w.RowMajor(b.mlp.weights[l]);
    w.Vector(b.mlp.biases[l]);
  }
  return w.Take();
}

inline ModelBundle DecodeBundle(const std::string& bytes) {
  if (bytes.size() < kBundleMagic.size() || bytes.compare(0, kBundleMagic.size(), kBundleMagic) != 0) {
    Fail(ErrorCode::kBadMagic, "missing PEEP1 header");
  }
  internal::ByteReader r(bytes);
  r.Raw(kBundleMagic.size());
  const nlohmann::json meta = internal::ParseMetadata(r);

  ModelBundle b;
  std::size_t nc = 0, scaler_size = 0;
  try {
    b.version = meta.at("version").get<int>();
    if (b.version != kBundleVersion) {
      Fail(ErrorCode::kVersionMismatch, "unsupported bundle version " + std::to_string(b.version));
    }
    const auto& cfg = meta.at("config");
    b.config.width = cfg.at("width").get<std::size_t>();
    b.config.height = cfg.at("height").get<std::size_t>();
    b.config.nc = cfg.at("nc").get<std::size_t>();
    b.config.imthresh = cfg.at("imthresh").get<std::size_t>();
    b.config.epsilon = cfg.at("epsilon").get<double>();
    b.config.seed = cfg.at("seed").get<std::uint64_t>();
    b.config.train_fraction = cfg.at("train_fraction").get<double>();
    const auto& shape = meta.at("shape");
    b.eigen.shape = {shape.at("width").get<std::size_t>(), shape.at("height").get<std::size_t>(),
                     shape.at("channels").get<std::size_t>()};
    nc = meta.at("nc").get<std::size_t>();
    scaler_size = meta.at("scaler_size").get<std::size_t>();
    b.eigen.rank = meta.at("eigen_rank").get<std::size_t>();
    b.mlp.layer_dims = meta.at("layer_dims").get<std::vector<std::size_t>>();
    b.class_names = meta.at("class_names").get<std::vector<std::string>>();
    b.perturbed = meta.at("perturbed").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kBadBundle, std::string("incomplete metadata: ") + e.what());
  }
  Require(b.mlp.layer_dims.size() >= 2, ErrorCode::kBadBundle, "layer_dims too short");

  const std::size_t d = b.eigen.shape.size();
  b.eigen.mean_face = r.Vector(d);
  b.eigen.eigenfaces = r.RowMajor(nc, d);
  b.eigen.eigenvalues = r.Vector(nc);
  b.scaler.min = r.Vector(scaler_size);
  b.scaler.max = r.Vector(scaler_size);
  for (std::size_t l = 0; l + 1 < b.mlp.layer_dims.size(); ++l) {
    b.mlp.weights.push_back(r.RowMajor(b.mlp.layer_dims[l], b.mlp.layer_dims[l + 1]));
    b.mlp.biases.push_back(r.Vector(b.mlp.layer_dims[l + 1]));
  }
  Require(r.AtEnd(), ErrorCode::kBadBundle, "trailing bytes after the last section");
  ValidateBundle(b);
  return b;
}

inline void SaveBundle(const ModelBundle& b, const std::filesystem::path& path) {
  ValidateBundle(b);
  internal::WriteFile(path, EncodeBundle(b));
}

inline ModelBundle LoadBundle(const std::filesystem::path& path) {
  return DecodeBundle(ReadFileBytes(path));
}

inline std::string EncodePartitionStats(const PartitionStats& s) {
  nlohmann::json meta{{"format", "PEEPS1"}, {"count", s.count}, {"dimension", s.dimension()}};
  const std::string text = meta.dump();
  internal::ByteWriter w;
  w.Raw(kStatsMagic);
  w.U64(text.size());
  w.Raw(text);
  w.Vector(s.mean);
  w.RowMajor(s.comoment);
  return w.Take();
}

inline PartitionStats DecodePartitionStats(const std::string& bytes) {
  if (bytes.size() < kStatsMagic.size() || bytes.compare(0, kStatsMagic.size(), kStatsMagic) != 0) {
    Fail(ErrorCode::kBadMagic, "missing PEEPS1 header");
  }
  internal::ByteReader r(bytes);
  r.Raw(kStatsMagic.size());
  const nlohmann::json meta = internal::ParseMetadata(r);
  PartitionStats s;
  std::size_t d = 0;
  try {
    s.count = meta.at("count").get<std::size_t>();
    d = meta.at("dimension").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kBadBundle, std::string("incomplete metadata: ") + e.what());
  }
  Require(s.count >= 1, ErrorCode::kEmptyPartition, "partition count must be >= 1");
  s.mean = r.Vector(d);
  s.comoment = r.RowMajor(d, d);
  Require(r.AtEnd(), ErrorCode::kBadBundle, "trailing bytes after the last section");
  return s;
}

inline void SavePartitionStats(const PartitionStats& s, const std::filesystem::path& path) {
  internal::WriteFile(path, EncodePartitionStats(s));
}

inline PartitionStats LoadPartitionStats(const std::filesystem::path& path) {
  return DecodePartitionStats(ReadFileBytes(path));
}

}  // namespace peep
