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
// peep: train, recognize, benchmark, attack and merge-demo.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "peep/peep.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct InternalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string data;
  double epsilon = 8.0;
  std::size_t nc = 128;
  std::size_t imthresh = 1;
  std::size_t width = 47;
  std::size_t height = 62;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  std::size_t partitions = 0;
  std::vector<std::size_t> hidden{512, 1024, 2014, 1024, 512};
  std::size_t max_epochs = 200;
};

void AddShapeOptions(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--width", o.width, "Target image width (irw)")->check(CLI::PositiveNumber);
  cmd->add_option("--height", o.height, "Target image height (irh)")->check(CLI::PositiveNumber);
  cmd->add_option("--imthresh", o.imthresh, "Minimum images per class")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "RNG seed");
}

void AddModelOptions(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--train-fraction", o.train_fraction, "Stratified training fraction")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--partitions", o.partitions,
                  "Fit the eigen basis by merging statistics of N partitions");
  cmd->add_option("--hidden", o.hidden, "Hidden layer widths")->delimiter(',');
  cmd->add_option("--max-epochs", o.max_epochs, "Training epoch cap")->check(CLI::PositiveNumber);
}

peep::PipelineConfig MakeConfig(const CommonOptions& o) {
  peep::PipelineConfig cfg;
  cfg.width = o.width;
  cfg.height = o.height;
  cfg.nc = o.nc;
  cfg.imthresh = o.imthresh;
  cfg.epsilon = o.epsilon;
  cfg.seed = o.seed;
  cfg.train_fraction = o.train_fraction;
  return cfg;
}

peep::TrainConfig MakeTrainConfig(const CommonOptions& o) {
  peep::TrainConfig t;
  t.hidden_layers = o.hidden;
  t.max_epochs = o.max_epochs;
  return t;
}

void WarnEpsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw CLI::ValidationError("--epsilon", "epsilon must be > 0");
  if (epsilon > 9.0) {
    std::cerr << "warning: epsilon " << epsilon
              << " is outside the recommended range 0 < epsilon <= 9; privacy is weak\n";
  }
}

void PrintDataset(const peep::LabeledDataset& ds) {
  std::cout << "dataset: " << ds.size() << " images, " << ds.num_classes() << " classes, "
            << ds.shape.width << "x" << ds.shape.height << "x" << ds.shape.channels << "\n";
}

void PrintPrivacy(const peep::PrivacyReport& p) {
  std::cout << "privacy: epsilon " << p.per_index_epsilon << " per index (sensitivity "
            << p.per_index_sensitivity << ", noise scale " << p.per_index_sensitivity / p.per_index_epsilon
            << "); " << p.nc << " indices compose to " << p.composed_epsilon
            << "; L2 sensitivity bound " << p.l2_sensitivity_bound << "\n";
}

void PrintReport(const peep::EvalReport& r, const std::vector<std::string>& names) {
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "accuracy " << r.accuracy << "  weighted precision " << r.weighted_precision
            << "  recall " << r.weighted_recall << "  f1 " << r.weighted_f1 << "\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::cout << "  " << std::left << std::setw(24) << names[k] << std::right << " p " << r.precision[k]
              << " r " << r.recall[k] << " f1 " << r.f1[k] << " n " << r.support[k] << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
}

int RunTrain(const CommonOptions& o, const std::string& out, bool no_privacy) {
  WarnEpsilon(o.epsilon);
  const peep::PipelineConfig cfg = MakeConfig(o);
  const peep::LabeledDataset ds = peep::BuildDataset(o.data, cfg);
  PrintDataset(ds);
  if (ds.shape.width != cfg.width || ds.shape.height != cfg.height) {
    std::cout << "resolution raised to corpus minimum " << ds.shape.width << "x" << ds.shape.height << "\n";
  }
  const peep::Split split = peep::StratifiedSplit(ds.labels, ds.num_classes(), cfg.train_fraction, cfg.seed);
  const peep::TrainedPipeline trained =
      peep::TrainPipeline(ds, split.train, cfg, {o.partitions, !no_privacy, MakeTrainConfig(o)});
  if (trained.clamp.effective != trained.clamp.requested) {
    std::cout << "nc clamped: requested " << trained.clamp.requested << ", after resolution guard "
              << trained.clamp.after_resolution_guard << ", effective " << trained.clamp.effective << "\n";
  }
  if (no_privacy) {
    std::cout << "privacy: disabled (baseline model)\n";
  } else {
    PrintPrivacy(trained.privacy);
  }
  std::cout << "epochs " << trained.loss_history.size() << ", final loss "
            << trained.loss_history.back() << "\n";
  if (!split.test.empty()) {
    const std::optional<double> eps = no_privacy ? std::nullopt : std::optional<double>(cfg.epsilon);
    PrintReport(peep::EvaluatePipeline(trained.bundle, ds, split.test, eps, cfg.seed), ds.class_names);
  }
  peep::SaveBundle(trained.bundle, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int RunRecognize(const std::string& bundle_path, const std::string& image_path,
                 std::optional<double> epsilon, bool no_privacy, std::uint64_t seed) {
  const peep::ModelBundle bundle = peep::LoadBundle(bundle_path);
  std::optional<double> eps = bundle.config.epsilon;
  if (epsilon) eps = epsilon;
  if (no_privacy) eps.reset();
  if (eps) WarnEpsilon(*eps);
  peep::Rng rng = peep::DeriveStream(seed, peep::kTestNoiseStream);
  const peep::Prediction p = peep::Recognize(bundle, peep::LoadImage(image_path), eps, rng);
  std::cout << "predicted " << bundle.class_names.at(static_cast<std::size_t>(p.label)) << " (class "
            << p.label << ")\n";
  for (std::size_t k = 0; k < bundle.class_names.size(); ++k) {
    std::cout << "  " << bundle.class_names[k] << " " << p.probabilities(static_cast<Eigen::Index>(k)) << "\n";
  }
  return 0;
}

int RunBenchmark(const CommonOptions& o, const std::vector<double>& epsilons,
                 const std::vector<std::size_t>& ncs, const std::vector<std::size_t>& imthreshes,
                 std::size_t repeats, std::size_t jobs, std::size_t timing_calls, bool no_baseline,
                 const std::string& out) {
  for (double e : epsilons) WarnEpsilon(e);
  peep::BenchmarkSpec spec;
  spec.epsilons = epsilons;
  spec.ncs = ncs;
  spec.imthreshes = imthreshes;
  spec.repeats = repeats;
  spec.baseline = !no_baseline;
  spec.jobs = jobs;
  spec.timing_calls = timing_calls;
  spec.partitions = o.partitions;
  spec.mlp = MakeTrainConfig(o);
  const auto rows = peep::RunBenchmark(o.data, MakeConfig(o), spec);
  std::ofstream file(out);
  if (!file) throw peep::Error(peep::ErrorCode::kIo, "cannot write " + out);
  file << peep::FormatBenchmarkCsv(rows);
  std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

std::optional<double> ParseEpsilon(const std::string& text) {
  if (text == "none" || text == "wp") return std::nullopt;
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size() && value > 0.0) return value;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError("--epsilon", "expected a positive number or 'none', got " + text);
}

std::string EpsilonLabel(const std::optional<double>& eps) {
  if (!eps) return "none";
  std::ostringstream s;
  s << *eps;
  return s.str();
}

int RunAttack(const CommonOptions& o, const std::string& bundle_path, const std::vector<std::string>& images,
              const std::vector<std::string>& eps_text, std::size_t seeds, const std::string& mode,
              const std::string& out) {
  std::vector<std::optional<double>> grid;
  for (const auto& t : eps_text) grid.push_back(ParseEpsilon(t));
  for (const auto& e : grid) {
    if (e) WarnEpsilon(*e);
  }
  std::optional<peep::ModelBundle> bundle;
  peep::EigenModel model;
  if (!bundle_path.empty()) {
    bundle = peep::LoadBundle(bundle_path);
    model = bundle->eigen;
  } else {
    if (mode == "deployment") throw CLI::ValidationError("--mode", "deployment mode needs --bundle");
    peep::PipelineConfig cfg = MakeConfig(o);
    const peep::LabeledDataset ds = peep::BuildDataset(o.data, cfg);
    PrintDataset(ds);
    model = peep::FitAttackModel(ds.images, o.nc);
    std::cout << "attack basis: " << model.nc() << " components from " << 2 * ds.size()
              << " images (with mirrors)\n";
  }

  fs::create_directories(out);
  std::ofstream csv(fs::path(out) / "rmse.csv");
  if (!csv) throw peep::Error(peep::ErrorCode::kIo, "cannot write " + out);
  csv << "image,epsilon,seed,rmse\n" << std::setprecision(10);
  peep::SaveImage(peep::Unflatten(model.mean_face, model.shape), fs::path(out) / "mean_face.pgm");

  for (const auto& path : images) {
    const peep::Image raw = peep::LoadImage(path);
    if (raw.channels != model.shape.channels) {
      throw peep::Error(peep::ErrorCode::kDimensionMismatch, "image channel count does not match the model");
    }
    const peep::Image img = peep::ResizeBilinear(raw, model.shape.width, model.shape.height);
    const std::string stem = fs::path(path).stem().string();
    const std::string ext = model.shape.channels == 1 ? ".pgm" : ".ppm";
    peep::Image grid_image(model.shape.width, model.shape.height * (grid.size() + 1), model.shape.channels);
    std::copy(img.pixels.begin(), img.pixels.end(), grid_image.pixels.begin());

    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (std::size_t s = 0; s < seeds; ++s) {
        peep::Rng rng = peep::DeriveStream(o.seed + s, peep::kAttackStream);
        const peep::ReconstructionResult r =
            mode == "deployment" ? peep::AttackDeployment(model, bundle->scaler, img, grid[g], rng)
                                 : peep::AttackPipeline(model, img, grid[g], rng);
        csv << stem << ',' << EpsilonLabel(grid[g]) << ',' << o.seed + s << ',' << r.rmse << '\n';
        if (s == 0) {
          peep::SaveImage(r.image, fs::path(out) / (stem + "_eps_" + EpsilonLabel(grid[g]) + ext));
          std::copy(r.image.pixels.begin(), r.image.pixels.end(),
                    grid_image.pixels.begin() + static_cast<std::ptrdiff_t>((g + 1) * img.pixels.size()));
        }
      }
    }
    peep::SaveImage(grid_image, fs::path(out) / (stem + "_grid" + ext));
  }
  std::cout << "wrote " << grid.size() * seeds * images.size() << " rows to "
            << (fs::path(out) / "rmse.csv").string() << "\n";
  return 0;
}

int RunMergeDemo(const CommonOptions& o, const std::string& out) {
  const peep::PipelineConfig cfg = MakeConfig(o);
  const peep::LabeledDataset ds = peep::BuildDataset(o.data, cfg);
  PrintDataset(ds);
  const Eigen::MatrixXd samples = ds.SampleMatrix();
  const std::size_t parts = std::max<std::size_t>(1, o.partitions);
  const auto blocks = peep::PartitionRows(samples, parts);

  // Each partition's statistics go through a file, as a separate node would
  // ship them to the coordinator.
  fs::create_directories(out);
  std::vector<fs::path> files;
  for (std::size_t p = 0; p < blocks.size(); ++p) {
    files.push_back(fs::path(out) / ("partition_" + std::to_string(p) + ".stats"));
    peep::SavePartitionStats(peep::ComputePartitionStats(blocks[p]), files.back());
  }
  std::vector<peep::PartitionStats> loaded;
  for (const auto& f : files) loaded.push_back(peep::LoadPartitionStats(f));
  const peep::PartitionStats merged = peep::FoldStats(loaded);
  const peep::PartitionStats batch = peep::ComputePartitionStats(samples);

  const double mean_err = (merged.mean - batch.mean).cwiseAbs().maxCoeff();
  const double cov_scale = std::max(batch.SampleCovariance().cwiseAbs().maxCoeff(), 1e-300);
  const double cov_err = (merged.SampleCovariance() - batch.SampleCovariance()).cwiseAbs().maxCoeff() / cov_scale;

  const std::size_t nc = peep::ClampComponents(o.nc, ds.shape.width, ds.shape.height, ds.size(), ds.shape.size()).effective;
  const peep::EigenModel incremental = peep::FitEigenfacesFromStats(merged, nc, ds.shape);
  const peep::EigenModel gram = peep::FitEigenfaces(samples, nc, ds.shape);
  double eig_err = 0.0;
  const double top = std::max(gram.eigenvalues(0), 1e-300);
  for (Eigen::Index k = 0; k < gram.eigenvalues.size(); ++k) {
    eig_err = std::max(eig_err, std::abs(incremental.eigenvalues(k) - gram.eigenvalues(k)) / top);
  }

  std::cout << std::scientific << std::setprecision(3) << "partitions " << blocks.size() << ", " << ds.size()
            << " images, d " << ds.shape.size() << "\n"
            << "max |mean merged - batch|          " << mean_err << " (limit 1e-12)\n"
            << "max rel |cov merged - batch|       " << cov_err << " (limit 1e-9)\n"
            << "max rel |eigenvalue incr - batch|  " << eig_err << " (limit 1e-6)\n";
  if (!(mean_err <= 1e-12 && cov_err <= 1e-9 && eig_err <= 1e-6)) {
    throw InternalFailure("merged statistics disagree with the batch computation");
  }
  std::cout << "merge-demo: batch equivalence holds\n";
  return 0;
}

int RunSynth(const std::string& out, const peep::SynthSpec& spec) {
  peep::WriteSyntheticCorpus(out, spec);
  std::cout << "wrote " << spec.classes * spec.per_class << " images in " << spec.classes << " classes to "
            << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PEEP: face recognition on locally differentially private eigenface vectors"};
  app.require_subcommand(1);

  CommonOptions o;
  std::string out, bundle_path, image_path, mode = "pixel";
  bool no_privacy = false, no_baseline = false;
  std::optional<double> recognize_eps;
  std::vector<double> bench_eps{0.5, 2, 4, 8};
  std::vector<std::size_t> bench_nc{128}, bench_imthresh{1};
  std::size_t repeats = 5, jobs = 1, timing_calls = 100, seeds = 20;
  std::vector<std::string> attack_images, attack_eps{"none", "8", "4", "0.5"};
  peep::SynthSpec synth;

  auto* train = app.add_subcommand("train", "Train a private recognition model and write a bundle");
  train->add_option("--data", o.data, "Dataset root (one directory per class)")->required();
  train->add_option("--out", out, "Bundle path")->required();
  train->add_option("--epsilon", o.epsilon, "Privacy budget per index");
  train->add_option("--nc", o.nc, "Eigenface components")->check(CLI::PositiveNumber);
  train->add_flag("--no-privacy", no_privacy, "Skip perturbation (baseline only)");
  AddShapeOptions(train, o);
  AddModelOptions(train, o);

  auto* recognize = app.add_subcommand("recognize", "Classify one image with a bundle");
  recognize->add_option("--bundle", bundle_path, "Bundle path")->required();
  recognize->add_option("--image", image_path, "PGM/PPM image")->required();
  recognize->add_option("--epsilon", recognize_eps, "Privacy budget (default: the bundle's)");
  recognize->add_option("--seed", o.seed, "RNG seed");
  recognize->add_flag("--no-privacy", no_privacy, "Do not perturb the query");

  auto* bench = app.add_subcommand("benchmark", "Sweep epsilon / nc / imthresh and write CSV");
  bench->add_option("--data", o.data, "Dataset root")->required();
  bench->add_option("--out", out, "CSV path")->required();
  bench->add_option("--epsilon", bench_eps, "Epsilon grid")->delimiter(',');
  bench->add_option("--nc", bench_nc, "Component grid")->delimiter(',');
  bench->add_option("--imthresh", bench_imthresh, "imthresh grid")->delimiter(',');
  bench->add_option("--repeats", repeats, "Repeats per grid point")->check(CLI::PositiveNumber);
  bench->add_option("--jobs", jobs, "Parallel grid points")->check(CLI::PositiveNumber);
  bench->add_option("--timing-calls", timing_calls, "Calls per timing measurement (>= 100)");
  bench->add_flag("--no-baseline", no_baseline, "Omit the no-privacy rows");
  bench->add_option("--width", o.width, "Target image width")->check(CLI::PositiveNumber);
  bench->add_option("--height", o.height, "Target image height")->check(CLI::PositiveNumber);
  bench->add_option("--seed", o.seed, "Base seed; repeat r uses seed + r");
  AddModelOptions(bench, o);

  auto* attack = app.add_subcommand("attack", "Reconstruction attack over an epsilon grid");
  attack->add_option("--bundle", bundle_path, "Bundle whose eigen basis is attacked");
  attack->add_option("--data", o.data, "Corpus for a mirror-augmented attack basis");
  attack->add_option("--nc", o.nc, "Attack basis components (with --data)")->check(CLI::PositiveNumber);
  attack->add_option("--image", attack_images, "Target images")->required();
  attack->add_option("--epsilon", attack_eps, "Epsilon grid; 'none' for no noise")->delimiter(',');
  attack->add_option("--seeds", seeds, "Trials per epsilon")->check(CLI::PositiveNumber);
  attack->add_option("--mode", mode, "pixel (centered pixels) or deployment (released vectors)")
      ->check(CLI::IsMember({"pixel", "deployment"}));
  attack->add_option("--out", out, "Output directory")->required();
  AddShapeOptions(attack, o);

  auto* merge = app.add_subcommand("merge-demo", "Merge file-backed partition statistics and check batch equivalence");
  merge->add_option("--data", o.data, "Dataset root")->required();
  merge->add_option("--partitions", o.partitions, "Number of partitions")->check(CLI::PositiveNumber);
  merge->add_option("--nc", o.nc, "Components to compare")->check(CLI::PositiveNumber);
  merge->add_option("--out", out, "Directory for partition files")->required();
  AddShapeOptions(merge, o);

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic face corpus");
  synth_cmd->add_option("--out", out, "Corpus root")->required();
  synth_cmd->add_option("--classes", synth.classes, "Identities")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--per-class", synth.per_class, "Images per identity")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--width", synth.width, "Width")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--height", synth.height, "Height")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--channels", synth.channels, "1 or 3")->check(CLI::IsMember({1, 3}));
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return RunTrain(o, out, no_privacy);
    if (*recognize) return RunRecognize(bundle_path, image_path, recognize_eps, no_privacy, o.seed);
    if (*bench) {
      return RunBenchmark(o, bench_eps, bench_nc, bench_imthresh, repeats, jobs, timing_calls, no_baseline, out);
    }
    if (*attack) {
      if (bundle_path.empty() == o.data.empty()) {
        throw CLI::ValidationError("attack", "give exactly one of --bundle or --data");
      }
      return RunAttack(o, bundle_path, attack_images, attack_eps, seeds, mode, out);
    }
    if (*merge) return RunMergeDemo(o, out);
    if (*synth_cmd) return RunSynth(out, synth);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InternalFailure& e) {
    std::cerr << "internal check failed: " << e.what() << "\n";
    return kExitInternal;
  } catch (const peep::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == peep::ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
