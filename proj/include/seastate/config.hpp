#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seastate/augment.hpp"
#include "seastate/dataset.hpp"
#include "seastate/model.hpp"
#include "seastate/synth.hpp"
#include "seastate/trainer.hpp"

namespace seastate {

enum class DatasetSource { sessions, synth, manifest };

struct DatasetSection {
  DatasetSource source = DatasetSource::synth;
  std::string session_index;
  /// Existing manifest.tsv; its directory holds the crops.
  std::string manifest;
  std::string name = "dataset";
  Strategy strategy = Strategy::LL;
  SplitTargets targets;
  /// "label:train/val/test" entries separated by commas; overrides `targets`.
  std::string class_targets;
  SplitMode split_mode = SplitMode::trailing_ranges;
  int ll_offset_x = 0;
  int ll_offset_y = 0;
  LabelRange label_range;
  bool native = true;
  std::uint64_t seed = 0;
};

struct ModelSection {
  Architecture architecture = Architecture::surrogate_cnn;
  int num_classes = 8;
  std::string asset_registry;
  int vit_head_width = 512;
};

struct EvaluationSection {
  Split split = Split::test;
  std::string foreign_manifest;
  /// Label range of the foreign dataset; the model's range is the source.
  LabelRange foreign_labels{1, 4};
  int decimals = 3;
  int cross_decimals = 2;
};

struct AblationSection {
  std::vector<int> sizes{10, 20, 40, 80, 160, 375, 750};
};

struct ProfilingSection {
  int batch_size = 32;
  int num_batches = 8;
  int warmup_batches = 2;
};

struct RunConfig {
  std::string output_dir = "runs";
  int threads = 1;
  DatasetSection dataset;
  SynthConfig synth;
  ModelSection model;
  TrainConfig training;
  EvaluationSection evaluation;
  AblationSection ablation;
  ProfilingSection profiling;

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

/// Parses the INI text; unknown sections or keys are rejected with ConfigError.
RunConfig parse_run_config(const std::string& text);
RunConfig read_run_config(const std::filesystem::path& path);
/// Every key, including defaults.
std::string serialize_run_config(const RunConfig& config);
void write_run_config(const std::filesystem::path& path, const RunConfig& config);

/// Applies one "section.key=value" override.
void apply_override(RunConfig& config, const std::string& assignment);
/// All "section.key" names understood by the parser.
std::vector<std::string> config_keys();

TargetMap targets_for(const DatasetSection& dataset);

}  // namespace seastate
