#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seastate/augment.hpp"
#include "seastate/evaluator.hpp"
#include "seastate/image_set.hpp"
#include "seastate/model.hpp"
#include "seastate/optim.hpp"

namespace seastate {

struct StageOneConfig {
  double lr = 1e-4;
  int epochs = 30;
  AdamConfig adam;
  bool operator==(const StageOneConfig&) const = default;
};

struct StageTwoConfig {
  PlateauConfig plateau;
  /// Defaults to the architecture's stage-2 epoch budget.
  std::optional<int> epochs;
  RmsPropConfig rmsprop;
  bool operator==(const StageTwoConfig&) const = default;
};

enum class CheckpointChoice { best, final };

struct TrainConfig {
  StageOneConfig stage1;
  StageTwoConfig stage2;
  /// Defaults to the architecture's batch size.
  std::optional<int> batch_size;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  CheckpointChoice evaluate_checkpoint = CheckpointChoice::best;
  /// Worker threads for augmentation; results do not depend on this.
  int threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  Stage stage = Stage::head_only;
  int epoch = 0;  ///< 1-based within the stage
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> records;
  bool aborted = false;
  std::string abort_reason;

  std::size_t count(Stage stage) const;
  double total_seconds() const;
};

/// One JSON object per line; an abort adds a final {"aborted": ...} line.
std::string serialize_training_log(const TrainingLog& log);
TrainingLog parse_training_log(const std::string& text);
void write_training_log(const std::filesystem::path& path, const TrainingLog& log);
TrainingLog read_training_log(const std::filesystem::path& path);

std::string train_config_json(const TrainConfig& config, const ArchitectureSpec& spec);

struct TrainData {
  LabeledImageSet train;
  LabeledImageSet val;
  LabelRange labels;
};

struct ExperimentResult {
  std::filesystem::path directory;
  /// Bundle chosen for evaluation (checkpoints/best or checkpoints/final).
  std::filesystem::path bundle;
  CheckpointChoice selected = CheckpointChoice::best;
  int best_epoch = 0;  ///< index into log.records
  TrainingLog log;
  std::optional<EvalReport> test_report;
  std::string config_snapshot;
  std::string manifest_hash;
};

/// Called after every epoch; useful for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Head-only Adam stage followed by partial fine-tuning with RMSProp and a
/// plateau schedule. Writes the log, config snapshot and both checkpoints to
/// `out_dir`. On a non-finite loss the last good weights are saved to
/// checkpoints/last_good, the log is marked aborted, and DivergenceError is thrown.
ExperimentResult train_two_stage(ClassifierModel& model, const TrainData& data,
                                 const TrainConfig& config, const std::filesystem::path& out_dir,
                                 const EpochCallback& on_epoch = {});

/// Loads the manifest splits, builds the classifier and trains it; evaluates
/// the selected checkpoint on the test split when one exists.
ExperimentResult train_two_stage(const ArchitectureSpec& spec, const DatasetManifest& manifest,
                                 const std::filesystem::path& dataset_root,
                                 const AssetRegistry& assets, const ModelOptions& model_options,
                                 const TrainConfig& config, const std::filesystem::path& out_dir,
                                 const EpochCallback& on_epoch = {});

struct AblationPoint {
  int size = 0;  ///< training images per class
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> class_f1;
  double training_seconds = 0.0;
};

struct AblationCurve {
  std::vector<AblationPoint> points;
  std::vector<int> labels;
};

/// Trains one independent model per size on nested class-balanced subsets and
/// evaluates each on the same test split.
AblationCurve ablate_training_size(const ArchitectureSpec& spec, const DatasetManifest& manifest,
                                   const std::filesystem::path& dataset_root,
                                   const AssetRegistry& assets, const ModelOptions& model_options,
                                   const std::vector<int>& sizes, const TrainConfig& config,
                                   const std::filesystem::path& out_dir,
                                   const EpochCallback& on_epoch = {});

std::string serialize_ablation(const AblationCurve& curve);
AblationCurve parse_ablation(const std::string& text);

}  // namespace seastate
