#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seastate/image_set.hpp"
#include "seastate/model.hpp"
#include "seastate/trainer.hpp"

namespace seastate {

struct MemorySample {
  std::string point;             ///< e.g. "after_load"
  std::optional<double> rss_mb;  ///< resident set size
  std::optional<double> peak_mb; ///< high-water mark so far
};

struct ResourceProfile {
  std::string model;
  int input_size = 224;
  int batch_size = 0;
  std::string hardware;

  // Training.
  std::optional<int> epochs;
  std::optional<double> total_training_seconds;
  std::optional<double> seconds_per_epoch;

  // Inference.
  std::optional<int> batches;
  int warmup_batches = 0;
  /// Images per second including decode-to-float and center cropping.
  std::optional<double> throughput;
  /// Images per second of the forward pass alone.
  std::optional<double> compute_throughput;
  std::optional<double> parameter_mb;
  std::optional<double> model_memory_mb;
  std::optional<double> peak_memory_mb;
  std::string memory_source = "unavailable";
  std::vector<MemorySample> memory_samples;
};

/// Median epoch duration (first epoch excluded when there are several) and total.
/// Throws MeasurementError when the log has no timing data.
ResourceProfile profile_training(const TrainingLog& log, const ArchitectureSpec& spec,
                                 int batch_size);

/// Current resident and peak memory from /proc/self/status; empty when unavailable.
MemorySample sample_memory(const std::string& point);

std::string hardware_descriptor();

/// Measures batched inference after `warmup_batches` unmeasured batches. Images
/// come from `inputs` (cycled) or, when empty, from seeded noise. Holds a
/// process-wide measurement lock; a concurrent call throws MeasurementError.
ResourceProfile profile_inference(const ClassifierModel& model, const LabeledImageSet& inputs,
                                  int batch_size, int num_batches, int warmup_batches,
                                  const std::optional<MemorySample>& after_load = std::nullopt);
ResourceProfile profile_inference(const std::filesystem::path& bundle, const LabeledImageSet& inputs,
                                  int batch_size, int num_batches, int warmup_batches);

/// Renders "h:mm".
std::string format_hours_minutes(double seconds);

/// Training and inference tables; unavailable values render as "n/a".
std::string format_training_table(const std::vector<ResourceProfile>& profiles);
std::string format_inference_table(const std::vector<ResourceProfile>& profiles);
std::string profile_json(const ResourceProfile& profile);
ResourceProfile profile_from_json(const std::string& text);

/// Column titles of the two tables, in order.
const std::vector<std::string>& training_table_columns();
const std::vector<std::string>& inference_table_columns();

}  // namespace seastate
