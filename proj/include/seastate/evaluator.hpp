#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seastate/dataset.hpp"
#include "seastate/image_set.hpp"
#include "seastate/model.hpp"

namespace seastate {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes, both ordered as `labels`.
struct ConfusionMatrix {
  std::vector<int> labels;
  CountMatrix counts;

  int size() const noexcept { return static_cast<int>(labels.size()); }
  std::int64_t total() const { return counts.sum(); }
  std::int64_t support(int i) const { return counts.row(i).sum(); }
  std::int64_t predicted(int i) const { return counts.col(i).sum(); }
  bool operator==(const ConfusionMatrix& other) const {
    return labels == other.labels && counts == other.counts;
  }
};

std::vector<int> labels_of(const LabelRange& range);

/// Throws LabelError naming the first label outside `label_space`.
ConfusionMatrix confusion_matrix(std::span<const int> true_labels,
                                 std::span<const int> predicted_labels,
                                 const std::vector<int>& label_space);

struct ClassMetrics {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  /// No predictions of this class: precision reported as 0.
  bool precision_undefined = false;
  /// No true samples of this class: recall reported as 0.
  bool recall_undefined = false;
};

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<ClassMetrics> classes;
  double accuracy = 0.0;
  AveragedMetrics macro;
  AveragedMetrics weighted;
  ConfusionMatrix confusion;
};

/// Throws EmptyReportError when the matrix holds no samples.
EvalReport aggregate(const ConfusionMatrix& cm);

/// Mean of a per-class metric.
double macro_average(std::span<const double> values);
/// Support-weighted mean of a per-class metric.
double weighted_average(std::span<const double> values, std::span<const std::int64_t> supports);

/// Relates a model's label range to a foreign dataset's.
struct LabelMapping {
  LabelRange source;
  LabelRange target;

  /// Sorted union of both ranges.
  std::vector<int> union_space() const;
  std::vector<int> shared() const;
};

struct Evaluation {
  EvalReport report;
  std::vector<int> true_labels;
  std::vector<int> predicted_labels;
  Eigen::MatrixXd probabilities;
};

/// Without a mapping, the dataset's label range must equal the model's.
Evaluation evaluate_model(const ClassifierModel& model, const LabeledImageSet& images,
                          const LabelRange& dataset_labels,
                          const std::optional<LabelMapping>& mapping = std::nullopt);
Evaluation evaluate_model(const ClassifierModel& model, const DatasetManifest& manifest,
                          const std::filesystem::path& root, Split split,
                          const std::optional<LabelMapping>& mapping = std::nullopt);

/// Home value minus foreign value for accuracy and each weighted average.
struct PerformanceDrop {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct AggregateScores {
  double accuracy = 0.0;
  AveragedMetrics weighted;
};

PerformanceDrop performance_drop(const AggregateScores& home, const AggregateScores& foreign);

struct CrossEvalReport {
  EvalReport home;
  EvalReport foreign;
  PerformanceDrop drop;
};

CrossEvalReport cross_dataset_eval(const ClassifierModel& model, const LabeledImageSet& home,
                                   const LabelRange& home_labels, const LabeledImageSet& foreign,
                                   const LabelMapping& mapping);

/// Per-class table followed by accuracy, macro and weighted rows.
std::string format_eval_report(const EvalReport& report, int decimals = 3);
std::string format_cross_eval_report(const CrossEvalReport& report, int decimals = 2);
/// Tab-delimited integer grid with a header row of predicted labels.
std::string format_confusion_tsv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_tsv(const std::string& text);

std::string eval_report_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
std::string cross_eval_report_json(const CrossEvalReport& report);

/// Writes <stem>.txt, <stem>.json and <stem>_confusion.tsv into `dir`.
void write_eval_report(const std::filesystem::path& dir, const std::string& stem,
                       const EvalReport& report, int decimals = 3);

}  // namespace seastate
