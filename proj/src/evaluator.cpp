#include "seastate/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"
#include "seastate/augment.hpp"
#include "seastate/errors.hpp"
#include "seastate/nn.hpp"
#include "text_util.hpp"

using json = nlohmann::json;

namespace seastate {

std::vector<int> labels_of(const LabelRange& range) {
  std::vector<int> labels(static_cast<std::size_t>(range.count()));
  std::iota(labels.begin(), labels.end(), range.min);
  return labels;
}

ConfusionMatrix confusion_matrix(std::span<const int> true_labels,
                                 std::span<const int> predicted_labels,
                                 const std::vector<int>& label_space) {
  if (true_labels.size() != predicted_labels.size())
    throw DataError(fmt::format("{} true labels but {} predictions", true_labels.size(),
                                predicted_labels.size()));
  ConfusionMatrix cm{label_space, CountMatrix::Zero(static_cast<Eigen::Index>(label_space.size()),
                                                    static_cast<Eigen::Index>(label_space.size()))};
  auto index = [&](int label, const char* role) {
    const auto it = std::find(label_space.begin(), label_space.end(), label);
    if (it == label_space.end())
      throw LabelError(fmt::format("{} label {} is outside the label space", role, label));
    return static_cast<Eigen::Index>(it - label_space.begin());
  };
  for (std::size_t k = 0; k < true_labels.size(); ++k)
    ++cm.counts(index(true_labels[k], "true"), index(predicted_labels[k], "predicted"));
  return cm;
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out;
  for (int j = 0; j < cm.size(); ++j) {
    ClassMetrics m;
    m.label = cm.labels[static_cast<std::size_t>(j)];
    const auto tp = cm.counts(j, j);
    const auto predicted = cm.predicted(j);
    m.support = cm.support(j);
    m.precision_undefined = predicted == 0;
    m.recall_undefined = m.support == 0;
    m.precision = m.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    m.recall = m.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(m.support);
    const double sum = m.precision + m.recall;
    m.f1 = sum == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / sum;
    out.push_back(m);
  }
  return out;
}

double macro_average(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double weighted_average(std::span<const double> values, std::span<const std::int64_t> supports) {
  if (values.size() != supports.size())
    throw std::invalid_argument(fmt::format("{} values but {} supports", values.size(), supports.size()));
  const auto total = std::accumulate(supports.begin(), supports.end(), std::int64_t{0});
  if (total == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) sum += values[i] * static_cast<double>(supports[i]);
  return sum / static_cast<double>(total);
}

EvalReport aggregate(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw EmptyReportError("confusion matrix holds no samples");
  EvalReport r;
  r.confusion = cm;
  r.classes = per_class_metrics(cm);
  r.accuracy = static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
  std::vector<double> p, rc, f;
  std::vector<std::int64_t> s;
  for (const auto& m : r.classes) {
    p.push_back(m.precision);
    rc.push_back(m.recall);
    f.push_back(m.f1);
    s.push_back(m.support);
  }
  r.macro = {macro_average(p), macro_average(rc), macro_average(f)};
  r.weighted = {weighted_average(p, s), weighted_average(rc, s), weighted_average(f, s)};
  return r;
}

std::vector<int> LabelMapping::union_space() const {
  std::set<int> all;
  for (int l : labels_of(source)) all.insert(l);
  for (int l : labels_of(target)) all.insert(l);
  return {all.begin(), all.end()};
}

std::vector<int> LabelMapping::shared() const {
  std::vector<int> out;
  for (int l : labels_of(source))
    if (target.contains(l)) out.push_back(l);
  return out;
}

Evaluation evaluate_model(const ClassifierModel& model, const LabeledImageSet& images,
                          const LabelRange& dataset_labels,
                          const std::optional<LabelMapping>& mapping) {
  std::vector<int> space;
  if (mapping) {
    if (mapping->source != model.label_range())
      throw MappingRequiredError("mapping source range does not match the model");
    if (mapping->target != dataset_labels)
      throw MappingRequiredError("mapping target range does not match the dataset");
    space = mapping->union_space();
  } else {
    if (dataset_labels != model.label_range())
      throw MappingRequiredError(fmt::format("model labels {}-{} vs dataset labels {}-{}",
                                             model.label_range().min, model.label_range().max,
                                             dataset_labels.min, dataset_labels.max));
    space = labels_of(dataset_labels);
  }
  if (images.empty()) throw EmptyReportError("evaluation split is empty");

  Evaluation ev;
  ev.true_labels = images.labels;
  ev.probabilities.resize(static_cast<Eigen::Index>(images.size()), model.num_classes());
  const int size = model.spec().input_size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image input = prepare_eval(to_float(images.images[i]), size);
    const auto row = static_cast<Eigen::Index>(i);
    ev.probabilities.row(row) = nn::softmax(model.logits(input).cast<double>()).transpose();
    ev.predicted_labels.push_back(predicted_label(model, ev.probabilities.row(row)));
  }
  ev.report = aggregate(confusion_matrix(ev.true_labels, ev.predicted_labels, space));
  return ev;
}

Evaluation evaluate_model(const ClassifierModel& model, const DatasetManifest& manifest,
                          const std::filesystem::path& root, Split split,
                          const std::optional<LabelMapping>& mapping) {
  return evaluate_model(model, load_split(manifest, root, split), manifest.label_range, mapping);
}

PerformanceDrop performance_drop(const AggregateScores& home, const AggregateScores& foreign) {
  return {home.accuracy - foreign.accuracy, home.weighted.precision - foreign.weighted.precision,
          home.weighted.recall - foreign.weighted.recall, home.weighted.f1 - foreign.weighted.f1};
}

CrossEvalReport cross_dataset_eval(const ClassifierModel& model, const LabeledImageSet& home,
                                   const LabelRange& home_labels, const LabeledImageSet& foreign,
                                   const LabelMapping& mapping) {
  // Both reports share the union label space so rows line up.
  const LabelMapping home_mapping{mapping.source, home_labels};
  const LabelRange full{std::min(mapping.source.min, mapping.target.min),
                        std::max(mapping.source.max, mapping.target.max)};
  auto widen = [&](const Evaluation& ev) {
    std::vector<int> space = labels_of(full);
    return aggregate(confusion_matrix(ev.true_labels, ev.predicted_labels, space));
  };
  const auto h = evaluate_model(model, home, home_labels, home_mapping);
  const auto f = evaluate_model(model, foreign, mapping.target, mapping);
  CrossEvalReport r;
  r.home = widen(h);
  r.foreign = widen(f);
  r.drop = performance_drop({r.home.accuracy, r.home.weighted}, {r.foreign.accuracy, r.foreign.weighted});
  return r;
}

std::string format_eval_report(const EvalReport& report, int decimals) {
  std::string out = fmt::format("{:<14}{:>10}{:>10}{:>10}{:>10}\n", "class", "precision", "recall",
                                "f1", "support");
  auto num = [&](double v) { return fmt::format("{:>10.{}f}", v, decimals); };
  for (const auto& m : report.classes)
    out += fmt::format("{:<14}{}{}{}{:>10}\n", fmt::format("{} Bft", m.label), num(m.precision),
                       num(m.recall), num(m.f1), m.support);
  const auto total = report.confusion.total();
  out += fmt::format("{:<14}{:>10}{:>10}{}{:>10}\n", "accuracy", "", "", num(report.accuracy), total);
  out += fmt::format("{:<14}{}{}{}{:>10}\n", "macro avg", num(report.macro.precision),
                     num(report.macro.recall), num(report.macro.f1), total);
  out += fmt::format("{:<14}{}{}{}{:>10}\n", "weighted avg", num(report.weighted.precision),
                     num(report.weighted.recall), num(report.weighted.f1), total);
  return out;
}

std::string format_cross_eval_report(const CrossEvalReport& report, int decimals) {
  auto num = [&](double v) { return fmt::format("{:>12.{}f}", v, decimals); };
  std::string out = fmt::format("{:<20}{:>12}{:>12}{:>12}\n", "metric", "home", "foreign", "drop");
  out += fmt::format("{:<20}{}{}{}\n", "accuracy", num(report.home.accuracy),
                     num(report.foreign.accuracy), num(report.drop.accuracy));
  out += fmt::format("{:<20}{}{}{}\n", "weighted precision", num(report.home.weighted.precision),
                     num(report.foreign.weighted.precision), num(report.drop.precision));
  out += fmt::format("{:<20}{}{}{}\n", "weighted recall", num(report.home.weighted.recall),
                     num(report.foreign.weighted.recall), num(report.drop.recall));
  out += fmt::format("{:<20}{}{}{}\n", "weighted f1", num(report.home.weighted.f1),
                     num(report.foreign.weighted.f1), num(report.drop.f1));
  out += "\nforeign set\n" + format_eval_report(report.foreign, decimals);
  return out;
}

namespace {

template <typename T>
T grid_number(const std::string& text) {
  const auto v = detail::parse_number<T>(text);
  if (!v) throw DataError("confusion matrix holds a non-integer field '" + text + "'");
  return *v;
}

}  // namespace

std::string format_confusion_tsv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (int l : cm.labels) out += fmt::format("\t{}", l);
  out += '\n';
  for (int i = 0; i < cm.size(); ++i) {
    out += std::to_string(cm.labels[static_cast<std::size_t>(i)]);
    for (int j = 0; j < cm.size(); ++j) out += fmt::format("\t{}", cm.counts(i, j));
    out += '\n';
  }
  return out;
}

ConfusionMatrix parse_confusion_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty confusion matrix");
  auto header = detail::split(line, '\t');
  ConfusionMatrix cm;
  for (std::size_t i = 1; i < header.size(); ++i)
    cm.labels.push_back(grid_number<int>(header[i]));
  const auto n = static_cast<Eigen::Index>(cm.labels.size());
  cm.counts = CountMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError("confusion matrix has too few rows");
    const auto f = detail::split(line, '\t');
    if (static_cast<Eigen::Index>(f.size()) != n + 1 ||
        grid_number<int>(f[0]) != cm.labels[static_cast<std::size_t>(i)])
      throw DataError("malformed confusion matrix row " + std::to_string(i + 1));
    for (Eigen::Index j = 0; j < n; ++j)
      cm.counts(i, j) = grid_number<std::int64_t>(f[static_cast<std::size_t>(j + 1)]);
  }
  return cm;
}

namespace {

json averaged_json(const AveragedMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

json report_json(const EvalReport& r) {
  json classes = json::array();
  for (const auto& m : r.classes)
    classes.push_back({{"label", m.label},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"precision_undefined", m.precision_undefined},
                       {"recall_undefined", m.recall_undefined}});
  json counts = json::array();
  for (int i = 0; i < r.confusion.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < r.confusion.size(); ++j) row.push_back(r.confusion.counts(i, j));
    counts.push_back(row);
  }
  return {{"accuracy", r.accuracy},
          {"macro", averaged_json(r.macro)},
          {"weighted", averaged_json(r.weighted)},
          {"classes", classes},
          {"confusion", {{"labels", r.confusion.labels}, {"counts", counts}}}};
}

}  // namespace

std::string eval_report_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

EvalReport eval_report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ConfusionMatrix cm;
    cm.labels = j.at("confusion").at("labels").get<std::vector<int>>();
    const auto n = static_cast<Eigen::Index>(cm.labels.size());
    cm.counts = CountMatrix::Zero(n, n);
    const auto& rows = j.at("confusion").at("counts");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j2 = 0; j2 < n; ++j2)
        cm.counts(i, j2) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j2)).get<std::int64_t>();
    return aggregate(cm);
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string cross_eval_report_json(const CrossEvalReport& report) {
  const json j{{"home", report_json(report.home)},
               {"foreign", report_json(report.foreign)},
               {"drop",
                {{"accuracy", report.drop.accuracy},
                 {"precision", report.drop.precision},
                 {"recall", report.drop.recall},
                 {"f1", report.drop.f1}}}};
  return j.dump(2) + "\n";
}

void write_eval_report(const std::filesystem::path& dir, const std::string& stem,
                       const EvalReport& report, int decimals) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / (stem + ".txt"), format_eval_report(report, decimals));
  detail::write_text(dir / (stem + ".json"), eval_report_json(report));
  detail::write_text(dir / (stem + "_confusion.tsv"), format_confusion_tsv(report.confusion));
}

}  // namespace seastate
