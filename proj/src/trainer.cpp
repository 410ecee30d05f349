#include "seastate/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "seastate/errors.hpp"
#include "seastate/nn.hpp"
#include "seastate/rng.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace seastate {

void TrainConfig::validate() const {
  if (!(stage1.lr > 0)) throw ConfigError("training.stage1_lr must be > 0");
  if (stage1.epochs < 1) throw ConfigError("training.stage1_epochs must be >= 1");
  stage2.plateau.validate();
  if (stage2.epochs && *stage2.epochs < 1) throw ConfigError("training.stage2_epochs must be >= 1");
  if (batch_size && *batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (threads < 1) throw ConfigError("training.threads must be >= 1");
  augment.validate();
}

std::size_t TrainingLog::count(Stage stage) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.stage == stage; }));
}

double TrainingLog::total_seconds() const {
  double total = 0.0;
  for (const auto& r : records) total += r.seconds;
  return total;
}

std::string serialize_training_log(const TrainingLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    const json j{{"stage", to_string(r.stage)},         {"epoch", r.epoch},
                 {"train_loss", r.train_loss},          {"train_accuracy", r.train_accuracy},
                 {"val_loss", r.val_loss},              {"val_accuracy", r.val_accuracy},
                 {"lr", r.lr},                          {"seconds", r.seconds}};
    out += j.dump() + "\n";
  }
  if (log.aborted) out += json{{"aborted", log.abort_reason}}.dump() + "\n";
  return out;
}

TrainingLog parse_training_log(const std::string& text) {
  TrainingLog log;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("aborted")) {
        log.aborted = true;
        log.abort_reason = j.at("aborted").get<std::string>();
        continue;
      }
      EpochRecord r;
      r.stage = parse_stage(j.at("stage").get<std::string>());
      r.epoch = j.at("epoch").get<int>();
      r.train_loss = j.at("train_loss").get<double>();
      r.train_accuracy = j.at("train_accuracy").get<double>();
      r.val_loss = j.at("val_loss").get<double>();
      r.val_accuracy = j.at("val_accuracy").get<double>();
      r.lr = j.at("lr").get<double>();
      r.seconds = j.at("seconds").get<double>();
      log.records.push_back(r);
    } catch (const json::exception& e) {
      throw ReportError(fmt::format("training log line {}: {}", n, e.what()));
    } catch (const ConfigError& e) {
      throw ReportError(fmt::format("training log line {}: {}", n, e.what()));
    }
  }
  return log;
}

void write_training_log(const fs::path& path, const TrainingLog& log) {
  detail::write_text(path, serialize_training_log(log));
}

TrainingLog read_training_log(const fs::path& path) {
  const auto text = detail::read_text(path);
  if (!text) throw ReportError("missing training log " + path.string());
  return parse_training_log(*text);
}

namespace {

const char* to_string(CheckpointChoice c) { return c == CheckpointChoice::best ? "best" : "final"; }
const char* to_string(PlateauMonitor m) {
  return m == PlateauMonitor::val_accuracy ? "val_accuracy" : "val_loss";
}

int effective_batch(const TrainConfig& config, const ArchitectureSpec& spec) {
  return config.batch_size.value_or(spec.batch_size);
}

int effective_stage2_epochs(const TrainConfig& config, const ArchitectureSpec& spec) {
  return config.stage2.epochs.value_or(spec.stage2_epochs);
}

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

int argmax(const Eigen::VectorXf& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

std::vector<Image> augment_batch(const LabeledImageSet& set, std::span<const std::size_t> indices,
                                 const AugmentConfig& augment, std::uint64_t seed, int threads) {
  std::vector<Image> out(indices.size());
  auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const std::size_t i = indices[k];
      Rng rng(derive_seed(seed, {i < set.ids.size() ? hash_string(set.ids[i]) : i}));
      out[k] = augment_train(to_float(set.images[indices[k]]), rng, augment);
    }
  };
  const auto workers = static_cast<std::size_t>(threads);
  if (workers <= 1 || indices.size() < 2) {
    work(0, indices.size());
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (indices.size() + workers - 1) / workers;
  for (std::size_t b = 0; b < indices.size(); b += chunk)
    jobs.push_back(std::async(std::launch::async, work, b, std::min(indices.size(), b + chunk)));
  for (auto& j : jobs) j.get();
  return out;
}

EpochStats validate_epoch(const ClassifierModel& model, const LabeledImageSet& val) {
  EpochStats s;
  if (val.empty()) return s;
  const int size = model.spec().input_size;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto& img = val.images[i];
    const Image input = to_float(crop(img, center_crop_region(img.height(), img.width(), size)));
    const Eigen::VectorXf z = model.logits(input);
    const int target = model.label_range().index_of(val.labels[i]);
    s.loss -= nn::log_softmax(z.cast<double>())(target);
    s.accuracy += argmax(z) == target ? 1.0 : 0.0;
  }
  s.loss /= static_cast<double>(val.size());
  s.accuracy /= static_cast<double>(val.size());
  return s;
}

class Diverged : public std::exception {};

EpochStats train_epoch(ClassifierModel& model, const LabeledImageSet& train, Optimizer& optimizer,
                       double lr, int batch, const TrainConfig& config, std::uint64_t epoch_seed) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (train.ids.size() == train.size())
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return train.ids[a] < train.ids[b]; });
  Rng shuffle_rng(derive_seed(epoch_seed, {0x5e7}));
  std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

  const auto ranges = model.trainable_ranges();
  Eigen::VectorXf grad = Eigen::VectorXf::Zero(model.parameters().size());
  Eigen::VectorXf logits;
  EpochStats s;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const auto inputs = augment_batch(train, idx, config.augment, epoch_seed, config.threads);
    grad.setZero();
    double batch_loss = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int target = model.label_range().index_of(train.labels[idx[k]]);
      batch_loss += model.accumulate_gradient(inputs[k], target, grad, &logits);
      s.accuracy += argmax(logits) == target ? 1.0 : 0.0;
    }
    if (!std::isfinite(batch_loss) || !grad.allFinite()) throw Diverged{};
    grad /= static_cast<float>(idx.size());
    optimizer.step(model.parameters(), grad, ranges, lr);
    if (!model.parameters().allFinite()) throw Diverged{};
    s.loss += batch_loss;
  }
  s.loss /= static_cast<double>(train.size());
  s.accuracy /= static_cast<double>(train.size());
  return s;
}

bool better(const EpochRecord& candidate, const EpochRecord& best) {
  return candidate.val_accuracy > best.val_accuracy ||
         (candidate.val_accuracy == best.val_accuracy && candidate.val_loss < best.val_loss);
}

void write_result_json(const ExperimentResult& r) {
  json j{{"bundle", fs::relative(r.bundle, r.directory).generic_string()},
         {"selected_checkpoint", to_string(r.selected)},
         {"best_record", r.best_epoch},
         {"epochs", r.log.records.size()},
         {"aborted", r.log.aborted},
         {"manifest_hash", r.manifest_hash},
         {"training_seconds", r.log.total_seconds()}};
  if (r.test_report) {
    j["test_accuracy"] = r.test_report->accuracy;
    j["test_macro_f1"] = r.test_report->macro.f1;
    j["test_weighted_f1"] = r.test_report->weighted.f1;
  }
  detail::write_text(r.directory / "result.json", j.dump(2) + "\n");
}

}  // namespace

std::string train_config_json(const TrainConfig& c, const ArchitectureSpec& spec) {
  const auto& a = c.augment;
  const json j{
      {"architecture", to_string(spec.name)},
      {"batch_size", effective_batch(c, spec)},
      {"seed", c.seed},
      {"threads", c.threads},
      {"evaluate_checkpoint", to_string(c.evaluate_checkpoint)},
      {"stage1",
       {{"optimizer", "adam"},
        {"lr", c.stage1.lr},
        {"epochs", c.stage1.epochs},
        {"beta1", c.stage1.adam.beta1},
        {"beta2", c.stage1.adam.beta2},
        {"epsilon", c.stage1.adam.epsilon},
        {"loss", "categorical_crossentropy"}}},
      {"stage2",
       {{"optimizer", "rmsprop"},
        {"base_lr", c.stage2.plateau.base_lr},
        {"plateau_factor", c.stage2.plateau.factor},
        {"min_lr", c.stage2.plateau.min_lr},
        {"patience", c.stage2.plateau.patience},
        {"improvement_threshold", c.stage2.plateau.threshold},
        {"monitor", to_string(c.stage2.plateau.monitor)},
        {"reset_on_reduction", c.stage2.plateau.reset_on_reduction},
        {"epochs", effective_stage2_epochs(c, spec)},
        {"rho", c.stage2.rmsprop.rho},
        {"epsilon", c.stage2.rmsprop.epsilon},
        {"unfrozen_layers", spec.unfrozen_layers_stage2},
        {"loss", "categorical_crossentropy"}}},
      {"augment",
       {{"crop_out", a.crop_out},
        {"motion_blur_prob", a.motion_blur_prob},
        {"blur_kernel_size", a.blur_kernel_size},
        {"flip_prob", a.flip_prob},
        {"brightness_contrast_prob", a.brightness_contrast_prob},
        {"brightness_delta", {a.brightness_delta.lo, a.brightness_delta.hi}},
        {"contrast", {a.contrast.lo, a.contrast.hi}},
        {"rotation_prob", a.rotation_prob},
        {"rotation", {a.rotation.lo, a.rotation.hi}},
        {"grayscale_prob", a.grayscale_prob},
        {"center_crop_override", a.center_crop_override}}},
  };
  return j.dump(2) + "\n";
}

ExperimentResult train_two_stage(ClassifierModel& model, const TrainData& data,
                                 const TrainConfig& config, const fs::path& out_dir,
                                 const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) throw DataError("training split is empty");
  if (data.val.empty()) throw DataError("validation split is empty");
  if (data.labels != model.label_range())
    throw MappingRequiredError("dataset labels do not match the model's label range");
  if (!model.computable())
    throw AssetError(std::string("no in-process training backend for ") +
                     to_string(model.architecture()));

  const auto& spec = model.spec();
  const int batch = effective_batch(config, spec);
  const int stage2_epochs = effective_stage2_epochs(config, spec);

  ExperimentResult result;
  result.directory = out_dir;
  result.selected = config.evaluate_checkpoint;
  result.config_snapshot = train_config_json(config, spec);
  fs::create_directories(out_dir);
  detail::write_text(out_dir / "train_config.json", result.config_snapshot);

  Eigen::VectorXf best_params = model.parameters();
  Eigen::VectorXf last_good = model.parameters();
  std::optional<EpochRecord> best;
  auto& log = result.log;

  auto run_stage = [&](Stage stage, int epochs, Optimizer& optimizer, PlateauScheduler* plateau) {
    configure_stage(model, stage);
    double lr = plateau ? plateau->lr() : config.stage1.lr;
    for (int e = 1; e <= epochs; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t epoch_seed =
          derive_seed(config.seed, {static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(e)});
      EpochStats train;
      try {
        train = train_epoch(model, data.train, optimizer, lr, batch, config, epoch_seed);
      } catch (const Diverged&) {
        model.parameters() = last_good;
        log.aborted = true;
        log.abort_reason = fmt::format("non-finite loss in {} epoch {}", to_string(stage), e);
        save_bundle(model, out_dir / "checkpoints" / "last_good");
        write_training_log(out_dir / "training_log.jsonl", log);
        throw DivergenceError(log.abort_reason + "; last good weights in " +
                              (out_dir / "checkpoints" / "last_good").string());
      }
      const EpochStats val = validate_epoch(model, data.val);
      EpochRecord r{stage, e, train.loss, train.accuracy, val.loss, val.accuracy, lr, 0.0};
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.records.push_back(r);
      last_good = model.parameters();
      if (!best || better(r, *best)) {
        best = r;
        best_params = model.parameters();
        result.best_epoch = static_cast<int>(log.records.size()) - 1;
      }
      if (on_epoch) on_epoch(r);
      if (plateau)
        lr = plateau->update(config.stage2.plateau.monitor == PlateauMonitor::val_accuracy
                                 ? val.accuracy
                                 : val.loss);
    }
  };

  {
    Adam adam(static_cast<std::size_t>(model.parameters().size()), config.stage1.adam);
    run_stage(Stage::head_only, config.stage1.epochs, adam, nullptr);
  }
  {
    RmsProp rmsprop(static_cast<std::size_t>(model.parameters().size()), config.stage2.rmsprop);
    PlateauScheduler plateau(config.stage2.plateau);
    run_stage(Stage::fine_tune, stage2_epochs, rmsprop, &plateau);
  }

  write_training_log(out_dir / "training_log.jsonl", log);
  save_bundle(model, out_dir / "checkpoints" / "final");
  const Eigen::VectorXf final_params = model.parameters();
  model.parameters() = best_params;
  save_bundle(model, out_dir / "checkpoints" / "best");
  if (config.evaluate_checkpoint == CheckpointChoice::final) model.parameters() = final_params;
  result.bundle = out_dir / "checkpoints" / to_string(config.evaluate_checkpoint);
  write_result_json(result);
  return result;
}

ExperimentResult train_two_stage(const ArchitectureSpec& spec, const DatasetManifest& manifest,
                                 const fs::path& dataset_root, const AssetRegistry& assets,
                                 const ModelOptions& model_options, const TrainConfig& config,
                                 const fs::path& out_dir, const EpochCallback& on_epoch) {
  config.validate();
  ModelOptions options = model_options;
  options.label_range = manifest.label_range;
  options.num_classes = manifest.label_range.count();
  ClassifierModel model = build_classifier(spec, assets, options);
  TrainData data{load_split(manifest, dataset_root, Split::train, config.threads),
                 load_split(manifest, dataset_root, Split::val, config.threads),
                 manifest.label_range};
  const std::string hash = manifest_hash(manifest);
  fs::create_directories(out_dir);
  detail::write_text(out_dir / "manifest_hash.txt", hash + "\n");
  auto result = train_two_stage(model, data, config, out_dir, on_epoch);
  result.manifest_hash = hash;
  const auto test = load_split(manifest, dataset_root, Split::test, config.threads);
  if (!test.empty()) {
    result.test_report = evaluate_model(model, test, manifest.label_range).report;
    write_eval_report(out_dir / "eval", "test", *result.test_report);
  }
  write_result_json(result);
  return result;
}

AblationCurve ablate_training_size(const ArchitectureSpec& spec, const DatasetManifest& manifest,
                                   const fs::path& dataset_root, const AssetRegistry& assets,
                                   const ModelOptions& model_options, const std::vector<int>& sizes,
                                   const TrainConfig& config, const fs::path& out_dir,
                                   const EpochCallback& on_epoch) {
  config.validate();
  if (sizes.empty()) throw ConfigError("ablation.sizes must not be empty");
  const auto& counts = manifest.class_counts.at(Split::train);
  const int available = counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
  for (int s : sizes)
    if (s < 1 || s > available)
      throw ConfigError(fmt::format("ablation size {} exceeds the {} training images available per class",
                                    s, available));

  ModelOptions options = model_options;
  options.label_range = manifest.label_range;
  options.num_classes = manifest.label_range.count();
  const auto full_train = load_split(manifest, dataset_root, Split::train, config.threads);
  const auto val = load_split(manifest, dataset_root, Split::val, config.threads);
  const auto test = load_split(manifest, dataset_root, Split::test, config.threads);
  if (test.empty()) throw DataError("ablation needs a test split");

  AblationCurve curve;
  curve.labels = labels_of(manifest.label_range);
  fs::create_directories(out_dir);
  detail::write_text(out_dir / "manifest_hash.txt", manifest_hash(manifest) + "\n");
  for (int size : sizes) {
    ClassifierModel model = build_classifier(spec, assets, options);
    TrainData data{balanced_subset(full_train, size, derive_seed(config.seed, {0xab1a})), val,
                   manifest.label_range};
    const auto run_dir = out_dir / fmt::format("size_{:04d}", size);
    const auto run = train_two_stage(model, data, config, run_dir, on_epoch);
    const auto report = evaluate_model(model, test, manifest.label_range).report;
    write_eval_report(run_dir / "eval", "test", report);
    AblationPoint p;
    p.size = size;
    p.macro_f1 = report.macro.f1;
    p.weighted_f1 = report.weighted.f1;
    for (const auto& c : report.classes) p.class_f1.push_back(c.f1);
    p.training_seconds = run.log.total_seconds();
    curve.points.push_back(std::move(p));
    detail::write_text(out_dir / "ablation.json", serialize_ablation(curve));
  }
  return curve;
}

std::string serialize_ablation(const AblationCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points)
    points.push_back({{"size", p.size},
                      {"macro_f1", p.macro_f1},
                      {"weighted_f1", p.weighted_f1},
                      {"class_f1", p.class_f1},
                      {"training_seconds", p.training_seconds}});
  return json{{"labels", curve.labels}, {"points", points}}.dump(2) + "\n";
}

AblationCurve parse_ablation(const std::string& text) {
  try {
    const json j = json::parse(text);
    AblationCurve curve;
    curve.labels = j.at("labels").get<std::vector<int>>();
    for (const auto& p : j.at("points"))
      curve.points.push_back({p.at("size").get<int>(), p.at("macro_f1").get<double>(),
                              p.at("weighted_f1").get<double>(),
                              p.at("class_f1").get<std::vector<double>>(),
                              p.at("training_seconds").get<double>()});
    return curve;
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed ablation file: ") + e.what());
  }
}

}  // namespace seastate
