#include "seastate/config.hpp"

#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "seastate/errors.hpp"
#include "text_util.hpp"

namespace pt = boost::property_tree;

namespace seastate {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;

  std::string name() const { return section + "." + key; }
};

[[noreturn]] void bad_value(const std::string& value, const char* expected) {
  throw ConfigError(fmt::format("invalid value '{}' (expected {})", value, expected));
}

template <typename T>
T parse_as(const std::string& v, const char* expected) {
  const auto n = detail::parse_number<T>(v);
  if (!n) bad_value(v, expected);
  return *n;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(v, "true or false");
}

std::pair<std::string, std::string> split_pair(const std::string& v, char delim, const char* expected) {
  const auto parts = detail::split(v, delim);
  if (parts.size() != 2) bad_value(v, expected);
  return {detail::trim(parts[0]), detail::trim(parts[1])};
}

std::string fmt_range(const LabelRange& r) { return fmt::format("{}-{}", r.min, r.max); }
LabelRange parse_range(const std::string& v) {
  const auto [a, b] = split_pair(v, '-', "min-max");
  return {parse_as<int>(a, "min-max"), parse_as<int>(b, "min-max")};
}

std::string fmt_interval(const Interval& i) {
  return detail::format_double(i.lo) + "," + detail::format_double(i.hi);
}
Interval parse_interval(const std::string& v) {
  const auto [a, b] = split_pair(v, ',', "lo,hi");
  return {parse_as<double>(a, "lo,hi"), parse_as<double>(b, "lo,hi")};
}

const char* to_string(DatasetSource s) {
  switch (s) {
    case DatasetSource::sessions: return "sessions";
    case DatasetSource::synth: return "synth";
    case DatasetSource::manifest: return "manifest";
  }
  return "?";
}
DatasetSource parse_source(const std::string& v) {
  if (v == "sessions") return DatasetSource::sessions;
  if (v == "synth") return DatasetSource::synth;
  if (v == "manifest") return DatasetSource::manifest;
  bad_value(v, "sessions, synth or manifest");
}

const char* to_string(SplitMode m) {
  return m == SplitMode::trailing_ranges ? "trailing_ranges" : "session_holdout";
}
SplitMode parse_split_mode(const std::string& v) {
  if (v == "trailing_ranges") return SplitMode::trailing_ranges;
  if (v == "session_holdout") return SplitMode::session_holdout;
  bad_value(v, "trailing_ranges or session_holdout");
}

const char* to_string(PlateauMonitor m) {
  return m == PlateauMonitor::val_accuracy ? "val_accuracy" : "val_loss";
}
PlateauMonitor parse_monitor(const std::string& v) {
  if (v == "val_accuracy") return PlateauMonitor::val_accuracy;
  if (v == "val_loss") return PlateauMonitor::val_loss;
  bad_value(v, "val_accuracy or val_loss");
}

const char* to_string(CheckpointChoice c) { return c == CheckpointChoice::best ? "best" : "final"; }
CheckpointChoice parse_checkpoint(const std::string& v) {
  if (v == "best") return CheckpointChoice::best;
  if (v == "final") return CheckpointChoice::final;
  bad_value(v, "best or final");
}

std::string fmt_optional(const std::optional<int>& v) { return v ? std::to_string(*v) : "auto"; }
std::optional<int> parse_optional(const std::string& v) {
  if (v == "auto") return std::nullopt;
  return parse_as<int>(v, "an integer or auto");
}

std::string fmt_sizes(const std::vector<int>& sizes) {
  std::string out;
  for (int s : sizes) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}
std::vector<int> parse_sizes(const std::string& v) {
  std::vector<int> out;
  for (const auto& p : detail::split(v, ','))
    if (!detail::trim(p).empty()) out.push_back(parse_as<int>(p, "comma-separated integers"));
  return out;
}

#define SEASTATE_FIELD(sec, key, expr, to_str, from_str)                                   \
  Field {                                                                                   \
    sec, key, [](const RunConfig& c) -> std::string { return to_str(c.expr); },             \
        [](RunConfig& c, const std::string& v) { c.expr = from_str(v); }                    \
  }

std::string str_id(const std::string& s) { return s; }
std::string int_str(int v) { return std::to_string(v); }
std::string u64_str(std::uint64_t v) { return std::to_string(v); }
std::string bool_str(bool v) { return v ? "true" : "false"; }
int to_int(const std::string& v) { return parse_as<int>(v, "an integer"); }
std::uint64_t to_u64(const std::string& v) { return parse_as<std::uint64_t>(v, "a non-negative integer"); }
double to_double(const std::string& v) { return parse_as<double>(v, "a number"); }
std::string arch_str(Architecture a) { return to_string(a); }
std::string strategy_str(Strategy s) { return to_string(s); }
std::string split_str(Split s) { return to_string(s); }
std::string source_str(DatasetSource s) { return to_string(s); }
std::string mode_str(SplitMode m) { return to_string(m); }
std::string monitor_str(PlateauMonitor m) { return to_string(m); }
std::string checkpoint_str(CheckpointChoice c) { return to_string(c); }

Architecture to_arch(const std::string& v) { return parse_architecture(v); }
Strategy to_strategy(const std::string& v) { return parse_strategy(v); }
Split to_split(const std::string& v) { return parse_split(v); }

const std::vector<Field>& fields() {
  using detail::format_double;
  static const std::vector<Field> all{
      SEASTATE_FIELD("run", "output_dir", output_dir, str_id, str_id),
      SEASTATE_FIELD("run", "threads", threads, int_str, to_int),

      SEASTATE_FIELD("dataset", "source", dataset.source, source_str, parse_source),
      SEASTATE_FIELD("dataset", "session_index", dataset.session_index, str_id, str_id),
      SEASTATE_FIELD("dataset", "manifest", dataset.manifest, str_id, str_id),
      SEASTATE_FIELD("dataset", "name", dataset.name, str_id, str_id),
      SEASTATE_FIELD("dataset", "strategy", dataset.strategy, strategy_str, to_strategy),
      SEASTATE_FIELD("dataset", "train_target", dataset.targets.train, int_str, to_int),
      SEASTATE_FIELD("dataset", "val_target", dataset.targets.val, int_str, to_int),
      SEASTATE_FIELD("dataset", "test_target", dataset.targets.test, int_str, to_int),
      SEASTATE_FIELD("dataset", "class_targets", dataset.class_targets, str_id, str_id),
      SEASTATE_FIELD("dataset", "split_mode", dataset.split_mode, mode_str, parse_split_mode),
      SEASTATE_FIELD("dataset", "ll_offset_x", dataset.ll_offset_x, int_str, to_int),
      SEASTATE_FIELD("dataset", "ll_offset_y", dataset.ll_offset_y, int_str, to_int),
      SEASTATE_FIELD("dataset", "label_range", dataset.label_range, fmt_range, parse_range),
      SEASTATE_FIELD("dataset", "native", dataset.native, bool_str, parse_bool),
      SEASTATE_FIELD("dataset", "seed", dataset.seed, u64_str, to_u64),

      SEASTATE_FIELD("synth", "num_classes", synth.num_classes, int_str, to_int),
      SEASTATE_FIELD("synth", "train_per_class", synth.train_per_class, int_str, to_int),
      SEASTATE_FIELD("synth", "val_per_class", synth.val_per_class, int_str, to_int),
      SEASTATE_FIELD("synth", "test_per_class", synth.test_per_class, int_str, to_int),
      SEASTATE_FIELD("synth", "image_size", synth.image_size, int_str, to_int),
      SEASTATE_FIELD("synth", "seed", synth.seed, u64_str, to_u64),
      SEASTATE_FIELD("synth", "difficulty", synth.difficulty, format_double, to_double),
      SEASTATE_FIELD("synth", "name", synth.name, str_id, str_id),

      SEASTATE_FIELD("model", "architecture", model.architecture, arch_str, to_arch),
      SEASTATE_FIELD("model", "num_classes", model.num_classes, int_str, to_int),
      SEASTATE_FIELD("model", "asset_registry", model.asset_registry, str_id, str_id),
      SEASTATE_FIELD("model", "vit_head_width", model.vit_head_width, int_str, to_int),

      SEASTATE_FIELD("training", "seed", training.seed, u64_str, to_u64),
      SEASTATE_FIELD("training", "batch_size", training.batch_size, fmt_optional, parse_optional),
      SEASTATE_FIELD("training", "stage1_lr", training.stage1.lr, format_double, to_double),
      SEASTATE_FIELD("training", "stage1_epochs", training.stage1.epochs, int_str, to_int),
      SEASTATE_FIELD("training", "adam_beta1", training.stage1.adam.beta1, format_double, to_double),
      SEASTATE_FIELD("training", "adam_beta2", training.stage1.adam.beta2, format_double, to_double),
      SEASTATE_FIELD("training", "adam_epsilon", training.stage1.adam.epsilon, format_double, to_double),
      SEASTATE_FIELD("training", "base_lr", training.stage2.plateau.base_lr, format_double, to_double),
      SEASTATE_FIELD("training", "plateau_factor", training.stage2.plateau.factor, format_double, to_double),
      SEASTATE_FIELD("training", "min_lr", training.stage2.plateau.min_lr, format_double, to_double),
      SEASTATE_FIELD("training", "patience", training.stage2.plateau.patience, int_str, to_int),
      SEASTATE_FIELD("training", "improvement_threshold", training.stage2.plateau.threshold, format_double, to_double),
      SEASTATE_FIELD("training", "monitor", training.stage2.plateau.monitor, monitor_str, parse_monitor),
      SEASTATE_FIELD("training", "reset_on_reduction", training.stage2.plateau.reset_on_reduction, bool_str, parse_bool),
      SEASTATE_FIELD("training", "stage2_epochs", training.stage2.epochs, fmt_optional, parse_optional),
      SEASTATE_FIELD("training", "rmsprop_rho", training.stage2.rmsprop.rho, format_double, to_double),
      SEASTATE_FIELD("training", "rmsprop_epsilon", training.stage2.rmsprop.epsilon, format_double, to_double),
      SEASTATE_FIELD("training", "evaluate_checkpoint", training.evaluate_checkpoint, checkpoint_str, parse_checkpoint),

      SEASTATE_FIELD("augment", "crop_out", training.augment.crop_out, int_str, to_int),
      SEASTATE_FIELD("augment", "motion_blur_prob", training.augment.motion_blur_prob, format_double, to_double),
      SEASTATE_FIELD("augment", "blur_kernel_size", training.augment.blur_kernel_size, int_str, to_int),
      SEASTATE_FIELD("augment", "flip_prob", training.augment.flip_prob, format_double, to_double),
      SEASTATE_FIELD("augment", "brightness_contrast_prob", training.augment.brightness_contrast_prob, format_double, to_double),
      SEASTATE_FIELD("augment", "brightness_delta", training.augment.brightness_delta, fmt_interval, parse_interval),
      SEASTATE_FIELD("augment", "contrast", training.augment.contrast, fmt_interval, parse_interval),
      SEASTATE_FIELD("augment", "rotation_prob", training.augment.rotation_prob, format_double, to_double),
      SEASTATE_FIELD("augment", "rotation", training.augment.rotation, fmt_interval, parse_interval),
      SEASTATE_FIELD("augment", "grayscale_prob", training.augment.grayscale_prob, format_double, to_double),
      SEASTATE_FIELD("augment", "center_crop_override", training.augment.center_crop_override, bool_str, parse_bool),

      SEASTATE_FIELD("evaluation", "split", evaluation.split, split_str, to_split),
      SEASTATE_FIELD("evaluation", "foreign_manifest", evaluation.foreign_manifest, str_id, str_id),
      SEASTATE_FIELD("evaluation", "foreign_labels", evaluation.foreign_labels, fmt_range, parse_range),
      SEASTATE_FIELD("evaluation", "decimals", evaluation.decimals, int_str, to_int),
      SEASTATE_FIELD("evaluation", "cross_decimals", evaluation.cross_decimals, int_str, to_int),

      SEASTATE_FIELD("ablation", "sizes", ablation.sizes, fmt_sizes, parse_sizes),

      SEASTATE_FIELD("profiling", "batch_size", profiling.batch_size, int_str, to_int),
      SEASTATE_FIELD("profiling", "num_batches", profiling.num_batches, int_str, to_int),
      SEASTATE_FIELD("profiling", "warmup_batches", profiling.warmup_batches, int_str, to_int),
  };
  return all;
}

#undef SEASTATE_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

void assign(RunConfig& config, const std::string& section, const std::string& key,
            const std::string& value) {
  const Field* f = find_field(section, key);
  if (!f) throw ConfigError(fmt::format("unknown config key {}.{}", section, key));
  try {
    f->set(config, detail::trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("config key {}: {}", f->name(), e.what()));
  }
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(fmt::format("config key {}: {}", key, what));
  };
  require(threads >= 1, "run.threads", "must be >= 1");
  require(dataset.source != DatasetSource::sessions || !dataset.session_index.empty(),
          "dataset.session_index", "required when dataset.source = sessions");
  require(dataset.source != DatasetSource::manifest || !dataset.manifest.empty(), "dataset.manifest",
          "required when dataset.source = manifest");
  require(dataset.targets.train >= 1 && dataset.targets.val >= 0 && dataset.targets.test >= 0,
          "dataset.train_target", "targets must be non-negative and train >= 1");
  require(dataset.label_range.min <= dataset.label_range.max, "dataset.label_range", "min must be <= max");
  require(dataset.ll_offset_x >= 0 && dataset.ll_offset_y >= 0, "dataset.ll_offset_x", "must be >= 0");
  require(model.num_classes >= 2, "model.num_classes", "must be >= 2");
  require(model.vit_head_width >= 1, "model.vit_head_width", "must be >= 1");
  require(evaluation.decimals >= 0 && evaluation.decimals <= 12, "evaluation.decimals", "must be in [0, 12]");
  require(evaluation.cross_decimals >= 0 && evaluation.cross_decimals <= 12, "evaluation.cross_decimals",
          "must be in [0, 12]");
  require(!ablation.sizes.empty(), "ablation.sizes", "must list at least one size");
  for (int s : ablation.sizes) require(s >= 1, "ablation.sizes", "sizes must be >= 1");
  require(profiling.batch_size >= 1, "profiling.batch_size", "must be >= 1");
  require(profiling.num_batches >= 1, "profiling.num_batches", "must be >= 1");
  require(profiling.warmup_batches >= 0, "profiling.warmup_batches", "must be >= 0");
  try {
    synth.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config section synth: ") + e.what());
  }
  training.validate();
  (void)targets_for(dataset);
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  for (const auto& f : fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

RunConfig parse_run_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(fmt::format("config key '{}' is outside any section", section));
    for (const auto& [key, value] : body) assign(config, section, key, value.data());
  }
  return config;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  const auto text = detail::read_text(path);
  if (!text) throw ConfigError("cannot read config " + path.string());
  return parse_run_config(*text);
}

std::string serialize_run_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (out.empty() ? "" : "\n") + fmt::format("[{}]\n", f.section);
      section = f.section;
    }
    out += fmt::format("{} = {}\n", f.key, f.get(config));
  }
  return out;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& config) {
  detail::write_text(path, serialize_run_config(config));
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  assign(config, detail::trim(assignment.substr(0, dot)),
         detail::trim(assignment.substr(dot + 1, eq - dot - 1)), assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.name());
  return out;
}

TargetMap targets_for(const DatasetSection& dataset) {
  TargetMap map = uniform_targets(dataset.label_range, dataset.targets);
  if (detail::trim(dataset.class_targets).empty()) return map;
  for (const auto& entry : detail::split(dataset.class_targets, ',')) {
    const auto colon = entry.find(':');
    const auto parts = colon == std::string::npos ? std::vector<std::string>{}
                                                  : detail::split(entry.substr(colon + 1), '/');
    const auto label = colon == std::string::npos ? std::nullopt
                                                  : detail::parse_number<int>(entry.substr(0, colon));
    if (!label || parts.size() != 3 || !dataset.label_range.contains(*label))
      throw ConfigError("config key dataset.class_targets: malformed entry '" + detail::trim(entry) + "'");
    SplitTargets t;
    const auto tr = detail::parse_number<int>(parts[0]);
    const auto va = detail::parse_number<int>(parts[1]);
    const auto te = detail::parse_number<int>(parts[2]);
    if (!tr || !va || !te || *tr < 1 || *va < 0 || *te < 0)
      throw ConfigError("config key dataset.class_targets: malformed entry '" + detail::trim(entry) + "'");
    t.train = *tr;
    t.val = *va;
    t.test = *te;
    map[*label] = t;
  }
  return map;
}

}  // namespace seastate
