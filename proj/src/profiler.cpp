#include "seastate/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "seastate/augment.hpp"
#include "seastate/errors.hpp"
#include "seastate/rng.hpp"
#include "text_util.hpp"

using json = nlohmann::json;

namespace seastate {

namespace {

std::mutex& measurement_lock() {
  static std::mutex m;
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> status_field_mb(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + ":");
  if (pos == std::string::npos) return std::nullopt;
  const auto end = text.find('\n', pos);
  std::string value = detail::trim(text.substr(pos + key.size() + 1, end - pos - key.size() - 1));
  if (value.size() > 3 && value.ends_with("kB")) value = detail::trim(value.substr(0, value.size() - 2));
  const auto kb = detail::parse_number<double>(value);
  if (!kb) return std::nullopt;
  return *kb / 1024.0;
}

Image8 noise_image(int size, std::uint64_t seed) {
  Image8 img(size, size);
  Rng rng(seed);
  for (auto& p : img.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

std::string opt(const std::optional<double>& v, int decimals) {
  return v ? fmt::format("{:.{}f}", *v, decimals) : "n/a";
}

}  // namespace

ResourceProfile profile_training(const TrainingLog& log, const ArchitectureSpec& spec, int batch_size) {
  if (log.records.empty()) throw MeasurementError("training log has no epoch records");
  std::vector<double> durations;
  for (const auto& r : log.records) {
    if (!std::isfinite(r.seconds) || r.seconds <= 0)
      throw MeasurementError(fmt::format("epoch {} has no wall-clock duration", r.epoch));
    durations.push_back(r.seconds);
  }
  ResourceProfile p;
  p.model = to_string(spec.name);
  p.input_size = spec.input_size;
  p.batch_size = batch_size;
  p.hardware = hardware_descriptor();
  p.epochs = static_cast<int>(durations.size());
  double total = 0.0;
  for (double d : durations) total += d;
  p.total_training_seconds = total;
  p.seconds_per_epoch =
      durations.size() > 1 ? median({durations.begin() + 1, durations.end()}) : durations.front();
  return p;
}

MemorySample sample_memory(const std::string& point) {
  MemorySample s{point, std::nullopt, std::nullopt};
  if (const auto text = detail::read_text("/proc/self/status")) {
    s.rss_mb = status_field_mb(*text, "VmRSS");
    s.peak_mb = status_field_mb(*text, "VmHWM");
  }
  return s;
}

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line))
    if (line.starts_with("model name")) {
      cpu = detail::trim(line.substr(line.find(':') + 1));
      break;
    }
  return fmt::format("{}, {} hardware threads, CPU inference", cpu,
                     std::max(1u, std::thread::hardware_concurrency()));
}

ResourceProfile profile_inference(const ClassifierModel& model, const LabeledImageSet& inputs,
                                  int batch_size, int num_batches, int warmup_batches,
                                  const std::optional<MemorySample>& after_load) {
  std::unique_lock lock(measurement_lock(), std::try_to_lock);
  if (!lock.owns_lock()) throw MeasurementError("another profiling run holds the measurement lock");
  if (batch_size < 1) throw MeasurementError("batch size must be >= 1");
  if (num_batches < 1) throw MeasurementError("no measured batches after warmup");
  if (warmup_batches < 0) throw MeasurementError("warmup batch count must be >= 0");
  if (!model.computable())
    throw AssetError(std::string("no in-process inference backend for ") + to_string(model.architecture()));

  ResourceProfile p;
  p.model = to_string(model.architecture());
  p.input_size = model.spec().input_size;
  p.batch_size = batch_size;
  p.batches = num_batches;
  p.warmup_batches = warmup_batches;
  p.hardware = hardware_descriptor();
  p.parameter_mb = static_cast<double>(model.parameters().size()) * sizeof(float) / (1024.0 * 1024.0);
  p.memory_samples.push_back(after_load ? *after_load : sample_memory("after_load"));

  const int size = model.spec().input_size;
  const int source_size = std::max(size, kDatasetCropSize);
  std::vector<Image8> noise;
  if (inputs.empty())
    for (int i = 0; i < batch_size; ++i) noise.push_back(noise_image(source_size, derive_seed(17, {static_cast<std::uint64_t>(i)})));
  const auto& pool = inputs.empty() ? noise : inputs.images;

  using clock = std::chrono::steady_clock;
  double prep_seconds = 0.0;
  double compute_seconds = 0.0;
  std::size_t cursor = 0;
  std::vector<Image> batch(static_cast<std::size_t>(batch_size));
  volatile float sink = 0.0f;
  for (int b = 0; b < warmup_batches + num_batches; ++b) {
    const auto t0 = clock::now();
    for (auto& img : batch) {
      img = prepare_eval(to_float(pool[cursor]), size);
      cursor = (cursor + 1) % pool.size();
    }
    const auto t1 = clock::now();
    for (const auto& img : batch) sink = sink + model.logits(img)[0];
    const auto t2 = clock::now();
    if (b >= warmup_batches) {
      prep_seconds += std::chrono::duration<double>(t1 - t0).count();
      compute_seconds += std::chrono::duration<double>(t2 - t1).count();
    }
  }
  const double images = static_cast<double>(num_batches) * batch_size;
  if (compute_seconds <= 0) throw MeasurementError("clock resolution too coarse for this workload");
  p.throughput = images / (prep_seconds + compute_seconds);
  p.compute_throughput = images / compute_seconds;

  p.memory_samples.push_back(sample_memory("after_inference"));
  const auto& load = p.memory_samples.front();
  const auto& done = p.memory_samples.back();
  if (load.rss_mb && done.peak_mb) {
    p.memory_source = "process resident set (/proc/self/status)";
    p.model_memory_mb = load.rss_mb;
    p.peak_memory_mb = std::max(*done.peak_mb, *load.rss_mb);
  }
  return p;
}

ResourceProfile profile_inference(const std::filesystem::path& bundle, const LabeledImageSet& inputs,
                                  int batch_size, int num_batches, int warmup_batches) {
  const ClassifierModel model = load_bundle(bundle);
  return profile_inference(model, inputs, batch_size, num_batches, warmup_batches,
                           sample_memory("after_load"));
}

std::string format_hours_minutes(double seconds) {
  const auto minutes = static_cast<long long>(std::llround(seconds / 60.0));
  return fmt::format("{}:{:02d}", minutes / 60, minutes % 60);
}

const std::vector<std::string>& training_table_columns() {
  static const std::vector<std::string> c{"Model",  "Input Size", "Training Batch Size",
                                          "Epochs", "Total Training Time (h:mm)",
                                          "Training Time Per Epoch (s)", "Hardware"};
  return c;
}

const std::vector<std::string>& inference_table_columns() {
  static const std::vector<std::string> c{
      "Model",
      "Input Size",
      "Batch Size",
      "Average Inference Throughput (images/s)",
      "Compute-only Throughput (images/s)",
      "Model Only Memory (MB)",
      "Peak Memory During Inference (MB)",
      "Parameter Memory (MB)",
      "Memory Source",
      "Warmup Batches",
      "Measured Batches",
      "Hardware"};
  return c;
}

std::string format_training_table(const std::vector<ResourceProfile>& profiles) {
  std::string out;
  for (const auto& c : training_table_columns()) out += (out.empty() ? "" : "\t") + c;
  out += '\n';
  for (const auto& p : profiles)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", p.model, p.input_size, p.batch_size,
                       p.epochs ? std::to_string(*p.epochs) : "n/a",
                       p.total_training_seconds ? format_hours_minutes(*p.total_training_seconds) : "n/a",
                       opt(p.seconds_per_epoch, 2), p.hardware);
  return out;
}

std::string format_inference_table(const std::vector<ResourceProfile>& profiles) {
  std::string out;
  for (const auto& c : inference_table_columns()) out += (out.empty() ? "" : "\t") + c;
  out += '\n';
  for (const auto& p : profiles)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", p.model, p.input_size,
                       p.batch_size, opt(p.throughput, 2), opt(p.compute_throughput, 2),
                       opt(p.model_memory_mb, 1), opt(p.peak_memory_mb, 1), opt(p.parameter_mb, 3),
                       p.memory_source, p.warmup_batches,
                       p.batches ? std::to_string(*p.batches) : "n/a", p.hardware);
  return out;
}

namespace {

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::string profile_json(const ResourceProfile& p) {
  json samples = json::array();
  for (const auto& s : p.memory_samples)
    samples.push_back({{"point", s.point}, {"rss_mb", opt_json(s.rss_mb)}, {"peak_mb", opt_json(s.peak_mb)}});
  const json j{{"model", p.model},
               {"input_size", p.input_size},
               {"batch_size", p.batch_size},
               {"hardware", p.hardware},
               {"epochs", opt_json(p.epochs)},
               {"total_training_seconds", opt_json(p.total_training_seconds)},
               {"seconds_per_epoch", opt_json(p.seconds_per_epoch)},
               {"batches", opt_json(p.batches)},
               {"warmup_batches", p.warmup_batches},
               {"throughput", opt_json(p.throughput)},
               {"compute_throughput", opt_json(p.compute_throughput)},
               {"parameter_mb", opt_json(p.parameter_mb)},
               {"model_memory_mb", opt_json(p.model_memory_mb)},
               {"peak_memory_mb", opt_json(p.peak_memory_mb)},
               {"memory_source", p.memory_source},
               {"memory_samples", samples}};
  return j.dump(2) + "\n";
}

ResourceProfile profile_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ResourceProfile p;
    p.model = j.at("model").get<std::string>();
    p.input_size = j.at("input_size").get<int>();
    p.batch_size = j.at("batch_size").get<int>();
    p.hardware = j.value("hardware", "");
    p.epochs = opt_from<int>(j, "epochs");
    p.total_training_seconds = opt_from<double>(j, "total_training_seconds");
    p.seconds_per_epoch = opt_from<double>(j, "seconds_per_epoch");
    p.batches = opt_from<int>(j, "batches");
    p.warmup_batches = j.value("warmup_batches", 0);
    p.throughput = opt_from<double>(j, "throughput");
    p.compute_throughput = opt_from<double>(j, "compute_throughput");
    p.parameter_mb = opt_from<double>(j, "parameter_mb");
    p.model_memory_mb = opt_from<double>(j, "model_memory_mb");
    p.peak_memory_mb = opt_from<double>(j, "peak_memory_mb");
    p.memory_source = j.value("memory_source", "unavailable");
    for (const auto& s : j.value("memory_samples", json::array()))
      p.memory_samples.push_back({s.at("point").get<std::string>(), opt_from<double>(s, "rss_mb"),
                                  opt_from<double>(s, "peak_mb")});
    return p;
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed profile: ") + e.what());
  }
}

}  // namespace seastate
