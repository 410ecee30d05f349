#include <chrono>
#include <future>
#include <thread>

#include "doctest.h"
#include "seastate/profiler.hpp"
#include "support.hpp"

using namespace seastate;

namespace {

TrainingLog log_of(const std::vector<double>& seconds) {
  TrainingLog log;
  int e = 0;
  for (double s : seconds) log.records.push_back({Stage::fine_tune, ++e, 1.0, 0.5, 1.0, 0.5, 1e-4, s});
  return log;
}

ClassifierModel small_model() {
  ModelOptions o;
  o.num_classes = 4;
  return build_classifier(surrogate_spec(), AssetRegistry{}, o);
}

}  // namespace

TEST_SUITE("profiler") {

TEST_CASE("training arithmetic") {
  const auto spec = spec_for(Architecture::resnet101);
  const auto p = profile_training(log_of({10, 10, 10}), spec, 250);
  CHECK(*p.seconds_per_epoch == doctest::Approx(10.0));
  CHECK(*p.total_training_seconds == doctest::Approx(30.0));
  CHECK(*p.epochs == 3);
  const auto one = profile_training(log_of({7.5}), spec, 250);
  CHECK(*one.total_training_seconds == doctest::Approx(7.5));
  CHECK(*one.seconds_per_epoch == doctest::Approx(7.5));
  const auto warm = profile_training(log_of({60, 10, 12, 11}), spec, 250);
  CHECK(*warm.seconds_per_epoch == doctest::Approx(11.0));
  const auto resnet = profile_training(log_of(std::vector<double>(230, 20.0)), spec, 250);
  CHECK(format_hours_minutes(*resnet.total_training_seconds) == "1:17");
  CHECK_THROWS_AS(profile_training(TrainingLog{}, spec, 250), MeasurementError);
  CHECK_THROWS_AS(profile_training(log_of({10, 0}), spec, 250), MeasurementError);
}

TEST_CASE("hours and minutes rendering") {
  CHECK(format_hours_minutes(0) == "0:00");
  CHECK(format_hours_minutes(29) == "0:00");
  CHECK(format_hours_minutes(31) == "0:01");
  CHECK(format_hours_minutes(4680) == "1:18");
  CHECK(format_hours_minutes(4 * 3600 + 24 * 60) == "4:24");
}

TEST_CASE("inference profile fields and invariants") {
  const auto model = small_model();
  const auto p = profile_inference(model, LabeledImageSet{}, 4, 3, 1);
  REQUIRE(p.throughput);
  REQUIRE(p.compute_throughput);
  CHECK(*p.throughput > 0);
  CHECK(*p.compute_throughput >= *p.throughput * 0.5);
  CHECK(p.warmup_batches == 1);
  CHECK(*p.batches == 3);
  CHECK(p.batch_size == 4);
  CHECK(*p.parameter_mb == doctest::Approx(model.total_parameter_count() * 4.0 / (1024.0 * 1024.0)));
  if (p.model_memory_mb && p.peak_memory_mb) CHECK(*p.peak_memory_mb >= *p.model_memory_mb);
  CHECK_THROWS_AS(profile_inference(model, LabeledImageSet{}, 4, 0, 1), MeasurementError);
  CHECK_THROWS_AS(profile_inference(model, LabeledImageSet{}, 0, 2, 1), MeasurementError);
}

TEST_CASE("concurrent measurements are rejected") {
  const auto model = small_model();
  auto first = std::async(std::launch::async, [&] { return profile_inference(model, LabeledImageSet{}, 8, 12, 0); });
  std::this_thread::sleep_for(std::chrono::milliseconds(60));
  bool rejected = false;
  try {
    profile_inference(model, LabeledImageSet{}, 1, 1, 0);
  } catch (const MeasurementError&) {
    rejected = true;
  }
  CHECK(first.get().throughput.has_value());
  CHECK(rejected);
}

TEST_CASE("tables carry every column and mark gaps") {
  ResourceProfile p;
  p.model = "resnet101";
  p.batch_size = 250;
  p.epochs = 230;
  p.total_training_seconds = 4680;
  p.seconds_per_epoch = 20;
  const auto training = format_training_table({p});
  for (const auto& col : training_table_columns()) CHECK(training.find(col) != std::string::npos);
  CHECK(training.find("1:18") != std::string::npos);
  const auto inference = format_inference_table({p});
  for (const auto& col : inference_table_columns()) CHECK(inference.find(col) != std::string::npos);
  CHECK(inference.find("n/a") != std::string::npos);
  const auto back = profile_from_json(profile_json(p));
  CHECK(back.total_training_seconds == p.total_training_seconds);
  CHECK_FALSE(back.throughput);
}

TEST_CASE("memory sampling reads the process status") {
  const auto s = sample_memory("now");
  CHECK(s.point == "now");
  if (s.rss_mb) CHECK(*s.rss_mb > 0);
  CHECK_FALSE(hardware_descriptor().empty());
}

}
