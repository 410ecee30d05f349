#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "seastate/cli.hpp"
#include "seastate/config.hpp"
#include "seastate/hash.hpp"
#include "support.hpp"

using namespace seastate;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = command_dispatch(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<fs::path, std::string> hashes_under(const fs::path& dir) {
  std::map<fs::path, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir)] = sha256_file(e.path());
  return out;
}

const std::vector<std::string> kTinySynth{
    "--set", "synth.num_classes=3",     "--set", "model.num_classes=3",
    "--set", "synth.train_per_class=4", "--set", "synth.val_per_class=2",
    "--set", "synth.test_per_class=2",  "--set", "synth.image_size=232",
    "--set", "training.stage1_epochs=1", "--set", "training.stage2_epochs=1",
    "--set", "training.batch_size=4"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config round-trip keeps every field") {
  RunConfig c;
  c.output_dir = "elsewhere";
  c.dataset.strategy = Strategy::R;
  c.dataset.targets = {750, 300, 300};
  c.dataset.label_range = {1, 4};
  c.model.architecture = Architecture::vit_b32;
  c.model.vit_head_width = 256;
  c.training.batch_size = 16;
  c.training.stage2.epochs = 12;
  c.training.stage2.plateau.monitor = PlateauMonitor::val_loss;
  c.training.augment.rotation = {-0.1, 0.3};
  c.training.evaluate_checkpoint = CheckpointChoice::final;
  c.ablation.sizes = {10, 40, 160, 375};
  c.synth.difficulty = 0.25;
  const auto text = serialize_run_config(c);
  const auto back = parse_run_config(text);
  CHECK(back == c);
  CHECK(serialize_run_config(back) == text);
  CHECK(back.training.augment.rotation == Interval{-0.1, 0.3});
  CHECK(back.ablation.sizes == std::vector<int>{10, 40, 160, 375});
  CHECK(*back.training.stage2.epochs == 12);
}

TEST_CASE("config round-trip on random override sets") {
  std::mt19937_64 gen(77);
  const std::vector<std::string> pool{
      "training.patience=7",          "training.min_lr=2e-6",       "augment.flip_prob=0.25",
      "augment.grayscale_prob=0",     "dataset.seed=99",            "dataset.native=false",
      "evaluation.split=val",         "evaluation.decimals=4",      "profiling.num_batches=3",
      "synth.seed=123",               "model.num_classes=4",        "dataset.label_range=1-4",
      "training.batch_size=auto",     "training.stage2_epochs=5",   "augment.contrast=0.8,1.2",
      "dataset.class_targets=1:5/2/2", "ablation.sizes=5,10",       "run.threads=2"};
  for (int trial = 0; trial < 50; ++trial) {
    RunConfig c;
    for (int k = 0; k < 6; ++k) apply_override(c, pool[gen() % pool.size()]);
    CHECK(parse_run_config(serialize_run_config(c)) == c);
  }
}

TEST_CASE("every key serialises and defaults are recorded") {
  const auto text = serialize_run_config(RunConfig{});
  for (const auto& key : config_keys()) {
    const auto dot = key.find('.');
    CHECK(text.find(key.substr(dot + 1) + " =") != std::string::npos);
  }
  CHECK(parse_run_config("") == RunConfig{});
}

TEST_CASE("unknown and invalid keys are named") {
  try {
    parse_run_config("[training]\nfrobnicate = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("training.frobnicate") != std::string::npos);
  }
  try {
    parse_run_config("[training]\npatience = lots\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("training.patience") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config("[nowhere]\nx = 1\n"), ConfigError);
  RunConfig c;
  CHECK_THROWS_AS(apply_override(c, "no_equals_sign"), ConfigError);
  apply_override(c, "augment.flip_prob=2");
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("flip_prob") != std::string::npos);
  }
}

TEST_CASE("per-class targets") {
  RunConfig c;
  c.dataset.label_range = {1, 3};
  apply_override(c, "dataset.class_targets=2:5/1/1");
  const auto t = targets_for(c.dataset);
  CHECK(t.size() == 3);
  CHECK(t.at(2).train == 5);
  CHECK(t.at(1).train == 750);
}

TEST_CASE("unknown command prints usage and fails") {
  const auto r = cli({"frobnicate"});
  CHECK(r.status != 0);
  CHECK(r.status == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli({}).status == 1);
  CHECK(cli({"--help"}).status == 0);
  CHECK(cli({"train", "--bogus-flag"}).status == 1);
}

TEST_CASE("config errors exit with the config code and name the key") {
  testing::TempDir dir("cli_cfg");
  std::ofstream(dir / "bad.ini") << "[training]\nnot_a_key = 1\n";
  const auto r = cli({"synth", "--workdir", dir.path().string(), "--config", "bad.ini", "--out", "o"});
  CHECK(r.status == 2);
  CHECK(r.err.find("error[config]") != std::string::npos);
  CHECK(r.err.find("training.not_a_key") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o"));
}

TEST_CASE("end-to-end: synth, train, evaluate, cross-eval, profile, report") {
  testing::TempDir dir("cli_e2e");
  const std::string wd = dir.path().string();

  auto r = cli(with({"synth", "--workdir", wd, "--out", "data"}, kTinySynth));
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(dir / "data/manifest.tsv"));
  CHECK(fs::exists(dir / "data/run.ini"));

  r = cli(with({"synth", "--workdir", wd, "--out", "data"}, kTinySynth));
  CHECK(r.status == 1);

  r = cli(with({"train", "--workdir", wd, "--out", "exp", "--arch", "surrogate_cnn", "--set",
                "dataset.source=manifest", "--set", "dataset.manifest=data/manifest.tsv"},
               kTinySynth));
  REQUIRE_MESSAGE(r.status == 0, r.err);
  for (const char* f : {"run.ini", "training_log.jsonl", "checkpoints/best/bundle.json", "eval/test.json"})
    CHECK(fs::exists(dir / "exp" / f));
  const auto snapshot = read_run_config(dir / "exp/run.ini");
  CHECK(snapshot.dataset.manifest == "data/manifest.tsv");
  CHECK(snapshot.model.num_classes == 3);

  r = cli({"train", "--workdir", wd, "--out", "exp_resnet", "--arch", "resnet101", "--set",
           "dataset.source=manifest", "--set", "dataset.manifest=data/manifest.tsv", "--set",
           "model.num_classes=3"});
  CHECK(r.status == 4);
  CHECK(r.err.find("error[asset]") != std::string::npos);

  r = cli({"train", "--workdir", wd, "--out", "exp_mismatch", "--set", "dataset.source=manifest", "--set",
           "dataset.manifest=data/manifest.tsv"});
  CHECK(r.status == 2);

  r = cli({"evaluate", "--workdir", wd, "--out", "ev", "--bundle", "exp/checkpoints/best", "--manifest",
           "data/manifest.tsv"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(dir / "ev/test.json"));

  r = cli({"cross-eval", "--workdir", wd, "--out", "cross", "--bundle", "exp/checkpoints/best", "--home",
           "data/manifest.tsv", "--foreign", "data/manifest.tsv", "--foreign-labels", "1-3"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(dir / "cross/cross_eval.txt"));
  CHECK(slurp(dir / "cross/cross_eval.txt").find("drop") != std::string::npos);
  const auto cross_json = slurp(dir / "cross/cross_eval.json");
  CHECK(cross_json.find("\"drop\"") != std::string::npos);

  r = cli({"profile", "--workdir", wd, "--out", "prof", "--bundle", "exp/checkpoints/best", "--batch-size", "2",
           "--batches", "2", "--warmup", "1"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(dir / "prof/profile_inference.json"));
  CHECK(fs::exists(dir / "prof/profile_training.json"));

  const auto before = hashes_under(dir / "exp");
  r = cli({"report", "--workdir", wd, "--experiment", "exp"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  for (const char* f : {"loss.png", "accuracy.png", "training_log.tsv", "test_confusion.png", "test_f1.png"})
    CHECK(fs::exists(dir / "exp/report" / f));
  const auto first = hashes_under(dir / "exp");
  for (const auto& [path, hash] : before) CHECK(first.at(path) == hash);
  r = cli({"report", "--workdir", wd, "--experiment", "exp"});
  REQUIRE(r.status == 0);
  CHECK(hashes_under(dir / "exp") == first);

  fs::create_directories(dir / "empty");
  r = cli({"report", "--workdir", wd, "--experiment", "empty"});
  CHECK(r.status == 3);
  CHECK(r.err.find("training_log.jsonl") != std::string::npos);
}

TEST_CASE("build-dataset from a session index and augment preview") {
  testing::TempDir dir("cli_build");
  std::ofstream(dir / "sessions.tsv")
      << "id\tpath\tlabel\tcamera_height\tloading_condition\n"
      << "a\t" << synthetic_video_uri(0, 40, {400, 360}, 1, 2) << "\t1\t38.12\tcargo\n"
      << "b\t" << synthetic_video_uri(1, 40, {400, 360}, 2, 2) << "\t2\t40.32\tballast\n";
  const std::string wd = dir.path().string();
  auto r = cli({"build-dataset", "--workdir", wd, "--out", "built", "--set", "dataset.session_index=sessions.tsv",
                "--set", "dataset.label_range=1-2", "--set", "dataset.train_target=6", "--set",
                "dataset.val_target=2", "--set", "dataset.test_target=2"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(dir / "built/manifest.tsv"));
  CHECK(fs::exists(dir / "built/balance.txt"));
  CHECK(read_manifest(dir / "built/manifest.tsv").records.size() == 20);

  r = cli({"augment-preview", "--workdir", wd, "--out", "preview", "--manifest", "built/manifest.tsv",
           "--count", "4"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(dir / "preview/augment_preview.png"));
}

TEST_CASE("ablation report renders one point per size") {
  testing::TempDir dir("cli_ablate");
  const std::string wd = dir.path().string();
  const auto r = cli(with({"ablate-size", "--workdir", wd, "--out", "abl", "--sizes", "1,2,3,4"}, kTinySynth));
  REQUIRE_MESSAGE(r.status == 0, r.err);
  REQUIRE(cli({"report", "--workdir", wd, "--experiment", "abl"}).status == 0);
  const auto table = slurp(dir / "abl/report/ablation.tsv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);
  CHECK(fs::exists(dir / "abl/report/ablation_f1.png"));
  CHECK(fs::exists(dir / "abl/report/ablation_time.png"));
}

}
