#include "seastate/cli.hpp"

#include <iostream>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "seastate/config.hpp"
#include "seastate/errors.hpp"
#include "seastate/evaluator.hpp"
#include "seastate/plot.hpp"
#include "seastate/profiler.hpp"
#include "seastate/synth.hpp"
#include "seastate/trainer.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace seastate {

namespace {

struct CommonOptions {
  std::string config;
  std::string workdir;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Run configuration file (INI)");
  cmd->add_option("--workdir", o.workdir, "Base directory for relative paths");
  cmd->add_option("--out", o.out, "Output directory (must be new or empty)");
  cmd->add_option("--seed", o.seed, "Seed for this command's randomness");
  cmd->add_option("--set", o.sets, "Override a config value: section.key=value");
}

class Context {
 public:
  Context(const CommonOptions& o, std::ostream& out) : opts_(o), out_(out) {
    workdir_ = o.workdir.empty() ? fs::current_path() : fs::path(o.workdir);
    if (!o.config.empty()) config_ = read_run_config(resolve(o.config));
    for (const auto& s : o.sets) apply_override(config_, s);
  }

  RunConfig& config() { return config_; }
  std::ostream& out() { return out_; }
  const std::optional<std::uint64_t>& seed() const { return opts_.seed; }

  fs::path resolve(const fs::path& p) const { return p.empty() || p.is_absolute() ? p : workdir_ / p; }

  /// Creates the command's output directory and writes the config snapshot.
  fs::path begin(const std::string& default_name) {
    config_.validate();
    out_dir_ = resolve(opts_.out.empty() ? fs::path(config_.output_dir) / default_name : fs::path(opts_.out));
    if (fs::exists(out_dir_) && !fs::is_empty(out_dir_))
      throw UsageError("output directory " + out_dir_.string() +
                       " already exists and is not empty; choose a new --out");
    fs::create_directories(out_dir_);
    write_run_config(out_dir_ / "run.ini", config_);
    return out_dir_;
  }

  AssetRegistry assets() const {
    const auto configured = config_.model.asset_registry.empty()
                                ? std::optional<fs::path>{}
                                : std::optional<fs::path>{resolve(config_.model.asset_registry)};
    return AssetRegistry::from_config(configured);
  }

 private:
  CommonOptions opts_;
  std::ostream& out_;
  fs::path workdir_;
  RunConfig config_;
  fs::path out_dir_;
};

struct LoadedDataset {
  DatasetManifest manifest;
  fs::path root;
};

LoadedDataset load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("manifest not found: " + path.string());
  return {read_manifest(path), path.parent_path()};
}

/// Dataset named by the config: an existing manifest, or one generated/built into `out/dataset`.
LoadedDataset obtain_dataset(Context& ctx, const fs::path& out) {
  const auto& d = ctx.config().dataset;
  switch (d.source) {
    case DatasetSource::manifest:
      return load_manifest(ctx.resolve(d.manifest));
    case DatasetSource::synth: {
      ctx.out() << "generating synthetic dataset\n";
      auto m = generate_dataset(ctx.config().synth, out / "dataset");
      return {std::move(m), out / "dataset"};
    }
    case DatasetSource::sessions: {
      const auto index = ctx.resolve(d.session_index);
      const auto sessions = read_session_index(index, index.parent_path());
      BuildOptions b;
      b.name = d.name;
      b.strategy = d.strategy;
      b.seed = d.seed;
      b.split_mode = d.split_mode;
      b.ll_offset_x = d.ll_offset_x;
      b.ll_offset_y = d.ll_offset_y;
      b.label_range = d.label_range;
      b.native = d.native;
      b.output_dir = out / "dataset";
      b.threads = ctx.config().threads;
      auto m = build_dataset(sessions, targets_for(d), b);
      return {std::move(m), out / "dataset"};
    }
  }
  throw ConfigError("config key dataset.source: unsupported value");
}

ModelOptions model_options(const RunConfig& c, const DatasetManifest& m) {
  if (c.model.num_classes != m.label_range.count())
    throw ConfigError(fmt::format("config key model.num_classes: {} but the dataset has {} classes",
                                  c.model.num_classes, m.label_range.count()));
  ModelOptions o;
  o.num_classes = c.model.num_classes;
  o.label_range = m.label_range;
  o.vit_head_width = c.model.vit_head_width;
  o.seed = c.training.seed;
  return o;
}

EpochCallback progress(std::ostream& out) {
  return [&out](const EpochRecord& r) {
    out << fmt::format("[{} {:>4}] loss {:.4f} acc {:.4f} | val loss {:.4f} acc {:.4f} | lr {:.2e} | {:.1f}s\n",
                       to_string(r.stage), r.epoch, r.train_loss, r.train_accuracy, r.val_loss,
                       r.val_accuracy, r.lr, r.seconds)
        << std::flush;
  };
}

LabelRange parse_label_range(const std::string& text) {
  RunConfig scratch;
  apply_override(scratch, "evaluation.foreign_labels=" + text);
  return scratch.evaluation.foreign_labels;
}

// ---- subcommands ----

void cmd_build_dataset(Context& ctx) {
  if (ctx.seed()) ctx.config().dataset.seed = *ctx.seed();
  ctx.config().dataset.source = DatasetSource::sessions;
  const auto out = ctx.begin("dataset-" + ctx.config().dataset.name);
  const auto index = ctx.resolve(ctx.config().dataset.session_index);
  const auto sessions = read_session_index(index, index.parent_path());
  const auto& d = ctx.config().dataset;
  BuildOptions b;
  b.name = d.name;
  b.strategy = d.strategy;
  b.seed = d.seed;
  b.split_mode = d.split_mode;
  b.ll_offset_x = d.ll_offset_x;
  b.ll_offset_y = d.ll_offset_y;
  b.label_range = d.label_range;
  b.native = d.native;
  b.output_dir = out;
  b.threads = ctx.config().threads;
  const auto manifest = build_dataset(sessions, targets_for(d), b);
  const auto balance = verify_manifest(manifest);
  const auto text = format_balance_report(balance, manifest.label_range);
  detail::write_text(out / "balance.txt", text);
  ctx.out() << text << fmt::format("{} crops written to {}\n", manifest.records.size(), out.string());
  if (!balance.ok()) throw DataError("dataset failed its balance checks; see balance.txt");
}

void cmd_synth(Context& ctx) {
  if (ctx.seed()) ctx.config().synth.seed = *ctx.seed();
  const auto out = ctx.begin("synth-" + ctx.config().synth.name);
  const auto manifest = generate_dataset(ctx.config().synth, out);
  const auto balance = verify_manifest(manifest);
  detail::write_text(out / "balance.txt", format_balance_report(balance, manifest.label_range));
  ctx.out() << fmt::format("{} synthetic crops written to {}\n", manifest.records.size(), out.string());
}

void cmd_augment_preview(Context& ctx, const std::string& manifest_path, int count) {
  auto seed = ctx.seed().value_or(ctx.config().training.seed);
  const auto out = ctx.begin("augment-preview");
  const auto data = load_manifest(ctx.resolve(manifest_path.empty() ? ctx.config().dataset.manifest : manifest_path));
  const auto records = data.manifest.split_records(Split::train);
  if (records.empty()) throw DataError("manifest has no training records");
  std::vector<Image> images;
  std::vector<std::string> captions;
  for (int k = 0; k < count; ++k) {
    const auto* r = records[static_cast<std::size_t>(k) % records.size()];
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    AugmentTrace trace;
    images.push_back(augment_train(to_float(read_image(data.root / r->relative_path())), rng,
                                   ctx.config().training.augment, &trace));
    std::string cap = fmt::format("{}Bft", r->label.value);
    if (trace.blurred) cap += " blur";
    if (trace.flipped) cap += " flip";
    if (trace.rotated) cap += fmt::format(" rot{:+.0f}", trace.rotation * 180.0 / std::numbers::pi);
    if (trace.grayscale) cap += " gray";
    captions.push_back(cap);
  }
  write_contact_sheet(out / "augment_preview.png", images, 4, captions);
  ctx.out() << "wrote " << (out / "augment_preview.png").string() << "\n";
}

void cmd_train(Context& ctx, const std::string& arch) {
  if (!arch.empty()) ctx.config().model.architecture = parse_architecture(arch);
  if (ctx.seed()) ctx.config().training.seed = *ctx.seed();
  const auto out = ctx.begin(std::string("train-") + to_string(ctx.config().model.architecture));
  const auto data = obtain_dataset(ctx, out);
  const auto spec = spec_for(ctx.config().model.architecture);
  const auto result = train_two_stage(spec, data.manifest, data.root, ctx.assets(),
                                      model_options(ctx.config(), data.manifest), ctx.config().training,
                                      out, progress(ctx.out()));
  ctx.out() << fmt::format("bundle: {} ({} checkpoint)\n", result.bundle.string(),
                           result.selected == CheckpointChoice::best ? "best" : "final");
  if (result.test_report) ctx.out() << format_eval_report(*result.test_report, ctx.config().evaluation.decimals);
}

void cmd_evaluate(Context& ctx, const std::string& bundle, const std::string& manifest_path,
                  const std::string& split) {
  if (!split.empty()) ctx.config().evaluation.split = parse_split(split);
  const auto out = ctx.begin("evaluate");
  const auto model = load_bundle(ctx.resolve(bundle));
  const auto data = load_manifest(ctx.resolve(manifest_path.empty() ? ctx.config().dataset.manifest : manifest_path));
  std::optional<LabelMapping> mapping;
  if (data.manifest.label_range != model.label_range())
    throw MappingRequiredError("dataset labels differ from the model's; use cross-eval with --foreign-labels");
  const auto ev = evaluate_model(model, data.manifest, data.root, ctx.config().evaluation.split, mapping);
  const auto stem = to_string(ctx.config().evaluation.split);
  write_eval_report(out, stem, ev.report, ctx.config().evaluation.decimals);
  plot_confusion(out / (std::string(stem) + "_confusion.png"), ev.report.confusion, "Confusion matrix");
  ctx.out() << format_eval_report(ev.report, ctx.config().evaluation.decimals);
}

void cmd_cross_eval(Context& ctx, const std::string& bundle, const std::string& home,
                    const std::string& foreign, const std::string& foreign_labels) {
  if (!foreign_labels.empty()) ctx.config().evaluation.foreign_labels = parse_label_range(foreign_labels);
  if (!foreign.empty()) ctx.config().evaluation.foreign_manifest = foreign;
  const auto out = ctx.begin("cross-eval");
  const auto model = load_bundle(ctx.resolve(bundle));
  const auto h = load_manifest(ctx.resolve(home.empty() ? ctx.config().dataset.manifest : home));
  const auto f = load_manifest(ctx.resolve(ctx.config().evaluation.foreign_manifest));
  const LabelMapping mapping{model.label_range(), f.manifest.label_range};
  if (f.manifest.label_range != ctx.config().evaluation.foreign_labels)
    throw ConfigError(fmt::format("config key evaluation.foreign_labels: declared {}-{} but the foreign manifest uses {}-{}",
                                  ctx.config().evaluation.foreign_labels.min, ctx.config().evaluation.foreign_labels.max,
                                  f.manifest.label_range.min, f.manifest.label_range.max));
  const auto split = ctx.config().evaluation.split;
  const auto report = cross_dataset_eval(model, load_split(h.manifest, h.root, split), h.manifest.label_range,
                                         load_split(f.manifest, f.root, split), mapping);
  const int dec = ctx.config().evaluation.cross_decimals;
  detail::write_text(out / "cross_eval.txt", format_cross_eval_report(report, dec));
  detail::write_text(out / "cross_eval.json", cross_eval_report_json(report));
  write_eval_report(out, "home", report.home, dec);
  write_eval_report(out, "foreign", report.foreign, dec);
  plot_confusion(out / "foreign_confusion.png", report.foreign.confusion, "Foreign test set");
  ctx.out() << format_cross_eval_report(report, dec);
}

void cmd_ablate(Context& ctx, const std::string& arch, const std::vector<int>& sizes) {
  if (!arch.empty()) ctx.config().model.architecture = parse_architecture(arch);
  if (!sizes.empty()) ctx.config().ablation.sizes = sizes;
  if (ctx.seed()) ctx.config().training.seed = *ctx.seed();
  const auto out = ctx.begin("ablation");
  const auto data = obtain_dataset(ctx, out);
  const auto curve = ablate_training_size(spec_for(ctx.config().model.architecture), data.manifest, data.root,
                                          ctx.assets(), model_options(ctx.config(), data.manifest),
                                          ctx.config().ablation.sizes, ctx.config().training, out,
                                          progress(ctx.out()));
  for (const auto& p : curve.points)
    ctx.out() << fmt::format("size {:>5}: macro f1 {:.3f}, training {:.1f}s\n", p.size, p.macro_f1,
                             p.training_seconds);
}

void cmd_profile(Context& ctx, const std::string& bundle, const std::string& manifest_path,
                 const std::string& log_path, std::optional<int> batch, std::optional<int> batches,
                 std::optional<int> warmup) {
  auto& p = ctx.config().profiling;
  if (batch) p.batch_size = *batch;
  if (batches) p.num_batches = *batches;
  if (warmup) p.warmup_batches = *warmup;
  const auto out = ctx.begin("profile");
  LabeledImageSet inputs;
  if (!manifest_path.empty()) {
    const auto data = load_manifest(ctx.resolve(manifest_path));
    inputs = load_split(data.manifest, data.root, ctx.config().evaluation.split);
  }
  const auto bundle_dir = ctx.resolve(bundle);
  auto inference = profile_inference(bundle_dir, inputs, p.batch_size, p.num_batches, p.warmup_batches);
  detail::write_text(out / "profile_inference.json", profile_json(inference));
  detail::write_text(out / "inference_table.tsv", format_inference_table({inference}));
  ctx.out() << format_inference_table({inference});
  fs::path log = log_path.empty() ? fs::path{} : ctx.resolve(log_path);
  if (log.empty() && fs::exists(bundle_dir.parent_path().parent_path() / "training_log.jsonl"))
    log = bundle_dir.parent_path().parent_path() / "training_log.jsonl";
  if (!log.empty()) {
    const auto model = load_bundle(bundle_dir);
    const auto training = profile_training(read_training_log(log), model.spec(),
                                           ctx.config().training.batch_size.value_or(model.spec().batch_size));
    detail::write_text(out / "profile_training.json", profile_json(training));
    detail::write_text(out / "training_table.tsv", format_training_table({training}));
    ctx.out() << format_training_table({training});
  }
}

void cmd_assets(Context& ctx, const std::string& registry) {
  const auto out = ctx.begin("assets");
  const auto reg_path = registry.empty() ? out / "registry.tsv" : ctx.resolve(registry);
  AssetRegistry reg = fs::exists(reg_path) ? AssetRegistry::load(reg_path) : AssetRegistry{};
  reg.register_asset(Architecture::surrogate_cnn, out / "surrogate_cnn.weights", surrogate_backbone_asset());
  reg.save(reg_path);
  ctx.out() << "registered surrogate_cnn in " << reg_path.string() << "\n";
}

}  // namespace

std::vector<fs::path> emit_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ReportError("experiment directory not found: " + dir.string());
  const fs::path out = dir / "report";
  std::vector<fs::path> written;
  std::vector<std::string> looked_for;

  auto present = [&](const fs::path& p) {
    looked_for.push_back(fs::relative(p, dir).generic_string());
    return fs::exists(p);
  };

  if (present(dir / "training_log.jsonl")) {
    const auto log = read_training_log(dir / "training_log.jsonl");
    Series tl{"train loss", {}, {}}, vl{"val loss", {}, {}}, ta{"train acc", {}, {}}, va{"val acc", {}, {}};
    std::string table = "stage\tepoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tlr\tseconds\n";
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      const auto& r = log.records[i];
      const double x = static_cast<double>(i + 1);
      tl.x.push_back(x), tl.y.push_back(r.train_loss);
      vl.x.push_back(x), vl.y.push_back(r.val_loss);
      ta.x.push_back(x), ta.y.push_back(r.train_accuracy);
      va.x.push_back(x), va.y.push_back(r.val_accuracy);
      table += fmt::format("{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.3e}\t{:.3f}\n", to_string(r.stage), r.epoch,
                           r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.lr, r.seconds);
    }
    if (!log.records.empty()) {
      plot_lines(out / "loss.png", {tl, vl}, {"Training and validation loss", "epoch", "loss"});
      plot_lines(out / "accuracy.png", {ta, va}, {"Training and validation accuracy", "epoch", "accuracy"});
      written.push_back(out / "loss.png");
      written.push_back(out / "accuracy.png");
    }
    detail::write_text(out / "training_log.tsv", table);
    written.push_back(out / "training_log.tsv");
  }

  for (const char* stem : {"eval/test", "test", "val", "foreign", "home"}) {
    const fs::path json_path = dir / (std::string(stem) + ".json");
    if (!present(json_path)) continue;
    const auto report = eval_report_from_json(*detail::read_text(json_path));
    const std::string base = fs::path(stem).filename().string();
    plot_confusion(out / (base + "_confusion.png"), report.confusion, "Confusion matrix (" + base + ")");
    std::vector<double> f1;
    for (const auto& c : report.classes) f1.push_back(c.f1);
    plot_bars(out / (base + "_f1.png"), report.confusion.labels, f1, {"Per-class F1 (" + base + ")", "class", "f1"});
    detail::write_text(out / (base + "_metrics.txt"), format_eval_report(report));
    written.push_back(out / (base + "_confusion.png"));
    written.push_back(out / (base + "_f1.png"));
    written.push_back(out / (base + "_metrics.txt"));
  }

  if (present(dir / "ablation.json")) {
    const auto curve = parse_ablation(*detail::read_text(dir / "ablation.json"));
    Series macro{"macro f1", {}, {}}, weighted{"weighted f1", {}, {}}, time{"training time", {}, {}};
    std::string table = "size\tmacro_f1\tweighted_f1\ttraining_seconds\n";
    for (const auto& p : curve.points) {
      macro.x.push_back(p.size), macro.y.push_back(p.macro_f1);
      weighted.x.push_back(p.size), weighted.y.push_back(p.weighted_f1);
      time.x.push_back(p.size), time.y.push_back(p.training_seconds);
      table += fmt::format("{}\t{:.6f}\t{:.6f}\t{:.3f}\n", p.size, p.macro_f1, p.weighted_f1, p.training_seconds);
    }
    std::vector<Series> per_class;
    for (std::size_t c = 0; c < curve.labels.size(); ++c) {
      Series s{fmt::format("{} Bft", curve.labels[c]), {}, {}};
      for (const auto& p : curve.points)
        if (c < p.class_f1.size()) s.x.push_back(p.size), s.y.push_back(p.class_f1[c]);
      per_class.push_back(s);
    }
    plot_lines(out / "ablation_f1.png", {macro, weighted}, {"F1 vs training images per class", "images per class", "f1", 800, 500, true});
    plot_lines(out / "ablation_class_f1.png", per_class, {"Per-class F1 vs training images per class", "images per class", "f1", 800, 500, true});
    plot_lines(out / "ablation_time.png", {time}, {"Training time vs training images per class", "images per class", "seconds", 800, 500, true});
    detail::write_text(out / "ablation.tsv", table);
    for (const char* f : {"ablation_f1.png", "ablation_class_f1.png", "ablation_time.png", "ablation.tsv"})
      written.push_back(out / f);
  }

  std::vector<ResourceProfile> training, inference;
  if (present(dir / "profile_training.json"))
    training.push_back(profile_from_json(*detail::read_text(dir / "profile_training.json")));
  if (present(dir / "profile_inference.json"))
    inference.push_back(profile_from_json(*detail::read_text(dir / "profile_inference.json")));
  if (!training.empty()) {
    detail::write_text(out / "training_table.tsv", format_training_table(training));
    written.push_back(out / "training_table.tsv");
  }
  if (!inference.empty()) {
    detail::write_text(out / "inference_table.tsv", format_inference_table(inference));
    written.push_back(out / "inference_table.tsv");
  }

  if (written.empty()) {
    std::string list;
    for (const auto& f : looked_for) list += (list.empty() ? "" : ", ") + f;
    throw ReportError("nothing to report in " + dir.string() + "; absent: " + list);
  }
  return written;
}

int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sea-state dataset, training and evaluation toolkit", "seastate"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonOptions common;
  std::string arch, bundle, manifest, split, home, foreign, foreign_labels, log, registry;
  std::vector<int> sizes;
  int preview_count = 16;
  std::optional<int> batch, batches, warmup;

  auto* build = app.add_subcommand("build-dataset", "Sample balanced 331x331 crops from video sessions");
  auto* synth = app.add_subcommand("synth", "Generate the procedural synthetic dataset");
  auto* preview = app.add_subcommand("augment-preview", "Render augmented training samples");
  auto* train = app.add_subcommand("train", "Two-stage transfer-learning run");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a bundle on a manifest split");
  auto* cross = app.add_subcommand("cross-eval", "Home vs foreign evaluation with performance drop");
  auto* ablate = app.add_subcommand("ablate-size", "Training-set-size ablation");
  auto* profile = app.add_subcommand("profile", "Inference throughput, memory and training time");
  auto* report = app.add_subcommand("report", "Render plots and tables for an experiment directory");
  auto* assets = app.add_subcommand("assets", "Write the surrogate backbone weights and register them");
  for (auto* c : {build, synth, preview, train, evaluate, cross, ablate, profile, report, assets})
    add_common(c, common);

  preview->add_option("--manifest", manifest, "Dataset manifest");
  preview->add_option("--count", preview_count, "Number of samples")->check(CLI::PositiveNumber);
  train->add_option("--arch", arch, "Architecture");
  evaluate->add_option("--bundle", bundle, "Model bundle directory")->required();
  evaluate->add_option("--manifest", manifest, "Dataset manifest");
  evaluate->add_option("--split", split, "train, val or test");
  cross->add_option("--bundle", bundle, "Model bundle directory")->required();
  cross->add_option("--home", home, "Home dataset manifest");
  cross->add_option("--foreign", foreign, "Foreign dataset manifest");
  cross->add_option("--foreign-labels", foreign_labels, "Foreign label range, e.g. 1-4");
  ablate->add_option("--arch", arch, "Architecture");
  ablate->add_option("--sizes", sizes, "Training images per class")->delimiter(',');
  profile->add_option("--bundle", bundle, "Model bundle directory")->required();
  profile->add_option("--manifest", manifest, "Use this dataset's images as inputs");
  profile->add_option("--log", log, "Training log for the training-time table");
  profile->add_option("--batch-size", batch, "Inference batch size");
  profile->add_option("--batches", batches, "Measured batches");
  profile->add_option("--warmup", warmup, "Unmeasured warmup batches");
  std::string experiment;
  report->add_option("--experiment", experiment, "Experiment directory")->required();
  assets->add_option("--registry", registry, "Registry file to create or update");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n" << app.help();
    return static_cast<int>(ErrorCategory::usage);
  }

  try {
    Context ctx(common, out);
    if (*build) cmd_build_dataset(ctx);
    else if (*synth) cmd_synth(ctx);
    else if (*preview) cmd_augment_preview(ctx, manifest, preview_count);
    else if (*train) cmd_train(ctx, arch);
    else if (*evaluate) cmd_evaluate(ctx, bundle, manifest, split);
    else if (*cross) cmd_cross_eval(ctx, bundle, home, foreign, foreign_labels);
    else if (*ablate) cmd_ablate(ctx, arch, sizes);
    else if (*profile) cmd_profile(ctx, bundle, manifest, log, batch, batches, warmup);
    else if (*assets) cmd_assets(ctx, registry);
    else if (*report) {
      for (const auto& f : emit_report(ctx.resolve(experiment))) out << "wrote " << f.string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    if (e.category() == ErrorCategory::usage) err << app.help();
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::runtime);
  }
}

int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return command_dispatch(args, out, err);
}

}  // namespace seastate
