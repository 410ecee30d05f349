#include <cmath>
#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "seastate/model.hpp"
#include "seastate/optim.hpp"
#include "support.hpp"

using namespace seastate;
using testing::noise_image;

namespace {

ClassifierModel surrogate(int classes = 8, std::uint64_t seed = 0) {
  ModelOptions o;
  o.num_classes = classes;
  o.seed = seed;
  return build_classifier(surrogate_spec(), AssetRegistry{}, o);
}

/// Parameter count of one layer derived from its shape alone.
std::int64_t shape_params(const Layer& l) {
  if (const auto* c = std::get_if<ConvOp>(&l.op)) return std::int64_t{c->out} * c->in * 9 + c->out;
  if (const auto* d = std::get_if<DenseOp>(&l.op)) return std::int64_t{d->out} * d->in + d->out;
  if (const auto* o = std::get_if<OpaqueOp>(&l.op)) return o->params;
  return 0;
}

/// Accounting-only backbone: `layers` opaque blocks of `each` parameters.
BackboneAsset opaque_asset(Architecture a, int layers, std::int64_t each, int channels) {
  BackboneAsset asset;
  asset.architecture = a;
  for (int i = 0; i < layers; ++i) asset.layers.push_back({"block" + std::to_string(i), OpaqueOp{each}});
  asset.weights = Eigen::VectorXf();
  asset.feature_channels = channels;
  asset.provenance = "fixture";
  return asset;
}

}  // namespace

TEST_SUITE("model-zoo") {

TEST_CASE("published backbone configurations") {
  const auto specs = builtin_specs();
  REQUIRE(specs.size() == 4);
  auto find = [&](Architecture a) {
    for (const auto& s : specs)
      if (s.name == a) return s;
    FAIL("missing spec");
    return ArchitectureSpec{};
  };
  const auto resnet = find(Architecture::resnet101);
  CHECK(resnet.trainable_params_stage2 == 24'800'000);
  CHECK(resnet.total_params == 42'700'000);
  CHECK(resnet.unfrozen_layers_stage2 == 305);
  CHECK(resnet.total_layers == 345);
  CHECK(resnet.stage2_epochs == 230);
  CHECK(resnet.batch_size == 250);
  const auto vit = find(Architecture::vit_b32);
  CHECK(vit.batch_size == 200);
  CHECK(vit.trainable_params_stage2 == 21'300'000);
  CHECK(vit.unfrozen_layers_stage2 == 14);
  CHECK(vit.total_layers == 19);
  const auto mobile = find(Architecture::mobilenet_v2);
  CHECK(mobile.trainable_params_stage2 == 700'000);
  CHECK(mobile.stage2_epochs == 430);
  CHECK(mobile.unfrozen_layers_stage2 == 134);
  const auto nas = find(Architecture::nasnet_mobile);
  CHECK(nas.stage2_epochs == 1030);
  CHECK(nas.trainable_params_stage2 == 1'600'000);
  CHECK(nas.total_layers == 769);
  for (const auto& s : specs) {
    CHECK(s.input_size == 224);
    CHECK_NOTHROW(s.validate());
  }
  CHECK(parse_architecture("resnet101") == Architecture::resnet101);
  CHECK_THROWS_AS(parse_architecture("alexnet"), ConfigError);
}

TEST_CASE("surrogate outputs one score per class") {
  CHECK(surrogate(8).logits(noise_image(224, 224, 1)).size() == 8);
  CHECK(surrogate(4).logits(noise_image(224, 224, 1)).size() == 4);
  CHECK_THROWS_AS(surrogate(1), ConfigError);
}

TEST_CASE("probability rows are normalised, deterministic, and near uniform when fresh") {
  const auto model = surrogate();
  std::vector<Image> batch{noise_image(224, 224, 2), noise_image(224, 224, 3), noise_image(224, 224, 2)};
  const auto probs = predict_batch(model, batch);
  REQUIRE(probs.rows() == 3);
  for (int r = 0; r < 3; ++r) CHECK(std::abs(probs.row(r).sum() - 1.0) <= 1e-6);
  CHECK(probs.row(0) == probs.row(2));
  CHECK(predict_batch(model, std::span(batch).first(1)).rows() == 1);
  CHECK(predict_batch(model, batch) == probs);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto fresh = surrogate(8, seed);
    std::vector<Image> one{noise_image(224, 224, 40 + seed)};
    const auto p = predict_batch(fresh, one);
    CHECK(p.minCoeff() >= 0.02);
    CHECK(p.maxCoeff() <= 0.5);
  }
}

TEST_CASE("argmax index maps to the label offset") {
  ModelOptions o;
  o.num_classes = 4;
  o.label_range = LabelRange{3, 6};
  const auto model = build_classifier(surrogate_spec(), AssetRegistry{}, o);
  Eigen::RowVectorXd row(4);
  row << 0.1, 0.2, 0.6, 0.1;
  CHECK(predicted_label(model, row) == 5);
  row << 0.7, 0.1, 0.1, 0.1;
  CHECK(predicted_label(model, row) == 3);
}

TEST_CASE("parameter accounting matches an independent per-layer sum") {
  auto model = surrogate();
  std::int64_t total = 0, head = 0;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    total += shape_params(model.layers()[i]);
    if (i >= model.backbone_layer_count()) head += shape_params(model.layers()[i]);
  }
  CHECK(model.total_parameter_count() == total);
  CHECK(model.head_parameter_count() == head);
  CHECK(model.parameters().size() == total);
  CHECK(total == model.spec().total_params);

  configure_stage(model, Stage::head_only);
  CHECK(model.trainable_parameter_count() == head);

  configure_stage(model, Stage::fine_tune);
  std::int64_t expected = head;
  const auto nb = model.backbone_layer_count();
  for (std::size_t i = nb - model.spec().unfrozen_layers_stage2; i < nb; ++i)
    expected += shape_params(model.layers()[i]);
  CHECK(model.trainable_parameter_count() == expected);
  CHECK(parameter_budget_deviation(model) <= kParameterBudgetTolerance);
  std::size_t ranged = 0;
  for (auto [b, e] : model.trainable_ranges()) ranged += e - b;
  CHECK(static_cast<std::int64_t>(ranged) == expected);
}

TEST_CASE("accounting-only backbones: head sizes and budget enforcement") {
  ArchitectureSpec spec{Architecture::resnet101, 224, 10, 4, 10'020'000, 4'016'392, 250, 230};
  const auto model_for = [&](const ArchitectureSpec& s) {
    return ClassifierModel(s, opaque_asset(s.name, 10, 1'000'000, 2048), ModelOptions{});
  };
  auto model = model_for(spec);
  CHECK_FALSE(model.computable());
  CHECK(model.head_parameter_count() == 2048 * 8 + 8);
  configure_stage(model, Stage::head_only);
  CHECK(model.trainable_parameter_count() == 2048 * 8 + 8);
  configure_stage(model, Stage::fine_tune);
  CHECK(model.trainable_parameter_count() == 4'000'000 + 2048 * 8 + 8);
  CHECK_THROWS_AS(model.logits(noise_image(224, 224, 1)), AssetError);

  auto tight = spec;
  tight.trainable_params_stage2 = 5'000'000;
  auto off = model_for(tight);
  CHECK_THROWS_AS(configure_stage(off, Stage::fine_tune), ConfigError);

  ArchitectureSpec vit{Architecture::vit_b32, 224, 4, 2, 2'500'000, 2'000'000, 200, 230};
  ClassifierModel v(vit, opaque_asset(Architecture::vit_b32, 4, 500'000, 768), ModelOptions{});
  CHECK(v.head_parameter_count() == 768 * 512 + 512 + 512 * 8 + 8);
}

TEST_CASE("head-only step leaves every backbone weight untouched") {
  auto model = surrogate();
  configure_stage(model, Stage::head_only);
  const Eigen::VectorXf before = model.parameters();
  Eigen::VectorXf grad = Eigen::VectorXf::Zero(model.parameters().size());
  for (int i = 0; i < 3; ++i) model.accumulate_gradient(noise_image(224, 224, 60 + i), i, grad);
  const auto end = static_cast<Eigen::Index>(model.backbone_parameter_end());
  CHECK(grad.head(end).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(grad.tail(grad.size() - end).cwiseAbs().maxCoeff() > 0.0f);
  Adam adam(static_cast<std::size_t>(grad.size()));
  adam.step(model.parameters(), grad, model.trainable_ranges(), 1e-2);
  CHECK((model.parameters().head(end) - before.head(end)).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((model.parameters() - before).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("model gradient matches a directional finite difference") {
  auto model = surrogate(4, 3);
  configure_stage(model, Stage::fine_tune);
  const Image x = noise_image(224, 224, 70);
  Eigen::VectorXf grad = Eigen::VectorXf::Zero(model.parameters().size());
  model.accumulate_gradient(x, 2, grad);
  const Eigen::VectorXf base = model.parameters();
  auto loss_at = [&](double t) {
    model.parameters() = base + static_cast<float>(t) * grad;
    Eigen::VectorXf g;
    return static_cast<double>(model.accumulate_gradient(x, 2, g));
  };
  const double norm2 = grad.cast<double>().squaredNorm();
  REQUIRE(norm2 > 0);
  const double h = 1e-2 / std::sqrt(norm2);
  const double numeric = (loss_at(h) - loss_at(-h)) / (2 * h);
  CHECK(numeric == doctest::Approx(norm2).epsilon(0.05));
  model.parameters() = base;
}

TEST_CASE("bundle round-trip preserves outputs") {
  testing::TempDir dir("bundle");
  ModelOptions o;
  o.num_classes = 4;
  o.label_range = LabelRange{1, 4};
  o.seed = 9;
  auto model = build_classifier(surrogate_spec(), AssetRegistry{}, o);
  model.parameters().tail(10).setConstant(0.125f);
  save_bundle(model, dir / "b");
  const auto loaded = load_bundle(dir / "b");
  CHECK(loaded.parameters() == model.parameters());
  CHECK(loaded.label_range() == model.label_range());
  CHECK(loaded.spec() == model.spec());
  const Image x = noise_image(224, 224, 80);
  CHECK(loaded.logits(x) == model.logits(x));
  {
    std::fstream f(dir / "b" / "weights.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(16);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_bundle(dir / "b"), AssetError);
  CHECK_THROWS_AS(load_bundle(dir / "missing"), AssetError);
}

TEST_CASE("asset registry verifies hashes and honours the environment override") {
  testing::TempDir dir("registry");
  AssetRegistry reg;
  reg.register_asset(Architecture::surrogate_cnn, dir / "s.weights", surrogate_backbone_asset());
  reg.save(dir / "registry.tsv");
  const auto loaded = AssetRegistry::load(dir / "registry.tsv");
  const auto asset = loaded.load_backbone(Architecture::surrogate_cnn);
  CHECK(asset.weights == surrogate_backbone_asset().weights);
  CHECK(asset.feature_channels == 32);
  CHECK_THROWS_AS(loaded.load_backbone(Architecture::resnet101), AssetError);

  {
    std::ofstream f(dir / "s.weights", std::ios::app | std::ios::binary);
    f << "tamper";
  }
  CHECK_THROWS_AS(loaded.load_backbone(Architecture::surrogate_cnn), AssetError);

  ::setenv(AssetRegistry::kEnvOverride, (dir / "env.tsv").c_str(), 1);
  const auto resolved = AssetRegistry::resolve_path(std::filesystem::path("configured.tsv"));
  ::unsetenv(AssetRegistry::kEnvOverride);
  REQUIRE(resolved);
  CHECK(*resolved == dir / "env.tsv");
  CHECK(AssetRegistry::resolve_path(std::filesystem::path("configured.tsv")) ==
        std::filesystem::path("configured.tsv"));
}

TEST_CASE("weights container round-trip") {
  testing::TempDir dir("weights");
  const auto asset = surrogate_backbone_asset();
  write_weights_file(dir / "w.bin", asset);
  const auto back = read_weights_file(dir / "w.bin");
  CHECK(back.weights == asset.weights);
  CHECK(back.layers.size() == asset.layers.size());
  CHECK(back.normalization == asset.normalization);
  CHECK(back.architecture == asset.architecture);
  std::ofstream(dir / "bad.bin") << "not a weights file\n";
  CHECK_THROWS_AS(read_weights_file(dir / "bad.bin"), AssetError);
}

}
