#include "seastate/model.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "seastate/hash.hpp"
#include "seastate/nn.hpp"
#include "seastate/rng.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace seastate {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

using RowMatrixf = nn::RowMatrix<float>;
using Tensorf = nn::Tensor<float>;
using ConstRowMap = Eigen::Map<const RowMatrixf>;
using RowMap = Eigen::Map<RowMatrixf>;

constexpr int kSurrogateConv1 = 8;
constexpr int kSurrogateConv2 = 16;
constexpr int kSurrogateConv3 = 32;
constexpr std::uint64_t kSurrogatePretrainSeed = 20240517;

std::vector<Layer> surrogate_layers() {
  return {
      {"stem_pool", PoolOp{2}},
      {"conv1", ConvOp{3, kSurrogateConv1, true}},
      {"pool1", PoolOp{2}},
      {"conv2", ConvOp{kSurrogateConv1, kSurrogateConv2, true}},
      {"pool2", PoolOp{2}},
      {"conv3", ConvOp{kSurrogateConv2, kSurrogateConv3, true}},
      {"norm3", ChannelNormOp{}},
  };
}

std::size_t assign_offsets(std::vector<Layer>& layers, std::size_t start = 0) {
  std::size_t offset = start;
  for (auto& l : layers) {
    l.offset = offset;
    offset += l.stored_count();
  }
  return offset;
}

int default_feature_channels(Architecture a) {
  switch (a) {
    case Architecture::resnet101: return 2048;
    case Architecture::vit_b32: return 768;
    case Architecture::mobilenet_v2: return 1280;
    case Architecture::nasnet_mobile: return 1056;
    case Architecture::surrogate_cnn: return kSurrogateConv3;
  }
  return 0;
}

// Variance scale for the output dense layer.
constexpr double kOutputInitScale = 0.1;

void lecun_uniform(Eigen::Ref<Eigen::VectorXf> weights, int fan_in, Rng& rng, double scale = 1.0) {
  const double limit = std::sqrt(3.0 * scale / fan_in);
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    weights[i] = static_cast<float>(rng.uniform(-limit, limit));
}

json layer_to_json(const Layer& l) {
  json j{{"name", l.name}, {"offset", l.offset}};
  std::visit(overloaded{
                 [&](const PoolOp& op) {
                   j["kind"] = "avg_pool";
                   j["factor"] = op.factor;
                 },
                 [&](const ConvOp& op) {
                   j["kind"] = "conv3x3";
                   j["in"] = op.in;
                   j["out"] = op.out;
                   j["relu"] = op.relu;
                 },
                 [&](const GlobalPoolOp&) { j["kind"] = "global_avg_pool"; },
                 [&](const ChannelNormOp& op) {
                   j["kind"] = "channel_norm";
                   j["epsilon"] = op.epsilon;
                 },
                 [&](const DenseOp& op) {
                   j["kind"] = "dense";
                   j["in"] = op.in;
                   j["out"] = op.out;
                   j["activation"] = op.activation == Activation::gelu ? "gelu" : "linear";
                 },
                 [&](const OpaqueOp& op) {
                   j["kind"] = "opaque";
                   j["params"] = op.params;
                 },
             },
             l.op);
  return j;
}

Layer layer_from_json(const json& j) {
  Layer l;
  l.name = j.at("name").get<std::string>();
  l.offset = j.value("offset", std::size_t{0});
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "avg_pool")
    l.op = PoolOp{j.at("factor").get<int>()};
  else if (kind == "conv3x3")
    l.op = ConvOp{j.at("in").get<int>(), j.at("out").get<int>(), j.value("relu", true)};
  else if (kind == "global_avg_pool")
    l.op = GlobalPoolOp{};
  else if (kind == "channel_norm")
    l.op = ChannelNormOp{j.value("epsilon", 1e-3f)};
  else if (kind == "dense")
    l.op = DenseOp{j.at("in").get<int>(), j.at("out").get<int>(),
                   j.value("activation", "linear") == "gelu" ? Activation::gelu
                                                             : Activation::linear};
  else if (kind == "opaque")
    l.op = OpaqueOp{j.at("params").get<std::int64_t>()};
  else
    throw AssetError("unknown layer kind " + kind);
  return l;
}

json normalization_to_json(const Normalization& n) {
  return {{"mean", n.mean}, {"scale", n.scale}, {"convention", n.convention}};
}

Normalization normalization_from_json(const json& j) {
  Normalization n;
  n.mean = j.at("mean").get<std::array<float, 3>>();
  n.scale = j.at("scale").get<std::array<float, 3>>();
  n.convention = j.value("convention", "");
  return n;
}

json spec_to_json(const ArchitectureSpec& s) {
  return {{"name", to_string(s.name)},
          {"input_size", s.input_size},
          {"total_layers", s.total_layers},
          {"unfrozen_layers_stage2", s.unfrozen_layers_stage2},
          {"total_params", s.total_params},
          {"trainable_params_stage2", s.trainable_params_stage2},
          {"batch_size", s.batch_size},
          {"stage2_epochs", s.stage2_epochs}};
}

ArchitectureSpec spec_from_json(const json& j) {
  ArchitectureSpec s;
  s.name = parse_architecture(j.at("name").get<std::string>());
  s.input_size = j.at("input_size").get<int>();
  s.total_layers = j.at("total_layers").get<int>();
  s.unfrozen_layers_stage2 = j.at("unfrozen_layers_stage2").get<int>();
  s.total_params = j.at("total_params").get<std::int64_t>();
  s.trainable_params_stage2 = j.at("trainable_params_stage2").get<std::int64_t>();
  s.batch_size = j.at("batch_size").get<int>();
  s.stage2_epochs = j.at("stage2_epochs").get<int>();
  return s;
}

constexpr const char* kWeightsMagic = "SEASTATE-WEIGHTS 1";

void write_container(const fs::path& path, const json& header, const Eigen::VectorXf& weights) {
  static_assert(std::endian::native == std::endian::little, "weights are stored little-endian");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  json h = header;
  h["count"] = weights.size();
  out << kWeightsMagic << '\n' << h.dump() << '\n';
  out.write(reinterpret_cast<const char*>(weights.data()),
            static_cast<std::streamsize>(weights.size() * sizeof(float)));
  if (!out) throw AssetError("cannot write weights " + path.string());
}

std::pair<json, Eigen::VectorXf> read_container(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AssetError("cannot open weights " + path.string());
  std::string magic, header;
  std::getline(in, magic);
  if (magic != kWeightsMagic) throw AssetError("not a weights file: " + path.string());
  std::getline(in, header);
  json h;
  try {
    h = json::parse(header);
  } catch (const json::exception& e) {
    throw AssetError("corrupt weights header in " + path.string() + ": " + e.what());
  }
  const auto count = h.at("count").get<Eigen::Index>();
  Eigen::VectorXf weights(count);
  in.read(reinterpret_cast<char*>(weights.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
    throw AssetError("truncated weights in " + path.string());
  return {std::move(h), std::move(weights)};
}

struct LayerCache {
  Tensorf input;
  Tensorf output;
  Tensorf pre;  // dense pre-activation
  RowMatrixf cols;
};

Tensorf normalize_input(const Image& input, const Normalization& n, int size) {
  if (input.height() != size || input.width() != size)
    throw GeometryError(fmt::format("model input must be {}x{}, got {}x{}", size, size,
                                    input.width(), input.height()));
  Tensorf t(3, size, size);
  for (int c = 0; c < 3; ++c)
    t.data.row(c) = ((input.planes[c] - n.mean[c]) / n.scale[c]).reshaped<Eigen::RowMajor>().transpose();
  return t;
}

Tensorf forward_layer(const Layer& layer, const Eigen::VectorXf& params, const Tensorf& in,
                      LayerCache* cache) {
  return std::visit(
      overloaded{
          [&](const PoolOp& op) { return nn::avg_pool(in, op.factor); },
          [&](const ConvOp& op) {
            const ConstRowMap w(params.data() + layer.offset, op.out, op.in * 9);
            const Eigen::Map<const Eigen::VectorXf> b(params.data() + layer.offset + op.out * op.in * 9,
                                                      op.out);
            RowMatrixf local;
            return nn::conv3x3_forward(in, w, b, op.relu, cache ? cache->cols : local);
          },
          [&](const GlobalPoolOp&) { return nn::global_avg_pool(in); },
          [&](const ChannelNormOp& op) { return nn::channel_norm(in, op.epsilon); },
          [&](const DenseOp& op) {
            const ConstRowMap w(params.data() + layer.offset, op.out, op.in);
            const Eigen::Map<const Eigen::VectorXf> b(params.data() + layer.offset + op.out * op.in,
                                                      op.out);
            Tensorf out(op.out, 1, 1);
            out.data = w * in.data + b;
            if (op.activation == Activation::gelu) {
              if (cache) cache->pre = out;
              out.data = out.data.unaryExpr([](float x) { return nn::gelu(x); });
            }
            return out;
          },
          [&](const OpaqueOp&) -> Tensorf {
            throw AssetError("layer " + layer.name + " has no in-process implementation");
          },
      },
      layer.op);
}

/// Returns the gradient w.r.t. the layer input (empty if !need_input_grad).
Tensorf backward_layer(const Layer& layer, const Eigen::VectorXf& params, const LayerCache& cache,
                       Tensorf grad_out, bool param_grads, bool need_input_grad,
                       Eigen::VectorXf& grad) {
  return std::visit(
      overloaded{
          [&](const PoolOp& op) {
            return need_input_grad ? nn::avg_pool_backward(grad_out, op.factor, cache.input.height,
                                                           cache.input.width)
                                   : Tensorf{};
          },
          [&](const ConvOp& op) {
            if (op.relu) grad_out.data = (cache.output.data.array() > 0.0f).select(grad_out.data, 0.0f);
            if (param_grads) {
              RowMap dw(grad.data() + layer.offset, op.out, op.in * 9);
              dw.noalias() += grad_out.data * cache.cols.transpose();
              Eigen::Map<Eigen::VectorXf>(grad.data() + layer.offset + op.out * op.in * 9, op.out) +=
                  grad_out.data.rowwise().sum();
            }
            if (!need_input_grad) return Tensorf{};
            const ConstRowMap w(params.data() + layer.offset, op.out, op.in * 9);
            const RowMatrixf dcols = w.transpose() * grad_out.data;
            Tensorf gin(op.in, cache.input.height, cache.input.width);
            nn::col2im3x3(dcols, gin);
            return gin;
          },
          [&](const GlobalPoolOp&) {
            return need_input_grad
                       ? nn::global_avg_pool_backward(grad_out, cache.input.height, cache.input.width)
                       : Tensorf{};
          },
          [&](const ChannelNormOp& op) {
            return need_input_grad
                       ? nn::channel_norm_backward(grad_out, cache.input, cache.output, op.epsilon)
                       : Tensorf{};
          },
          [&](const DenseOp& op) {
            if (op.activation == Activation::gelu)
              grad_out.data = grad_out.data.cwiseProduct(
                  cache.pre.data.unaryExpr([](float x) { return nn::gelu_derivative(x); }));
            if (param_grads) {
              RowMap dw(grad.data() + layer.offset, op.out, op.in);
              dw.noalias() += grad_out.data * cache.input.data.transpose();
              Eigen::Map<Eigen::VectorXf>(grad.data() + layer.offset + op.out * op.in, op.out) +=
                  grad_out.data.col(0);
            }
            if (!need_input_grad) return Tensorf{};
            const ConstRowMap w(params.data() + layer.offset, op.out, op.in);
            Tensorf gin(op.in, 1, 1);
            gin.data = w.transpose() * grad_out.data;
            return gin;
          },
          [&](const OpaqueOp&) -> Tensorf {
            throw AssetError("layer " + layer.name + " has no in-process implementation");
          },
      },
      layer.op);
}

}  // namespace

const char* to_string(Architecture a) noexcept {
  switch (a) {
    case Architecture::resnet101: return "resnet101";
    case Architecture::vit_b32: return "vit_b32";
    case Architecture::mobilenet_v2: return "mobilenet_v2";
    case Architecture::nasnet_mobile: return "nasnet_mobile";
    case Architecture::surrogate_cnn: return "surrogate_cnn";
  }
  return "?";
}

Architecture parse_architecture(const std::string& text) {
  for (auto a : {Architecture::resnet101, Architecture::vit_b32, Architecture::mobilenet_v2,
                 Architecture::nasnet_mobile, Architecture::surrogate_cnn})
    if (text == to_string(a)) return a;
  throw ConfigError("unknown architecture '" + text + "'");
}

void ArchitectureSpec::validate() const {
  if (input_size != 224) throw ConfigError("architecture input_size must be 224");
  if (unfrozen_layers_stage2 > total_layers || unfrozen_layers_stage2 < 0)
    throw ConfigError("unfrozen layer count exceeds total layers");
  if (trainable_params_stage2 > total_params) throw ConfigError("trainable params exceed total");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (stage2_epochs < 1) throw ConfigError("stage-2 epochs must be >= 1");
}

std::vector<ArchitectureSpec> builtin_specs() {
  // name, input, total layers, unfrozen layers, total params, trainable params, batch, epochs
  return {
      {Architecture::resnet101, 224, 345, 305, 42'700'000, 24'800'000, 250, 230},
      {Architecture::vit_b32, 224, 19, 14, 87'500'000, 21'300'000, 200, 230},
      {Architecture::mobilenet_v2, 224, 154, 134, 2'700'000, 700'000, 250, 430},
      {Architecture::nasnet_mobile, 224, 769, 649, 4'300'000, 1'600'000, 250, 1030},
  };
}

ArchitectureSpec surrogate_spec() {
  const auto layers = surrogate_layers();
  ArchitectureSpec s;
  s.name = Architecture::surrogate_cnn;
  s.input_size = 224;
  s.total_layers = static_cast<int>(layers.size());
  s.unfrozen_layers_stage2 = 4;
  const std::int64_t head = std::int64_t{kSurrogateConv3} * 8 + 8;
  s.total_params = count_parameters(layers) + head;
  s.trainable_params_stage2 =
      count_parameters(std::span(layers).last(static_cast<std::size_t>(s.unfrozen_layers_stage2))) +
      head;
  s.batch_size = 20;
  s.stage2_epochs = 30;
  return s;
}

ArchitectureSpec spec_for(Architecture architecture) {
  if (architecture == Architecture::surrogate_cnn) return surrogate_spec();
  for (const auto& s : builtin_specs())
    if (s.name == architecture) return s;
  throw ConfigError("no spec for architecture");
}

std::int64_t Layer::param_count() const noexcept {
  return std::visit(overloaded{
                        [](const PoolOp&) -> std::int64_t { return 0; },
                        [](const ConvOp& op) -> std::int64_t { return op.out * (op.in * 9 + 1); },
                        [](const GlobalPoolOp&) -> std::int64_t { return 0; },
                        [](const ChannelNormOp&) -> std::int64_t { return 0; },
                        [](const DenseOp& op) -> std::int64_t { return op.out * (op.in + 1); },
                        [](const OpaqueOp& op) -> std::int64_t { return op.params; },
                    },
                    op);
}

std::size_t Layer::stored_count() const noexcept {
  return std::holds_alternative<OpaqueOp>(op) ? 0 : static_cast<std::size_t>(param_count());
}

std::int64_t count_parameters(std::span<const Layer> layers) {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.param_count();
  return total;
}

bool BackboneAsset::computable() const noexcept {
  for (const auto& l : layers)
    if (std::holds_alternative<OpaqueOp>(l.op)) return false;
  return true;
}

void write_weights_file(const fs::path& path, const BackboneAsset& asset) {
  json header{{"architecture", to_string(asset.architecture)},
              {"normalization", normalization_to_json(asset.normalization)},
              {"feature_channels", asset.feature_channels},
              {"provenance", asset.provenance},
              {"layers", json::array()}};
  for (const auto& l : asset.layers) header["layers"].push_back(layer_to_json(l));
  write_container(path, header, asset.weights);
}

BackboneAsset read_weights_file(const fs::path& path) {
  auto [header, weights] = read_container(path);
  BackboneAsset asset;
  try {
    asset.architecture = parse_architecture(header.at("architecture").get<std::string>());
    asset.normalization = normalization_from_json(header.at("normalization"));
    asset.provenance = header.value("provenance", "");
    for (const auto& l : header.at("layers")) asset.layers.push_back(layer_from_json(l));
    asset.feature_channels =
        header.value("feature_channels", default_feature_channels(asset.architecture));
  } catch (const json::exception& e) {
    throw AssetError("malformed weights header in " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw AssetError(std::string(e.what()) + " in " + path.string());
  }
  std::size_t expected = 0;
  for (const auto& l : asset.layers) expected = std::max(expected, l.offset + l.stored_count());
  if (expected != static_cast<std::size_t>(weights.size()))
    throw AssetError("weights size does not match layer table in " + path.string());
  asset.weights = std::move(weights);
  return asset;
}

BackboneAsset surrogate_backbone_asset() {
  BackboneAsset asset;
  asset.architecture = Architecture::surrogate_cnn;
  asset.layers = surrogate_layers();
  asset.weights = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(assign_offsets(asset.layers)));
  asset.normalization = Normalization{};
  asset.feature_channels = kSurrogateConv3;
  asset.provenance = "deterministic derivative filter bank + fixed-seed fan-in init";

  // conv1: luminance derivatives at four orientations, both signs.
  const auto& conv1 = asset.layers[1];
  const std::array<std::array<float, 9>, 4> base{{
      {-1, 0, 1, -2, 0, 2, -1, 0, 1},
      {-1, -2, -1, 0, 0, 0, 1, 2, 1},
      {0, 1, 2, -1, 0, 1, -2, -1, 0},
      {-2, -1, 0, -1, 0, 1, 0, 1, 2},
  }};
  const std::array<float, 3> luma{0.2989f, 0.5870f, 0.1140f};
  RowMap w1(asset.weights.data() + conv1.offset, kSurrogateConv1, 27);
  for (int f = 0; f < kSurrogateConv1; ++f) {
    const float sign = f % 2 == 0 ? 1.0f : -1.0f;
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 9; ++k) w1(f, c * 9 + k) = sign * luma[c] * base[f / 2][k] / 4.0f;
  }

  Rng rng(kSurrogatePretrainSeed);
  for (const auto& l : asset.layers) {
    if (l.name == "conv1") continue;
    if (const auto* op = std::get_if<ConvOp>(&l.op)) {
      auto w = asset.weights.segment(static_cast<Eigen::Index>(l.offset), op->out * op->in * 9);
      lecun_uniform(w, op->in * 9, rng);
    }
  }
  return asset;
}

AssetRegistry AssetRegistry::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw AssetError("cannot open asset registry " + path.string());
  AssetRegistry registry;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = detail::split(t, '\t');
    if (f.size() != 3) throw AssetError("malformed registry line: " + line);
    AssetEntry e;
    try {
      e.architecture = parse_architecture(detail::trim(f[0]));
    } catch (const ConfigError& err) {
      throw AssetError(err.what());
    }
    e.path = detail::trim(f[1]);
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    e.sha256 = detail::trim(f[2]);
    registry.add(std::move(e));
  }
  return registry;
}

std::optional<fs::path> AssetRegistry::resolve_path(const std::optional<fs::path>& configured) {
  if (const char* env = std::getenv(kEnvOverride); env && *env) return fs::path(env);
  return configured;
}

AssetRegistry AssetRegistry::from_config(const std::optional<fs::path>& configured) {
  const auto path = resolve_path(configured);
  if (!path || path->empty()) return {};
  return load(*path);
}

void AssetRegistry::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "# architecture\tpath\tsha256\n";
  for (const auto& e : entries_)
    out << to_string(e.architecture) << '\t' << e.path.string() << '\t' << e.sha256 << '\n';
  if (!out) throw AssetError("cannot write asset registry " + path.string());
}

void AssetRegistry::add(AssetEntry entry) {
  for (auto& e : entries_)
    if (e.architecture == entry.architecture) {
      e = std::move(entry);
      return;
    }
  entries_.push_back(std::move(entry));
}

void AssetRegistry::register_asset(Architecture architecture, const fs::path& path,
                                   const BackboneAsset& asset) {
  write_weights_file(path, asset);
  add({architecture, path, sha256_file(path)});
}

std::optional<AssetEntry> AssetRegistry::find(Architecture architecture) const {
  for (const auto& e : entries_)
    if (e.architecture == architecture) return e;
  return std::nullopt;
}

BackboneAsset AssetRegistry::load_backbone(Architecture architecture) const {
  const auto entry = find(architecture);
  if (!entry) {
    if (architecture == Architecture::surrogate_cnn) return surrogate_backbone_asset();
    throw AssetError(std::string("no pretrained asset registered for ") + to_string(architecture));
  }
  if (!fs::exists(entry->path)) throw AssetError("asset file missing: " + entry->path.string());
  const std::string actual = sha256_file(entry->path);
  if (actual != entry->sha256)
    throw AssetError("asset hash mismatch for " + entry->path.string() + ": expected " +
                     entry->sha256 + ", got " + actual);
  BackboneAsset asset = read_weights_file(entry->path);
  if (asset.architecture != architecture)
    throw AssetError("asset " + entry->path.string() + " holds " +
                     to_string(asset.architecture));
  return asset;
}

Stage parse_stage(const std::string& text) {
  if (text == "head_only") return Stage::head_only;
  if (text == "fine_tune") return Stage::fine_tune;
  throw ConfigError("unknown stage '" + text + "'");
}

const char* to_string(Stage stage) noexcept {
  return stage == Stage::head_only ? "head_only" : "fine_tune";
}

ClassifierModel::ClassifierModel(ArchitectureSpec spec, BackboneAsset backbone,
                                 const ModelOptions& options)
    : spec_(spec),
      num_classes_(options.num_classes),
      label_range_(options.label_range.value_or(LabelRange{1, options.num_classes})),
      normalization_(backbone.normalization),
      vit_head_width_(options.vit_head_width),
      provenance_(backbone.provenance) {
  if (num_classes_ < 2) throw ConfigError("num_classes must be >= 2");
  if (label_range_.count() != num_classes_)
    throw ConfigError("label range does not span num_classes");
  if (spec_.name == Architecture::vit_b32 && vit_head_width_ < 1)
    throw ConfigError("vit head width must be >= 1");
  computable_ = backbone.computable();
  layers_ = std::move(backbone.layers);
  backbone_layers_ = layers_.size();
  layers_.push_back({"head_pool", GlobalPoolOp{}});
  int features = backbone.feature_channels;
  if (spec_.name == Architecture::vit_b32) {
    layers_.push_back({"head_gelu", DenseOp{features, vit_head_width_, Activation::gelu}});
    features = vit_head_width_;
  }
  layers_.push_back({"head_out", DenseOp{features, num_classes_, Activation::linear}});

  std::size_t backbone_stored = 0;
  for (std::size_t i = 0; i < backbone_layers_; ++i)
    backbone_stored = std::max(backbone_stored, layers_[i].offset + layers_[i].stored_count());
  if (static_cast<std::size_t>(backbone.weights.size()) != backbone_stored)
    throw AssetError("backbone weights do not match its layer table");
  const std::size_t total = assign_offsets(layers_, 0);
  params_ = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(total));
  // assign_offsets recomputes backbone offsets contiguously; copy layer by layer.
  std::size_t src = 0;
  for (std::size_t i = 0; i < backbone_layers_; ++i) {
    const auto n = static_cast<Eigen::Index>(layers_[i].stored_count());
    params_.segment(static_cast<Eigen::Index>(layers_[i].offset), n) =
        backbone.weights.segment(static_cast<Eigen::Index>(src), n);
    src += static_cast<std::size_t>(n);
  }
  trainable_.assign(layers_.size(), false);
  reset_head(options.seed);
}

void ClassifierModel::reset_head(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x4ead}));
  for (std::size_t i = backbone_layers_; i < layers_.size(); ++i) {
    const auto* op = std::get_if<DenseOp>(&layers_[i].op);
    if (!op) continue;
    const auto offset = static_cast<Eigen::Index>(layers_[i].offset);
    const bool output = i + 1 == layers_.size();
    lecun_uniform(params_.segment(offset, op->out * op->in), op->in, rng, output ? kOutputInitScale : 1.0);
    params_.segment(offset + op->out * op->in, op->out).setZero();
  }
}

std::size_t ClassifierModel::backbone_parameter_end() const noexcept {
  return backbone_layers_ < layers_.size() ? layers_[backbone_layers_].offset
                                           : static_cast<std::size_t>(params_.size());
}

std::vector<std::pair<std::size_t, std::size_t>> ClassifierModel::trainable_ranges() const {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!trainable_[i] || layers_[i].stored_count() == 0) continue;
    const std::size_t b = layers_[i].offset;
    const std::size_t e = b + layers_[i].stored_count();
    if (!ranges.empty() && ranges.back().second == b)
      ranges.back().second = e;
    else
      ranges.emplace_back(b, e);
  }
  return ranges;
}

std::int64_t ClassifierModel::total_parameter_count() const { return count_parameters(layers_); }

std::int64_t ClassifierModel::trainable_parameter_count() const {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (trainable_[i]) total += layers_[i].param_count();
  return total;
}

std::int64_t ClassifierModel::head_parameter_count() const {
  return count_parameters(std::span(layers_).subspan(backbone_layers_));
}

Eigen::VectorXf ClassifierModel::logits(const Image& input) const {
  if (!computable_)
    throw AssetError(std::string("no in-process inference backend for ") + to_string(spec_.name));
  Tensorf x = normalize_input(input, normalization_, spec_.input_size);
  for (const auto& layer : layers_) x = forward_layer(layer, params_, x, nullptr);
  return x.data.col(0);
}

Eigen::VectorXf ClassifierModel::features(const Image& input) const {
  if (!computable_)
    throw AssetError(std::string("no in-process inference backend for ") + to_string(spec_.name));
  Tensorf x = normalize_input(input, normalization_, spec_.input_size);
  for (std::size_t i = 0; i < backbone_layers_; ++i) x = forward_layer(layers_[i], params_, x, nullptr);
  return nn::global_avg_pool(x).data.col(0);
}

float ClassifierModel::accumulate_gradient(const Image& input, int target, Eigen::VectorXf& grad,
                                           Eigen::VectorXf* logits_out) const {
  if (!computable_)
    throw AssetError(std::string("no in-process training backend for ") + to_string(spec_.name));
  if (grad.size() != params_.size()) grad = Eigen::VectorXf::Zero(params_.size());
  std::size_t lowest = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (trainable_[i]) {
      lowest = i;
      break;
    }

  std::vector<LayerCache> caches(layers_.size());
  Tensorf x = normalize_input(input, normalization_, spec_.input_size);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool keep = i >= lowest;
    if (keep) caches[i].input = x;
    x = forward_layer(layers_[i], params_, x, keep ? &caches[i] : nullptr);
    if (keep) caches[i].output = x;
  }
  Eigen::VectorXf z = x.data.col(0);
  if (logits_out) *logits_out = z;
  Eigen::VectorXf dz(z.size());
  const float loss = nn::cross_entropy(z, target, dz);
  if (lowest == layers_.size()) return loss;

  Tensorf g(static_cast<int>(dz.size()), 1, 1);
  g.data = dz;
  for (std::size_t i = layers_.size(); i-- > lowest;) {
    g = backward_layer(layers_[i], params_, caches[i], std::move(g), trainable_[i], i > lowest,
                       grad);
  }
  return loss;
}

ClassifierModel build_classifier(const ArchitectureSpec& spec, const AssetRegistry& assets,
                                 const ModelOptions& options) {
  spec.validate();
  if (options.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  return ClassifierModel(spec, assets.load_backbone(spec.name), options);
}

void configure_stage(ClassifierModel& model, Stage stage) {
  const std::size_t nb = model.backbone_layer_count();
  const std::size_t n = model.layers().size();
  for (std::size_t i = 0; i < n; ++i) model.set_trainable(i, i >= nb);
  if (stage == Stage::head_only) return;
  const auto unfrozen = static_cast<std::size_t>(model.spec().unfrozen_layers_stage2);
  if (unfrozen > nb)
    throw ConfigError(fmt::format("spec unfreezes {} layers but the backbone has {}", unfrozen, nb));
  for (std::size_t i = nb - unfrozen; i < nb; ++i) model.set_trainable(i, true);
  const double deviation = parameter_budget_deviation(model);
  if (deviation > kParameterBudgetTolerance)
    throw ConfigError(fmt::format("{} trainable parameters deviate {:.1f}% from the budget {}",
                                  model.trainable_parameter_count(), deviation * 100.0,
                                  model.spec().trainable_params_stage2));
}

double parameter_budget_deviation(const ClassifierModel& model) {
  const double budget = static_cast<double>(model.spec().trainable_params_stage2);
  return std::abs(static_cast<double>(model.trainable_parameter_count()) - budget) / budget;
}

Eigen::MatrixXd predict_batch(const ClassifierModel& model, std::span<const Image> images) {
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(images.size()), model.num_classes());
  for (std::size_t i = 0; i < images.size(); ++i)
    probs.row(static_cast<Eigen::Index>(i)) =
        nn::softmax(model.logits(images[i]).cast<double>()).transpose();
  return probs;
}

int predicted_label(const ClassifierModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  row.maxCoeff(&best);
  return model.label_range().label_at(static_cast<int>(best));
}

void save_bundle(const ClassifierModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  json weights_header{{"architecture", to_string(model.architecture())},
                      {"layers", json::array()}};
  for (const auto& l : model.layers()) weights_header["layers"].push_back(layer_to_json(l));
  write_container(dir / "weights.bin", weights_header, model.parameters());
  json bundle{{"format_version", 1},
              {"tool_version", kToolVersion},
              {"spec", spec_to_json(model.spec())},
              {"num_classes", model.num_classes()},
              {"label_range", {model.label_range().min, model.label_range().max}},
              {"normalization", normalization_to_json(model.normalization())},
              {"vit_head_width", model.vit_head_width()},
              {"backbone_layers", model.backbone_layer_count()},
              {"provenance", model.provenance()},
              {"weights_file", "weights.bin"},
              {"weights_sha256", sha256_file(dir / "weights.bin")}};
  std::ofstream out(dir / "bundle.json");
  out << bundle.dump(2) << '\n';
  if (!out) throw AssetError("cannot write bundle " + dir.string());
}

ClassifierModel load_bundle(const fs::path& dir) {
  std::ifstream in(dir / "bundle.json");
  if (!in) throw AssetError("no bundle.json in " + dir.string());
  json bundle;
  try {
    bundle = json::parse(in);
  } catch (const json::exception& e) {
    throw AssetError("corrupt bundle.json: " + std::string(e.what()));
  }
  if (bundle.value("format_version", 0) != 1) throw AssetError("unsupported bundle version");
  const fs::path weights_path = dir / bundle.value("weights_file", "weights.bin");
  if (sha256_file(weights_path) != bundle.value("weights_sha256", ""))
    throw AssetError("bundle weights hash mismatch in " + dir.string());
  auto [header, weights] = read_container(weights_path);

  BackboneAsset backbone;
  try {
    const ArchitectureSpec spec = spec_from_json(bundle.at("spec"));
    const auto nb = bundle.at("backbone_layers").get<std::size_t>();
    std::vector<Layer> layers;
    for (const auto& l : header.at("layers")) layers.push_back(layer_from_json(l));
    if (nb > layers.size()) throw AssetError("bundle layer table too short");
    backbone.architecture = spec.name;
    backbone.layers.assign(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(nb));
    backbone.normalization = normalization_from_json(bundle.at("normalization"));
    backbone.provenance = bundle.value("provenance", "");
    std::size_t backbone_end = 0;
    for (const auto& l : backbone.layers) backbone_end = std::max(backbone_end, l.offset + l.stored_count());
    backbone.weights = weights.head(static_cast<Eigen::Index>(backbone_end));
    const auto* first_dense = std::get_if<DenseOp>(&layers.at(nb + 1).op);
    if (!first_dense) throw AssetError("bundle head layout not recognised");
    backbone.feature_channels = first_dense->in;

    ModelOptions options;
    options.num_classes = bundle.at("num_classes").get<int>();
    const auto range = bundle.at("label_range").get<std::array<int, 2>>();
    options.label_range = LabelRange{range[0], range[1]};
    options.vit_head_width = bundle.value("vit_head_width", 512);
    ClassifierModel model(spec, std::move(backbone), options);
    if (model.parameters().size() != weights.size())
      throw AssetError("bundle weights do not match the model layout");
    model.parameters() = weights;
    return model;
  } catch (const json::exception& e) {
    throw AssetError("malformed bundle in " + dir.string() + ": " + e.what());
  }
}

}  // namespace seastate
