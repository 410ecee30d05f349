#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "seastate/dataset.hpp"
#include "seastate/image.hpp"

namespace seastate {

enum class Architecture { resnet101, vit_b32, mobilenet_v2, nasnet_mobile, surrogate_cnn };

const char* to_string(Architecture a) noexcept;
Architecture parse_architecture(const std::string& text);

struct ArchitectureSpec {
  Architecture name = Architecture::resnet101;
  int input_size = 224;
  int total_layers = 0;
  int unfrozen_layers_stage2 = 0;
  std::int64_t total_params = 0;
  std::int64_t trainable_params_stage2 = 0;
  int batch_size = 250;
  int stage2_epochs = 0;

  void validate() const;
  bool operator==(const ArchitectureSpec&) const = default;
};

/// The four published backbone configurations, in a fixed order.
std::vector<ArchitectureSpec> builtin_specs();
/// Includes the surrogate.
ArchitectureSpec spec_for(Architecture architecture);
/// Small CNN trained fully in-process; stands in for the pretrained backbones at desk scale.
ArchitectureSpec surrogate_spec();

/// Input normalization applied before the backbone: (pixel - mean) / scale, pixels in [0,1].
struct Normalization {
  std::array<float, 3> mean{0.5f, 0.5f, 0.5f};
  std::array<float, 3> scale{0.25f, 0.25f, 0.25f};
  std::string convention = "centered";
  bool operator==(const Normalization&) const = default;
};

struct PoolOp {
  int factor = 2;
};
struct ConvOp {
  int in = 0;
  int out = 0;
  bool relu = true;
};
struct GlobalPoolOp {};
/// Parameter-free divisive normalization across channels.
struct ChannelNormOp {
  float epsilon = 1e-3f;
};
enum class Activation { linear, gelu };
struct DenseOp {
  int in = 0;
  int out = 0;
  Activation activation = Activation::linear;
};
/// A layer known only by its parameter count (external backbones).
struct OpaqueOp {
  std::int64_t params = 0;
};
using LayerOp = std::variant<PoolOp, ConvOp, GlobalPoolOp, ChannelNormOp, DenseOp, OpaqueOp>;

struct Layer {
  std::string name;
  LayerOp op;
  /// Start of this layer's weights in the flat parameter vector.
  std::size_t offset = 0;

  std::int64_t param_count() const noexcept;
  /// Parameters held in the flat vector (0 for opaque layers).
  std::size_t stored_count() const noexcept;
};

std::int64_t count_parameters(std::span<const Layer> layers);

/// Pretrained backbone weights plus the metadata needed to use them.
struct BackboneAsset {
  Architecture architecture = Architecture::surrogate_cnn;
  std::vector<Layer> layers;
  Eigen::VectorXf weights;
  Normalization normalization;
  int feature_channels = 0;
  std::string provenance;

  /// All layers can be evaluated in-process.
  bool computable() const noexcept;
};

/// Container: a text line, a one-line JSON header, then little-endian float32 weights.
void write_weights_file(const std::filesystem::path& path, const BackboneAsset& asset);
BackboneAsset read_weights_file(const std::filesystem::path& path);

/// Deterministic "pretrained" weights for the surrogate: oriented derivative
/// filters in the first layer, fixed-seed fan-in initialisation above.
BackboneAsset surrogate_backbone_asset();

struct AssetEntry {
  Architecture architecture = Architecture::surrogate_cnn;
  std::filesystem::path path;
  std::string sha256;
};

/// Registry file: one "architecture<TAB>path<TAB>sha256" line per asset.
class AssetRegistry {
 public:
  static constexpr const char* kEnvOverride = "SEASTATE_ASSET_REGISTRY";

  AssetRegistry() = default;
  static AssetRegistry load(const std::filesystem::path& path);
  /// The env override wins over `configured`; an empty result means no registry.
  static std::optional<std::filesystem::path> resolve_path(
      const std::optional<std::filesystem::path>& configured);
  static AssetRegistry from_config(const std::optional<std::filesystem::path>& configured);

  void save(const std::filesystem::path& path) const;
  void add(AssetEntry entry);
  /// Writes the asset and registers it with its hash.
  void register_asset(Architecture architecture, const std::filesystem::path& path,
                      const BackboneAsset& asset);
  std::optional<AssetEntry> find(Architecture architecture) const;

  /// Verifies the hash before reading. The surrogate falls back to its built-in
  /// weights when unregistered; other architectures throw AssetError.
  BackboneAsset load_backbone(Architecture architecture) const;

 private:
  std::vector<AssetEntry> entries_;
};

enum class Stage { head_only, fine_tune };
Stage parse_stage(const std::string& text);
const char* to_string(Stage stage) noexcept;

struct ModelOptions {
  int num_classes = 8;
  std::optional<LabelRange> label_range;  ///< defaults to 1..num_classes
  int vit_head_width = 512;
  std::uint64_t seed = 0;
};

class ClassifierModel {
 public:
  ClassifierModel(ArchitectureSpec spec, BackboneAsset backbone, const ModelOptions& options);

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  Architecture architecture() const noexcept { return spec_.name; }
  int num_classes() const noexcept { return num_classes_; }
  const LabelRange& label_range() const noexcept { return label_range_; }
  const Normalization& normalization() const noexcept { return normalization_; }
  int vit_head_width() const noexcept { return vit_head_width_; }
  const std::string& provenance() const noexcept { return provenance_; }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t backbone_layer_count() const noexcept { return backbone_layers_; }
  /// Flat parameter vector; backbone weights occupy [0, backbone_parameter_end()).
  Eigen::VectorXf& parameters() noexcept { return params_; }
  const Eigen::VectorXf& parameters() const noexcept { return params_; }
  std::size_t backbone_parameter_end() const noexcept;

  const std::vector<bool>& trainable() const noexcept { return trainable_; }
  void set_trainable(std::size_t layer, bool value) { trainable_.at(layer) = value; }
  /// Contiguous [begin, end) ranges of trainable stored parameters.
  std::vector<std::pair<std::size_t, std::size_t>> trainable_ranges() const;

  std::int64_t total_parameter_count() const;
  std::int64_t trainable_parameter_count() const;
  std::int64_t head_parameter_count() const;
  bool computable() const noexcept { return computable_; }

  /// Class scores for one input of spec().input_size square, pixels in [0,1].
  Eigen::VectorXf logits(const Image& input) const;

  /// Pooled backbone output that feeds the head.
  Eigen::VectorXf features(const Image& input) const;

  /// Adds d(loss)/d(params) for trainable layers into `grad` and returns the
  /// cross-entropy loss. Frozen layers contribute nothing.
  float accumulate_gradient(const Image& input, int target, Eigen::VectorXf& grad,
                            Eigen::VectorXf* logits_out = nullptr) const;

  /// Re-draws the head weights from `seed`.
  void reset_head(std::uint64_t seed);

 private:
  ArchitectureSpec spec_;
  int num_classes_ = 0;
  LabelRange label_range_;
  Normalization normalization_;
  int vit_head_width_ = 512;
  std::string provenance_;
  std::vector<Layer> layers_;
  std::size_t backbone_layers_ = 0;
  std::vector<bool> trainable_;
  Eigen::VectorXf params_;
  bool computable_ = false;

  friend ClassifierModel load_bundle(const std::filesystem::path& dir);
};

ClassifierModel build_classifier(const ArchitectureSpec& spec, const AssetRegistry& assets,
                                 const ModelOptions& options);

/// head_only: only the head trains. fine_tune: the top spec().unfrozen_layers_stage2
/// backbone layers plus the head. Throws ConfigError if the resulting trainable
/// count misses spec().trainable_params_stage2 by more than 5%.
void configure_stage(ClassifierModel& model, Stage stage);

inline constexpr double kParameterBudgetTolerance = 0.05;
/// |trainable - spec budget| / spec budget.
double parameter_budget_deviation(const ClassifierModel& model);

/// Row per image; each row is a probability vector.
Eigen::MatrixXd predict_batch(const ClassifierModel& model, std::span<const Image> images);
/// Beaufort label of a probability row.
int predicted_label(const ClassifierModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Versioned directory with bundle.json and weights.bin.
void save_bundle(const ClassifierModel& model, const std::filesystem::path& dir);
ClassifierModel load_bundle(const std::filesystem::path& dir);

}  // namespace seastate
