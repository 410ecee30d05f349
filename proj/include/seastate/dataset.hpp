#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "seastate/image.hpp"
#include "seastate/rng.hpp"

namespace seastate {

inline constexpr int kDatasetCropSize = 331;
inline constexpr const char* kToolVersion = "0.1.0";

/// Native camera heights (metres above sea level) for the two loading conditions.
inline constexpr double kCargoCameraHeight = 38.12;
inline constexpr double kBallastCameraHeight = 40.32;

struct LabelRange {
  int min = 1;
  int max = 8;

  int count() const noexcept { return max - min + 1; }
  bool contains(int label) const noexcept { return label >= min && label <= max; }
  int index_of(int label) const noexcept { return label - min; }
  int label_at(int index) const noexcept { return min + index; }
  bool operator==(const LabelRange&) const = default;
};

/// Beaufort class.
struct SeaStateLabel {
  int value = 1;

  /// Throws LabelError outside `range`.
  static SeaStateLabel checked(int value, const LabelRange& range = {});
  auto operator<=>(const SeaStateLabel&) const = default;
};

enum class Strategy {
  LL,  ///< fixed lower-left anchor
  R,   ///< uniform within the sea region
  /// Crops near the horizon. Parsed but rejected by build_dataset.
  horizon,
};
enum class CropMode { LL, R, center_eval };
enum class Split { train, val, test };
enum class LoadingCondition { cargo, ballast };

inline constexpr std::array<Split, 3> kSplits{Split::train, Split::val, Split::test};

const char* to_string(Strategy s) noexcept;
const char* to_string(Split s) noexcept;
const char* to_string(LoadingCondition c) noexcept;
Strategy parse_strategy(const std::string& text);
Split parse_split(const std::string& text);
LoadingCondition parse_loading_condition(const std::string& text);

struct Resolution {
  int width = 0;
  int height = 0;
  bool operator==(const Resolution&) const = default;
};

struct VideoSession {
  std::string id;
  std::filesystem::path path;
  SeaStateLabel label;
  std::int64_t frame_count = 0;
  double duration = 0.0;  ///< seconds
  Resolution resolution;
  double camera_height = kCargoCameraHeight;
  LoadingCondition loading_condition = LoadingCondition::cargo;
  std::optional<Rect> sea_region;
  std::optional<std::filesystem::path> exclusion_mask;

  /// Throws DataError; camera height is only checked when `native`.
  void validate(bool native, const LabelRange& range = {}) const;
};

/// Random-access frames of one session.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::int64_t frame_count() const = 0;
  virtual Resolution resolution() const = 0;
  virtual double fps() const = 0;
  /// Indices must be requested in non-decreasing order.
  virtual Image8 read_frame(std::int64_t index) = 0;
  /// Default crops read_frame; sources may render the region directly.
  virtual Image8 read_region(std::int64_t index, const Rect& region);
};

/// Dispatches on the path: `synth://...` procedural stand-in, a directory of
/// frame images, or a video file decoded through OpenCV.
std::unique_ptr<FrameSource> open_frame_source(const std::filesystem::path& path);

/// `synth://class=<0-based>&frames=<n>&width=<w>&height=<h>&seed=<s>[&fps=<f>]`
std::string synthetic_video_uri(int class_index, std::int64_t frames, Resolution resolution,
                                std::uint64_t seed, int num_classes = 8);

/// Tab-delimited session index: header line, then id, path, label, camera_height,
/// loading_condition, optional sea_region "x,y,w,h", optional exclusion_mask.
/// Frame counts and resolution are probed from the sources. Relative paths
/// resolve against `base_dir` unless they carry a scheme.
std::vector<VideoSession> read_session_index(const std::filesystem::path& index_path,
                                             const std::filesystem::path& base_dir = {});
void write_session_index(const std::filesystem::path& index_path,
                         const std::vector<VideoSession>& sessions);

struct SamplingPlanEntry {
  SeaStateLabel label;
  Split split = Split::train;
  std::int64_t available_frames = 0;
  std::int64_t interval = 1;
  int target = 0;
};

using SamplingPlan = std::vector<SamplingPlanEntry>;

struct ImageRecord {
  std::string id;
  std::string session_id;
  std::int64_t frame_index = 0;
  CropRegion crop;
  SeaStateLabel label;
  Split split = Split::train;
  Strategy strategy = Strategy::LL;

  /// <split>/<label>/<id>.png relative to the dataset root.
  std::string relative_path() const;
  bool operator==(const ImageRecord&) const = default;
};

/// counts[split][label index]
using ClassCounts = std::map<Split, std::vector<int>>;

struct DatasetManifest {
  std::string name;
  Strategy strategy = Strategy::LL;
  std::uint64_t seed = 0;
  LabelRange label_range;
  std::vector<ImageRecord> records;
  ClassCounts class_counts;

  /// Recounts class_counts from records.
  void recount();
  std::vector<const ImageRecord*> split_records(Split split) const;
  bool operator==(const DatasetManifest&) const = default;
};

ClassCounts count_classes(const std::vector<ImageRecord>& records, const LabelRange& range);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& text);
/// Hex SHA-256 of the serialized manifest.
std::string manifest_hash(const DatasetManifest& manifest);

/// floor(frame_count / target); throws InsufficientFramesError when frame_count < target.
std::int64_t compute_sampling_interval(std::int64_t frame_count, std::int64_t target,
                                       const std::string& class_name = "");

struct CropParams {
  CropMode mode = CropMode::LL;
  /// Shift of the LL anchor: dx to the right, dy upwards.
  int ll_offset_x = 0;
  int ll_offset_y = 0;
  /// R mode only; defaults to the whole frame.
  std::optional<Rect> sea_region;
  int size = kDatasetCropSize;
};

/// Region a crop would take, without touching pixels. Consumes rng only in R mode.
CropRegion choose_crop_region(Resolution frame, const CropParams& params, Rng& rng);

struct CropResult {
  Image8 image;
  CropRegion region;
};

CropResult extract_crop(const Image8& frame, const CropParams& params, Rng& rng);

struct SplitTargets {
  int train = 750;
  int val = 300;
  int test = 300;
  int total() const noexcept { return train + val + test; }
  int of(Split s) const noexcept;
};

enum class SplitMode {
  trailing_ranges,  ///< each session's trailing frames go to val then test
  session_holdout,  ///< whole sessions are held out for val and test
};

struct BuildOptions {
  std::string name = "dataset";
  Strategy strategy = Strategy::LL;
  std::uint64_t seed = 0;
  SplitMode split_mode = SplitMode::trailing_ranges;
  int ll_offset_x = 0;
  int ll_offset_y = 0;
  LabelRange label_range;
  /// Enforce the native camera heights.
  bool native = true;
  /// Where to write crops and manifest.tsv; empty for a manifest-only plan.
  std::filesystem::path output_dir;
  int threads = 0;  ///< 0 = hardware concurrency
  /// Attempts per R crop before an exclusion mask drops the frame.
  int max_mask_retries = 64;
};

/// Per-class split targets keyed by label value.
using TargetMap = std::map<int, SplitTargets>;
TargetMap uniform_targets(const LabelRange& range, SplitTargets targets);

SamplingPlan plan_sampling(const std::vector<VideoSession>& sessions, const TargetMap& targets,
                           const BuildOptions& options);

DatasetManifest build_dataset(const std::vector<VideoSession>& sessions, const TargetMap& targets,
                              const BuildOptions& options);

struct SplitBalance {
  Split split = Split::train;
  std::vector<int> counts;
  double max_min_ratio = 1.0;
  bool balanced = true;
};

struct BalanceReport {
  std::vector<SplitBalance> splits;
  std::vector<std::string> disjointness_violations;
  std::vector<std::string> duplicates;
  bool counts_consistent = true;
  std::vector<std::string> issues;

  bool ok() const noexcept { return issues.empty(); }
};

inline constexpr double kImbalanceRatio = 1.1;

/// max/min over class counts; infinity when a class is empty.
double class_balance_ratio(const std::vector<int>& counts);

BalanceReport verify_manifest(const DatasetManifest& manifest);
std::string format_balance_report(const BalanceReport& report, const LabelRange& range);

}  // namespace seastate
