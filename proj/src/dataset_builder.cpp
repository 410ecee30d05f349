#include <algorithm>
#include <future>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>

#include "seastate/dataset.hpp"

namespace fs = std::filesystem;

namespace seastate {

std::int64_t compute_sampling_interval(std::int64_t frame_count, std::int64_t target,
                                       const std::string& class_name) {
  if (target < 1) throw ConfigError("sampling target must be >= 1");
  if (frame_count < target)
    throw InsufficientFramesError(fmt::format("class {}: {} frames for target {}",
                                              class_name.empty() ? "?" : class_name, frame_count,
                                              target));
  return frame_count / target;
}

CropRegion choose_crop_region(Resolution frame, const CropParams& params, Rng& rng) {
  const int size = params.size;
  if (frame.width < size || frame.height < size)
    throw GeometryError(fmt::format("frame {}x{} smaller than crop {}", frame.width, frame.height,
                                    size));
  const Rect bounds{0, 0, frame.width, frame.height};
  switch (params.mode) {
    case CropMode::LL: {
      const CropRegion r{params.ll_offset_x, frame.height - size - params.ll_offset_y, size, size};
      if (!bounds.contains(r)) throw GeometryError("LL offset pushes the crop outside the frame");
      return r;
    }
    case CropMode::R: {
      const Rect sea = params.sea_region.value_or(bounds);
      if (sea.width < size || sea.height < size)
        throw GeometryError(fmt::format("sea region {}x{} smaller than crop {}", sea.width,
                                        sea.height, size));
      if (!bounds.contains(sea)) throw GeometryError("sea region outside the frame");
      const int x = rng.uniform_int(sea.x, sea.x + sea.width - size);
      const int y = rng.uniform_int(sea.y, sea.y + sea.height - size);
      return {x, y, size, size};
    }
    case CropMode::center_eval:
      return {(frame.width - size) / 2, (frame.height - size) / 2, size, size};
  }
  throw ConfigError("unknown crop mode");
}

CropResult extract_crop(const Image8& frame, const CropParams& params, Rng& rng) {
  const CropRegion region = choose_crop_region({frame.width(), frame.height()}, params, rng);
  return {crop(frame, region), region};
}

int SplitTargets::of(Split s) const noexcept {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return 0;
}

TargetMap uniform_targets(const LabelRange& range, SplitTargets targets) {
  TargetMap out;
  for (int label = range.min; label <= range.max; ++label) out[label] = targets;
  return out;
}

namespace {

struct Segment {
  const VideoSession* session = nullptr;
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t length() const { return end - begin; }
};

struct SplitPlan {
  SamplingPlanEntry entry;
  std::vector<Segment> segments;
};

struct FullPlan {
  std::vector<SplitPlan> splits;
};

std::vector<const VideoSession*> sessions_of(const std::vector<VideoSession>& sessions, int label) {
  std::vector<const VideoSession*> out;
  for (const auto& s : sessions)
    if (s.label.value == label) out.push_back(&s);
  std::sort(out.begin(), out.end(),
            [](const VideoSession* a, const VideoSession* b) { return a->id < b->id; });
  return out;
}

std::map<Split, std::vector<Segment>> trailing_segments(const std::vector<const VideoSession*>& ss,
                                                        const SplitTargets& t) {
  std::map<Split, std::vector<Segment>> out;
  const std::int64_t total = t.total();
  for (const auto* s : ss) {
    const std::int64_t n = s->frame_count;
    const std::int64_t a = n * t.train / total;
    const std::int64_t b = a + n * t.val / total;
    if (a > 0) out[Split::train].push_back({s, 0, a});
    if (b > a) out[Split::val].push_back({s, a, b});
    if (n > b) out[Split::test].push_back({s, b, n});
  }
  return out;
}

/// Whole sessions are assigned from the end of the id order to test, then val.
std::map<Split, std::vector<Segment>> holdout_segments(const std::vector<const VideoSession*>& ss,
                                                       const SplitTargets& t,
                                                       std::vector<std::string>& shortfalls,
                                                       int label) {
  std::map<Split, std::vector<Segment>> out;
  const int needed = (t.train > 0) + (t.val > 0) + (t.test > 0);
  if (static_cast<int>(ss.size()) < needed) {
    shortfalls.push_back(fmt::format("class {}: session holdout needs {} sessions, have {}", label,
                                     needed, ss.size()));
    return out;
  }
  const std::int64_t frames = std::accumulate(
      ss.begin(), ss.end(), std::int64_t{0},
      [](std::int64_t acc, const VideoSession* s) { return acc + s->frame_count; });
  std::size_t hi = ss.size();
  auto take = [&](Split split, int target, std::size_t keep) {
    if (target <= 0) return;
    const double share = static_cast<double>(frames) * target / t.total();
    std::int64_t got = 0;
    std::vector<Segment> segs;
    while (hi > keep && (segs.empty() || static_cast<double>(got) < share)) {
      --hi;
      segs.push_back({ss[hi], 0, ss[hi]->frame_count});
      got += ss[hi]->frame_count;
    }
    std::reverse(segs.begin(), segs.end());
    out[split] = std::move(segs);
  };
  take(Split::test, t.test, static_cast<std::size_t>((t.train > 0) + (t.val > 0)));
  take(Split::val, t.val, t.train > 0 ? 1u : 0u);
  for (std::size_t i = 0; i < hi; ++i) out[Split::train].push_back({ss[i], 0, ss[i]->frame_count});
  return out;
}

FullPlan make_plan(const std::vector<VideoSession>& sessions, const TargetMap& targets,
                   const BuildOptions& options) {
  if (options.strategy == Strategy::horizon)
    throw ConfigError("the horizon crop strategy is disabled");
  for (const auto& s : sessions) s.validate(options.native, options.label_range);
  {
    std::vector<std::string> ids;
    for (const auto& s : sessions) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw DataError("duplicate session ids in index");
  }

  FullPlan plan;
  std::vector<std::string> shortfalls;
  for (const auto& [label, t] : targets) {
    SeaStateLabel::checked(label, options.label_range);
    const auto ss = sessions_of(sessions, label);
    if (ss.empty()) {
      shortfalls.push_back(fmt::format("class {}: no sessions", label));
      continue;
    }
    auto segments = options.split_mode == SplitMode::trailing_ranges
                        ? trailing_segments(ss, t)
                        : holdout_segments(ss, t, shortfalls, label);
    for (Split split : kSplits) {
      const int target = t.of(split);
      if (target <= 0) continue;
      auto& segs = segments[split];
      std::int64_t available = 0;
      for (const auto& seg : segs) available += seg.length();
      if (available < target) {
        shortfalls.push_back(fmt::format("class {} {}: need {} frames, have {}", label,
                                         to_string(split), target, available));
        continue;
      }
      SplitPlan sp;
      sp.entry.label = SeaStateLabel{label};
      sp.entry.split = split;
      sp.entry.available_frames = available;
      sp.entry.target = target;
      sp.entry.interval =
          compute_sampling_interval(available, target, std::to_string(label));
      sp.segments = std::move(segs);
      plan.splits.push_back(std::move(sp));
    }
  }
  if (!shortfalls.empty()) {
    std::string report;
    for (const auto& s : shortfalls) report += "\n  " + s;
    throw InsufficientFramesError("per-class shortfall:" + report);
  }
  return plan;
}

bool mask_vetoes(const cv::Mat& mask, const Rect& r) {
  if (mask.empty()) return false;
  return cv::countNonZero(mask(cv::Rect(r.x, r.y, r.width, r.height))) > 0;
}

cv::Mat load_mask(const VideoSession& s) {
  if (!s.exclusion_mask) return {};
  cv::Mat mask = cv::imread(s.exclusion_mask->string(), cv::IMREAD_GRAYSCALE);
  if (mask.empty()) throw DataError("cannot read exclusion mask " + s.exclusion_mask->string());
  if (mask.cols != s.resolution.width || mask.rows != s.resolution.height)
    throw GeometryError("exclusion mask size differs from session " + s.id);
  return mask;
}

/// Selects regions for every frame picked from one session. Frames whose crop is
/// vetoed by the exclusion mask are dropped.
std::vector<ImageRecord> assign_regions(const VideoSession& session,
                                        const std::vector<ImageRecord>& picked,
                                        const BuildOptions& options) {
  const cv::Mat mask = load_mask(session);
  CropParams params;
  params.mode = options.strategy == Strategy::LL ? CropMode::LL : CropMode::R;
  params.ll_offset_x = options.ll_offset_x;
  params.ll_offset_y = options.ll_offset_y;
  params.sea_region = session.sea_region;
  std::vector<ImageRecord> out;
  for (auto record : picked) {
    Rng rng(derive_seed(options.seed, {hash_string(session.id),
                                       static_cast<std::uint64_t>(record.frame_index)}));
    const int attempts = params.mode == CropMode::R ? std::max(1, options.max_mask_retries) : 1;
    bool accepted = false;
    for (int i = 0; i < attempts && !accepted; ++i) {
      record.crop = choose_crop_region(session.resolution, params, rng);
      accepted = !mask_vetoes(mask, record.crop);
    }
    if (accepted) out.push_back(std::move(record));
  }
  return out;
}

void write_crops(const VideoSession& session, const std::vector<ImageRecord>& records,
                 const fs::path& root) {
  if (records.empty()) return;
  auto source = open_frame_source(session.path);
  std::vector<const ImageRecord*> order;
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const ImageRecord* a, const ImageRecord* b) {
    return a->frame_index < b->frame_index;
  });
  for (const auto* r : order) write_png(root / r->relative_path(), source->read_region(r->frame_index, r->crop));
}

}  // namespace

SamplingPlan plan_sampling(const std::vector<VideoSession>& sessions, const TargetMap& targets,
                           const BuildOptions& options) {
  SamplingPlan out;
  for (const auto& sp : make_plan(sessions, targets, options).splits) out.push_back(sp.entry);
  return out;
}

DatasetManifest build_dataset(const std::vector<VideoSession>& sessions, const TargetMap& targets,
                              const BuildOptions& options) {
  const FullPlan plan = make_plan(sessions, targets, options);

  // Pick frames: k * interval along each split's concatenated session timeline.
  std::map<std::string, std::vector<ImageRecord>> picked;
  for (const auto& sp : plan.splits) {
    std::size_t seg = 0;
    std::int64_t seg_start = 0;
    for (int k = 0; k < sp.entry.target; ++k) {
      const std::int64_t pos = k * sp.entry.interval;
      while (pos >= seg_start + sp.segments[seg].length()) {
        seg_start += sp.segments[seg].length();
        ++seg;
      }
      const Segment& s = sp.segments[seg];
      ImageRecord r;
      r.session_id = s.session->id;
      r.frame_index = s.begin + (pos - seg_start);
      r.id = fmt::format("{}_f{:08d}", r.session_id, r.frame_index);
      r.label = sp.entry.label;
      r.split = sp.entry.split;
      r.strategy = options.strategy;
      picked[r.session_id].push_back(std::move(r));
    }
  }

  std::vector<const VideoSession*> work;
  for (const auto& s : sessions)
    if (picked.count(s.id)) work.push_back(&s);

  auto process = [&](const VideoSession* s) {
    auto records = assign_regions(*s, picked.at(s->id), options);
    if (!options.output_dir.empty()) write_crops(*s, records, options.output_dir);
    return records;
  };

  std::vector<ImageRecord> records;
  const unsigned threads =
      options.threads > 0 ? static_cast<unsigned>(options.threads)
                          : std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < work.size(); begin += threads) {
    const std::size_t end = std::min(work.size(), begin + threads);
    if (threads == 1) {
      auto part = process(work[begin]);
      records.insert(records.end(), part.begin(), part.end());
      continue;
    }
    std::vector<std::future<std::vector<ImageRecord>>> futures;
    for (std::size_t i = begin; i < end; ++i)
      futures.push_back(std::async(std::launch::async, process, work[i]));
    for (auto& f : futures) {
      auto part = f.get();
      records.insert(records.end(), part.begin(), part.end());
    }
  }

  std::sort(records.begin(), records.end(), [](const ImageRecord& a, const ImageRecord& b) {
    return std::tie(a.label, a.session_id, a.frame_index) <
           std::tie(b.label, b.session_id, b.frame_index);
  });

  DatasetManifest manifest;
  manifest.name = options.name;
  manifest.strategy = options.strategy;
  manifest.seed = options.seed;
  manifest.label_range = options.label_range;
  manifest.records = std::move(records);
  manifest.recount();

  std::size_t counted = 0;
  for (const auto& [split, counts] : manifest.class_counts)
    counted += static_cast<std::size_t>(std::accumulate(counts.begin(), counts.end(), 0));
  if (counted != manifest.records.size())
    throw std::logic_error("class_counts do not sum to the record count");

  if (!options.output_dir.empty()) write_manifest(options.output_dir / "manifest.tsv", manifest);
  return manifest;
}

}  // namespace seastate
