#include "seastate/image_set.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "seastate/errors.hpp"
#include "seastate/rng.hpp"

namespace seastate {

LabeledImageSet load_split(const DatasetManifest& manifest, const std::filesystem::path& root,
                           Split split, int threads) {
  const auto records = manifest.split_records(split);
  LabeledImageSet set;
  set.images.resize(records.size());
  set.labels.reserve(records.size());
  set.ids.reserve(records.size());
  for (const auto* r : records) {
    set.labels.push_back(r->label.value);
    set.ids.push_back(r->id);
  }
  auto load_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto path = root / records[i]->relative_path();
      if (!std::filesystem::exists(path)) throw DataError("missing crop " + path.string());
      set.images[i] = read_image(path);
    }
  };
  const std::size_t workers = std::max(1, threads);
  if (workers == 1 || records.size() < 2 * workers) {
    load_range(0, records.size());
    return set;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (records.size() + workers - 1) / workers;
  for (std::size_t b = 0; b < records.size(); b += chunk)
    jobs.push_back(std::async(std::launch::async, load_range, b, std::min(records.size(), b + chunk)));
  for (auto& j : jobs) j.get();
  return set;
}

LabeledImageSet balanced_subset(const LabeledImageSet& set, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("subset size must be >= 1");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < set.size(); ++i) by_label[set.labels[i]].push_back(i);
  LabeledImageSet out;
  for (auto& [label, indices] : by_label) {
    if (static_cast<int>(indices.size()) < per_class)
      throw ConfigError(fmt::format("class {} has {} training images, fewer than {}", label,
                                    indices.size(), per_class));
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    std::shuffle(indices.begin(), indices.end(), rng.engine());
    for (int k = 0; k < per_class; ++k) {
      const auto i = indices[static_cast<std::size_t>(k)];
      out.images.push_back(set.images[i]);
      out.labels.push_back(set.labels[i]);
      out.ids.push_back(set.ids[i]);
    }
  }
  return out;
}

}  // namespace seastate
