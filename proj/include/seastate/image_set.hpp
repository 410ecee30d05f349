#pragma once

#include <filesystem>
#include <vector>

#include "seastate/dataset.hpp"
#include "seastate/image.hpp"

namespace seastate {

/// Decoded crops of one manifest split, held as 8-bit to keep memory low.
struct LabeledImageSet {
  std::vector<Image8> images;
  std::vector<int> labels;  ///< Beaufort labels
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
};

/// Reads every record of `split` from `root`; throws DataError for missing files.
LabeledImageSet load_split(const DatasetManifest& manifest, const std::filesystem::path& root,
                           Split split, int threads = 1);

/// First `per_class` records of each class in a seed-determined order. Smaller
/// subsets are prefixes of larger ones. Throws ConfigError when a class has fewer.
LabeledImageSet balanced_subset(const LabeledImageSet& set, int per_class, std::uint64_t seed);

}  // namespace seastate
