#pragma once

#include <filesystem>
#include <vector>

#include "seastate/dataset.hpp"

namespace seastate::testing {

/// Procedural stand-in for recorded sessions: `per_class` sessions per label,
/// written to an index and read back so frame counts come from probing.
inline std::vector<VideoSession> synthetic_sessions(const std::filesystem::path& dir, int classes,
                                                    std::int64_t frames, Resolution resolution,
                                                    int per_class = 1, std::uint64_t seed = 1) {
  std::vector<VideoSession> sessions;
  for (int c = 0; c < classes; ++c)
    for (int k = 0; k < per_class; ++k) {
      VideoSession s;
      s.id = "bft" + std::to_string(c + 1) + "_s" + std::to_string(k);
      s.path = synthetic_video_uri(c, frames, resolution, seed + 31 * c + k, classes);
      s.label = SeaStateLabel{c + 1};
      sessions.push_back(s);
    }
  const auto index = dir / "sessions.tsv";
  std::filesystem::create_directories(dir);
  write_session_index(index, sessions);
  return read_session_index(index, dir);
}

}  // namespace seastate::testing
