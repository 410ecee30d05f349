#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "seastate/dataset.hpp"
#include "seastate/hash.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace seastate {

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::LL: return "LL";
    case Strategy::R: return "R";
    case Strategy::horizon: return "horizon";
  }
  return "?";
}

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

const char* to_string(LoadingCondition c) noexcept {
  return c == LoadingCondition::cargo ? "cargo" : "ballast";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "LL" || text == "ll") return Strategy::LL;
  if (text == "R" || text == "r") return Strategy::R;
  if (text == "horizon") return Strategy::horizon;
  throw ConfigError("unknown strategy '" + text + "' (expected LL or R)");
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ConfigError("unknown split '" + text + "' (expected train, val or test)");
}

LoadingCondition parse_loading_condition(const std::string& text) {
  if (text == "cargo") return LoadingCondition::cargo;
  if (text == "ballast") return LoadingCondition::ballast;
  throw DataError("unknown loading condition '" + text + "'");
}

SeaStateLabel SeaStateLabel::checked(int value, const LabelRange& range) {
  if (!range.contains(value))
    throw LabelError(fmt::format("label {} outside [{},{}]", value, range.min, range.max));
  return SeaStateLabel{value};
}

void VideoSession::validate(bool native, const LabelRange& range) const {
  const std::string who = "session " + id + ": ";
  if (!range.contains(label.value))
    throw LabelError(who + fmt::format("label {} outside [{},{}]", label.value, range.min, range.max));
  if (frame_count <= 0) throw DataError(who + "no frames");
  if (resolution.width < kDatasetCropSize || resolution.height < kDatasetCropSize)
    throw GeometryError(who + fmt::format("resolution {}x{} below {}x{}", resolution.width,
                                          resolution.height, kDatasetCropSize, kDatasetCropSize));
  if (native) {
    const double expected = loading_condition == LoadingCondition::cargo ? kCargoCameraHeight
                                                                        : kBallastCameraHeight;
    if (std::abs(camera_height - expected) > 1e-9)
      throw DataError(who + fmt::format("camera height {} does not match {} ({} m)",
                                        camera_height, to_string(loading_condition), expected));
  }
  if (sea_region) {
    if (!Rect{0, 0, resolution.width, resolution.height}.contains(*sea_region))
      throw GeometryError(who + "sea_region outside the frame");
    if (sea_region->width < kDatasetCropSize || sea_region->height < kDatasetCropSize)
      throw GeometryError(who + "sea_region smaller than the crop");
  }
}

std::string ImageRecord::relative_path() const {
  return fmt::format("{}/{}/{}.png", to_string(split), label.value, id);
}

ClassCounts count_classes(const std::vector<ImageRecord>& records, const LabelRange& range) {
  ClassCounts counts;
  for (Split s : kSplits) counts[s].assign(static_cast<std::size_t>(range.count()), 0);
  for (const auto& r : records) {
    if (!range.contains(r.label.value))
      throw LabelError(fmt::format("record {} label {} outside [{},{}]", r.id, r.label.value,
                                   range.min, range.max));
    ++counts[r.split][static_cast<std::size_t>(range.index_of(r.label.value))];
  }
  return counts;
}

void DatasetManifest::recount() { class_counts = count_classes(records, label_range); }

std::vector<const ImageRecord*> DatasetManifest::split_records(Split split) const {
  std::vector<const ImageRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

namespace {

constexpr const char* kMagic = "# seastate-manifest 1";
constexpr const char* kColumns =
    "id\tsession_id\tframe_index\tx\ty\twidth\theight\tlabel\tsplit\tstrategy\tpath";

void check_field(const std::string& value, const char* what) {
  if (value.find_first_of("\t\n\r") != std::string::npos)
    throw DataError(std::string("manifest ") + what + " contains tab or newline: " + value);
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& m) {
  check_field(m.name, "name");
  std::ostringstream out;
  out << kMagic << '\n';
  out << "# name\t" << m.name << '\n';
  out << "# strategy\t" << to_string(m.strategy) << '\n';
  out << "# seed\t" << m.seed << '\n';
  out << "# label_range\t" << m.label_range.min << '\t' << m.label_range.max << '\n';
  out << "# tool_version\t" << kToolVersion << '\n';
  for (Split s : kSplits) {
    out << "# class_counts\t" << to_string(s);
    const auto it = m.class_counts.find(s);
    for (int c = 0; c < m.label_range.count(); ++c)
      out << '\t'
          << (it == m.class_counts.end() || static_cast<std::size_t>(c) >= it->second.size()
                  ? 0
                  : it->second[static_cast<std::size_t>(c)]);
    out << '\n';
  }
  out << kColumns << '\n';
  for (const auto& r : m.records) {
    check_field(r.id, "record id");
    check_field(r.session_id, "session id");
    out << r.id << '\t' << r.session_id << '\t' << r.frame_index << '\t' << r.crop.x << '\t'
        << r.crop.y << '\t' << r.crop.width << '\t' << r.crop.height << '\t' << r.label.value
        << '\t' << to_string(r.split) << '\t' << to_string(r.strategy) << '\t'
        << r.relative_path() << '\n';
  }
  return out.str();
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << serialize_manifest(manifest);
  if (!out) throw DataError("cannot write manifest " + path.string());
}

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw DataError("not a seastate manifest");
  bool columns_seen = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, '\t');
    const std::string where = fmt::format("manifest line {}: ", line_no);
    if (!columns_seen && line.rfind("# ", 0) == 0) {
      const std::string key = f[0].substr(2);
      auto need = [&](std::size_t n) {
        if (f.size() < n) throw DataError(where + "truncated header " + key);
      };
      if (key == "name") {
        need(2);
        m.name = f[1];
      } else if (key == "strategy") {
        need(2);
        m.strategy = parse_strategy(f[1]);
      } else if (key == "seed") {
        need(2);
        const auto v = detail::parse_number<std::uint64_t>(f[1]);
        if (!v) throw DataError(where + "bad seed");
        m.seed = *v;
      } else if (key == "label_range") {
        need(3);
        const auto lo = detail::parse_number<int>(f[1]);
        const auto hi = detail::parse_number<int>(f[2]);
        if (!lo || !hi || *lo > *hi) throw DataError(where + "bad label_range");
        m.label_range = {*lo, *hi};
      } else if (key == "class_counts") {
        need(2);
        auto& counts = m.class_counts[parse_split(f[1])];
        counts.clear();
        for (std::size_t i = 2; i < f.size(); ++i) {
          const auto v = detail::parse_number<int>(f[i]);
          if (!v) throw DataError(where + "bad class count");
          counts.push_back(*v);
        }
      } else if (key != "tool_version") {
        throw DataError(where + "unknown header key " + key);
      }
      continue;
    }
    if (!columns_seen) {
      if (line != kColumns) throw DataError(where + "unexpected column header");
      columns_seen = true;
      continue;
    }
    if (f.size() != 11) throw DataError(where + "expected 11 fields");
    ImageRecord r;
    r.id = f[0];
    r.session_id = f[1];
    const auto frame = detail::parse_number<std::int64_t>(f[2]);
    const auto x = detail::parse_number<int>(f[3]);
    const auto y = detail::parse_number<int>(f[4]);
    const auto w = detail::parse_number<int>(f[5]);
    const auto h = detail::parse_number<int>(f[6]);
    const auto label = detail::parse_number<int>(f[7]);
    if (!frame || !x || !y || !w || !h || !label) throw DataError(where + "bad numeric field");
    r.frame_index = *frame;
    r.crop = {*x, *y, *w, *h};
    r.label = SeaStateLabel{*label};
    r.split = parse_split(f[8]);
    r.strategy = parse_strategy(f[9]);
    if (f[10] != r.relative_path()) throw DataError(where + "path does not match record layout");
    m.records.push_back(std::move(r));
  }
  if (!columns_seen) throw DataError("manifest has no record header");
  return m;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str());
}

std::string manifest_hash(const DatasetManifest& manifest) {
  return sha256_hex(serialize_manifest(manifest));
}

double class_balance_ratio(const std::vector<int>& counts) {
  if (counts.empty()) return 1.0;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo <= 0) return *hi > 0 ? std::numeric_limits<double>::infinity() : 1.0;
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

BalanceReport verify_manifest(const DatasetManifest& manifest) {
  BalanceReport report;
  ClassCounts actual;
  try {
    actual = count_classes(manifest.records, manifest.label_range);
  } catch (const LabelError& e) {
    report.issues.emplace_back(e.what());
    return report;
  }

  for (Split s : kSplits) {
    const auto& counts = actual[s];
    const bool empty = std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; });
    if (empty) continue;
    SplitBalance b;
    b.split = s;
    b.counts = counts;
    b.max_min_ratio = class_balance_ratio(counts);
    b.balanced = b.max_min_ratio <= kImbalanceRatio;
    if (!b.balanced)
      report.issues.push_back(fmt::format("{} split imbalanced: max/min ratio {:.3f} > {}",
                                          to_string(s), b.max_min_ratio, kImbalanceRatio));
    report.splits.push_back(std::move(b));
  }

  for (Split s : kSplits) {
    const auto it = manifest.class_counts.find(s);
    std::vector<int> stored = it == manifest.class_counts.end() ? std::vector<int>{} : it->second;
    stored.resize(actual[s].size(), 0);
    if (stored != actual[s]) report.counts_consistent = false;
  }
  if (!report.counts_consistent)
    report.issues.emplace_back("class_counts disagree with records");

  std::map<std::pair<std::string, std::int64_t>, Split> owner;
  std::set<std::string> ids;
  std::set<std::tuple<std::string, std::int64_t, Split>> seen;
  for (const auto& r : manifest.records) {
    if (!ids.insert(r.id).second) report.duplicates.push_back("duplicate id " + r.id);
    if (!seen.emplace(r.session_id, r.frame_index, r.split).second)
      report.duplicates.push_back(fmt::format("duplicate frame {}:{} in {}", r.session_id,
                                              r.frame_index, to_string(r.split)));
    const auto key = std::make_pair(r.session_id, r.frame_index);
    const auto [it, inserted] = owner.emplace(key, r.split);
    if (!inserted && it->second != r.split)
      report.disjointness_violations.push_back(
          fmt::format("frame {}:{} in both {} and {}", r.session_id, r.frame_index,
                      to_string(it->second), to_string(r.split)));
    if (r.strategy != manifest.strategy)
      report.issues.push_back("record " + r.id + " strategy differs from manifest");
  }
  for (const auto& d : report.duplicates) report.issues.push_back(d);
  for (const auto& v : report.disjointness_violations) report.issues.push_back(v);
  return report;
}

std::string format_balance_report(const BalanceReport& report, const LabelRange& range) {
  std::string out = "split";
  for (int c = 0; c < range.count(); ++c) out += fmt::format("\t{}", range.label_at(c));
  out += "\ttotal\tmax/min\tstatus\n";
  for (const auto& b : report.splits) {
    out += to_string(b.split);
    int total = 0;
    for (int v : b.counts) {
      out += fmt::format("\t{}", v);
      total += v;
    }
    out += fmt::format("\t{}\t{:.3f}\t{}\n", total, b.max_min_ratio,
                       b.balanced ? "balanced" : "IMBALANCED");
  }
  out += fmt::format("disjoint: {}\nduplicates: {}\ncounts consistent: {}\n",
                     report.disjointness_violations.empty() ? "yes" : "NO",
                     report.duplicates.size(), report.counts_consistent ? "yes" : "NO");
  for (const auto& issue : report.issues) out += "issue: " + issue + "\n";
  return out;
}

}  // namespace seastate
