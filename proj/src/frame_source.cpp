#include <algorithm>
#include <fstream>
#include <map>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include "seastate/dataset.hpp"
#include "seastate/synth.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace seastate {

Image8 FrameSource::read_region(std::int64_t index, const Rect& region) {
  return crop(read_frame(index), region);
}

namespace {

constexpr std::string_view kSynthScheme = "synth://";

void check_index(std::int64_t index, std::int64_t count) {
  if (index < 0 || index >= count)
    throw DataError("frame index " + std::to_string(index) + " outside [0," +
                    std::to_string(count) + ")");
}

class SyntheticVideoSource final : public FrameSource {
 public:
  explicit SyntheticVideoSource(const std::string& uri) {
    std::map<std::string, std::string> kv;
    for (const auto& part : detail::split(std::string_view(uri).substr(kSynthScheme.size()), '&')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw DataError("malformed synthetic video uri: " + uri);
      kv[part.substr(0, eq)] = part.substr(eq + 1);
    }
    auto get = [&](const char* key, auto fallback) {
      using T = decltype(fallback);
      const auto it = kv.find(key);
      if (it == kv.end()) return fallback;
      const auto v = detail::parse_number<T>(it->second);
      if (!v) throw DataError(std::string("bad synthetic video field ") + key + " in " + uri);
      return *v;
    };
    const int class_index = get("class", 0);
    const int num_classes = get("classes", 8);
    frames_ = get("frames", std::int64_t{0});
    resolution_ = {get("width", 0), get("height", 0)};
    fps_ = get("fps", 30.0);
    const auto seed = get("seed", std::uint64_t{0});
    if (frames_ <= 0 || resolution_.width <= 0 || resolution_.height <= 0)
      throw DataError("synthetic video needs positive frames/width/height: " + uri);
    if (class_index < 0 || class_index >= num_classes)
      throw DataError("synthetic video class out of range: " + uri);
    field_ = make_wave_field(class_index, num_classes, seed, 0.0);
  }

  std::int64_t frame_count() const override { return frames_; }
  Resolution resolution() const override { return resolution_; }
  double fps() const override { return fps_; }

  Image8 read_frame(std::int64_t index) override {
    return read_region(index, {0, 0, resolution_.width, resolution_.height});
  }

  Image8 read_region(std::int64_t index, const Rect& region) override {
    check_index(index, frames_);
    if (!Rect{0, 0, resolution_.width, resolution_.height}.contains(region))
      throw GeometryError("region outside synthetic frame");
    return to_uint8(render_wave_field(field_, region, static_cast<double>(index) / fps_));
  }

 private:
  std::int64_t frames_ = 0;
  Resolution resolution_;
  double fps_ = 30.0;
  WaveField field_;
};

class ImageSequenceSource final : public FrameSource {
 public:
  explicit ImageSequenceSource(const fs::path& dir) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
        files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end());
    if (files_.empty()) throw DataError("no frame images in " + dir.string());
    const cv::Mat first = cv::imread(files_.front().string(), cv::IMREAD_COLOR);
    if (first.empty()) throw DataError("cannot read " + files_.front().string());
    resolution_ = {first.cols, first.rows};
  }

  std::int64_t frame_count() const override { return static_cast<std::int64_t>(files_.size()); }
  Resolution resolution() const override { return resolution_; }
  double fps() const override { return 30.0; }

  Image8 read_frame(std::int64_t index) override {
    check_index(index, frame_count());
    return read_image(files_[static_cast<std::size_t>(index)]);
  }

 private:
  std::vector<fs::path> files_;
  Resolution resolution_;
};

class VideoFileSource final : public FrameSource {
 public:
  explicit VideoFileSource(const fs::path& path) : path_(path) {
    open();
    frames_ = static_cast<std::int64_t>(capture_.get(cv::CAP_PROP_FRAME_COUNT));
    resolution_ = {static_cast<int>(capture_.get(cv::CAP_PROP_FRAME_WIDTH)),
                   static_cast<int>(capture_.get(cv::CAP_PROP_FRAME_HEIGHT))};
    fps_ = capture_.get(cv::CAP_PROP_FPS);
    if (fps_ <= 0.0) fps_ = 30.0;
    if (frames_ <= 0) {
      // Container without a frame count: decode once to count.
      frames_ = 0;
      while (capture_.grab()) ++frames_;
      open();
    }
  }

  std::int64_t frame_count() const override { return frames_; }
  Resolution resolution() const override { return resolution_; }
  double fps() const override { return fps_; }

  Image8 read_frame(std::int64_t index) override {
    check_index(index, frames_);
    if (index < next_) open();
    while (next_ < index) {
      if (!capture_.grab()) throw DataError("decode failed in " + path_.string());
      ++next_;
    }
    cv::Mat frame;
    if (!capture_.read(frame) || frame.empty())
      throw DataError("cannot decode frame " + std::to_string(index) + " of " + path_.string());
    ++next_;
    return from_bgr_mat(frame);
  }

 private:
  void open() {
    capture_.release();
    if (!capture_.open(path_.string())) throw DataError("cannot open video " + path_.string());
    next_ = 0;
  }

  fs::path path_;
  cv::VideoCapture capture_;
  std::int64_t frames_ = 0;
  std::int64_t next_ = 0;
  Resolution resolution_;
  double fps_ = 30.0;
};

bool has_scheme(const std::string& path) { return path.rfind(kSynthScheme, 0) == 0; }

std::optional<Rect> parse_rect(const std::string& text) {
  const std::string t = detail::trim(text);
  if (t.empty()) return std::nullopt;
  const auto parts = detail::split(t, ',');
  if (parts.size() != 4) throw DataError("sea_region must be \"x,y,w,h\": " + text);
  Rect r;
  int* fields[] = {&r.x, &r.y, &r.width, &r.height};
  for (int i = 0; i < 4; ++i) {
    const auto v = detail::parse_number<int>(parts[i]);
    if (!v) throw DataError("sea_region must be \"x,y,w,h\": " + text);
    *fields[i] = *v;
  }
  return r;
}

}  // namespace

std::unique_ptr<FrameSource> open_frame_source(const fs::path& path) {
  const std::string text = path.string();
  if (has_scheme(text)) return std::make_unique<SyntheticVideoSource>(text);
  if (fs::is_directory(path)) return std::make_unique<ImageSequenceSource>(path);
  if (!fs::exists(path)) throw DataError("session source not found: " + text);
  return std::make_unique<VideoFileSource>(path);
}

std::string synthetic_video_uri(int class_index, std::int64_t frames, Resolution resolution,
                                std::uint64_t seed, int num_classes) {
  return std::string(kSynthScheme) + "class=" + std::to_string(class_index) +
         "&classes=" + std::to_string(num_classes) + "&frames=" + std::to_string(frames) +
         "&width=" + std::to_string(resolution.width) +
         "&height=" + std::to_string(resolution.height) + "&seed=" + std::to_string(seed);
}

std::vector<VideoSession> read_session_index(const fs::path& index_path, const fs::path& base_dir) {
  std::ifstream in(index_path);
  if (!in) throw DataError("cannot open session index " + index_path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty session index " + index_path.string());
  const auto header = detail::split(detail::trim(line), '\t');
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[detail::trim(header[i])] = i;
  for (const char* required : {"id", "path", "label", "camera_height", "loading_condition"})
    if (!column.count(required))
      throw DataError(std::string("session index missing column ") + required);

  std::vector<VideoSession> sessions;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split(line, '\t');
    auto field = [&](const std::string& name) -> std::string {
      const auto it = column.find(name);
      if (it == column.end() || it->second >= fields.size()) return {};
      return detail::trim(fields[it->second]);
    };
    const std::string where = index_path.string() + ":" + std::to_string(line_no);
    VideoSession s;
    s.id = field("id");
    if (s.id.empty()) throw DataError(where + ": empty id");
    const std::string raw_path = field("path");
    s.path = (has_scheme(raw_path) || fs::path(raw_path).is_absolute() || base_dir.empty())
                 ? fs::path(raw_path)
                 : base_dir / raw_path;
    const auto label = detail::parse_number<int>(field("label"));
    if (!label) throw DataError(where + ": bad label");
    s.label = SeaStateLabel{*label};
    const auto height = detail::parse_number<double>(field("camera_height"));
    if (!height) throw DataError(where + ": bad camera_height");
    s.camera_height = *height;
    s.loading_condition = parse_loading_condition(field("loading_condition"));
    s.sea_region = parse_rect(field("sea_region"));
    if (const auto mask = field("exclusion_mask"); !mask.empty())
      s.exclusion_mask = fs::path(mask).is_absolute() || base_dir.empty() ? fs::path(mask)
                                                                          : base_dir / mask;
    auto source = open_frame_source(s.path);
    s.frame_count = source->frame_count();
    s.resolution = source->resolution();
    s.duration = static_cast<double>(s.frame_count) / source->fps();
    sessions.push_back(std::move(s));
  }
  return sessions;
}

void write_session_index(const fs::path& index_path, const std::vector<VideoSession>& sessions) {
  if (index_path.has_parent_path()) fs::create_directories(index_path.parent_path());
  std::ofstream out(index_path);
  out << "id\tpath\tlabel\tcamera_height\tloading_condition\tsea_region\texclusion_mask\n";
  for (const auto& s : sessions) {
    out << s.id << '\t' << s.path.string() << '\t' << s.label.value << '\t'
        << detail::format_double(s.camera_height) << '\t' << to_string(s.loading_condition)
        << '\t';
    if (s.sea_region)
      out << s.sea_region->x << ',' << s.sea_region->y << ',' << s.sea_region->width << ','
          << s.sea_region->height;
    out << '\t';
    if (s.exclusion_mask) out << s.exclusion_mask->string();
    out << '\n';
  }
  if (!out) throw DataError("cannot write session index " + index_path.string());
}

}  // namespace seastate
