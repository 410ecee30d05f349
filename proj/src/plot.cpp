#include "seastate/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "seastate/errors.hpp"

namespace seastate {

namespace {

const cv::Scalar kInk(40, 40, 40);
const cv::Scalar kGrid(225, 225, 225);
const std::array<cv::Scalar, 6> kPalette{cv::Scalar(180, 119, 31), cv::Scalar(14, 127, 255),
                                         cv::Scalar(44, 160, 44),  cv::Scalar(40, 39, 214),
                                         cv::Scalar(189, 103, 148), cv::Scalar(75, 86, 140)};
constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;

void text(cv::Mat& img, const std::string& s, cv::Point at, double scale = 0.45,
          const cv::Scalar& color = kInk, bool centered = false) {
  int baseline = 0;
  const auto size = cv::getTextSize(s, kFont, scale, 1, &baseline);
  if (centered) at.x -= size.width / 2;
  cv::putText(img, s, at, kFont, scale, color, 1, cv::LINE_AA);
}

void save(const std::filesystem::path& path, const cv::Mat& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw ReportError("cannot write " + path.string());
}

struct Axes {
  cv::Rect area;
  double x0, x1, y0, y1;
  bool log_x;

  double tx(double x) const { return log_x ? std::log10(x) : x; }
  cv::Point map(double x, double y) const {
    const double u = (tx(x) - tx(x0)) / (tx(x1) - tx(x0));
    const double v = (y - y0) / (y1 - y0);
    return {area.x + static_cast<int>(std::lround(u * area.width)),
            area.y + area.height - static_cast<int>(std::lround(v * area.height))};
  }
};

std::string tick_label(double v) {
  if (std::abs(v) >= 1000 || v == std::floor(v)) return fmt::format("{:.0f}", v);
  if (std::abs(v) >= 10) return fmt::format("{:.1f}", v);
  return fmt::format("{:.2f}", v);
}

void padded_range(double& lo, double& hi) {
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
}

cv::Mat frame(const ChartOptions& o, Axes& axes) {
  cv::Mat img(o.height, o.width, CV_8UC3, cv::Scalar(255, 255, 255));
  axes.area = cv::Rect(70, 40, o.width - 100, o.height - 100);
  text(img, o.title, {o.width / 2, 24}, 0.6, kInk, true);
  text(img, o.x_label, {axes.area.x + axes.area.width / 2, o.height - 18}, 0.45, kInk, true);
  text(img, o.y_label, {8, 30}, 0.45);
  for (int i = 0; i <= 5; ++i) {
    const double fy = axes.y0 + (axes.y1 - axes.y0) * i / 5.0;
    const auto p = axes.map(axes.x0, fy);
    cv::line(img, {axes.area.x, p.y}, {axes.area.x + axes.area.width, p.y}, kGrid);
    text(img, tick_label(fy), {8, p.y + 4}, 0.4);
  }
  cv::rectangle(img, axes.area, kInk);
  return img;
}

}  // namespace

void plot_lines(const std::filesystem::path& path, const std::vector<Series>& series,
                const ChartOptions& options) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) throw ReportError("nothing to plot for " + path.string());
  if (options.log_x && x0 <= 0) throw ReportError("log axis needs positive x values");
  padded_range(x0, x1);
  padded_range(y0, y1);
  const double pad = 0.05 * (y1 - y0);
  Axes axes{{}, x0, x1, y0 - pad, y1 + pad, options.log_x};
  cv::Mat img = frame(options, axes);

  std::vector<double> xticks;
  for (const auto& s : series) xticks.insert(xticks.end(), s.x.begin(), s.x.end());
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  if (xticks.size() > 12) {
    std::vector<double> even;
    for (int i = 0; i <= 6; ++i) even.push_back(x0 + (x1 - x0) * i / 6.0);
    xticks = even;
  }
  for (double x : xticks) {
    const auto p = axes.map(x, axes.y0);
    cv::line(img, p, {p.x, p.y + 4}, kInk);
    text(img, tick_label(x), {p.x, p.y + 18}, 0.4, kInk, true);
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto color = kPalette[k % kPalette.size()];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts.push_back(axes.map(s.x[i], s.y[i]));
    if (pts.size() > 1) cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
    if (options.markers)
      for (const auto& p : pts) cv::circle(img, p, 3, color, cv::FILLED, cv::LINE_AA);
    const cv::Point legend(axes.area.x + axes.area.width - 170, axes.area.y + 18 + 18 * static_cast<int>(k));
    cv::line(img, legend + cv::Point(0, -4), legend + cv::Point(20, -4), color, 2);
    text(img, s.name, legend + cv::Point(26, 0), 0.42);
  }
  save(path, img);
}

void plot_bars(const std::filesystem::path& path, const std::vector<int>& labels,
               const std::vector<double>& values, const ChartOptions& options) {
  if (labels.empty() || labels.size() != values.size())
    throw ReportError("bar chart needs one value per label");
  double hi = std::max(1.0, *std::max_element(values.begin(), values.end()));
  Axes axes{{}, 0.0, static_cast<double>(labels.size()), 0.0, hi, false};
  cv::Mat img = frame(options, axes);
  const double slot = static_cast<double>(axes.area.width) / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto top = axes.map(static_cast<double>(i) + 0.2, values[i]);
    const auto bottom = axes.map(static_cast<double>(i) + 0.8, 0.0);
    cv::rectangle(img, top, bottom, kPalette[0], cv::FILLED);
    const int cx = axes.area.x + static_cast<int>((static_cast<double>(i) + 0.5) * slot);
    text(img, std::to_string(labels[i]), {cx, axes.area.y + axes.area.height + 18}, 0.45, kInk, true);
    text(img, fmt::format("{:.3f}", values[i]), {cx, top.y - 6}, 0.38, kInk, true);
  }
  save(path, img);
}

void plot_confusion(const std::filesystem::path& path, const ConfusionMatrix& cm,
                    const std::string& title) {
  const int n = cm.size();
  if (n == 0) throw ReportError("empty confusion matrix");
  const int cell = 56;
  const int left = 80, top = 60;
  cv::Mat img(top + n * cell + 50, left + n * cell + 30, CV_8UC3, cv::Scalar(255, 255, 255));
  text(img, title, {img.cols / 2, 24}, 0.55, kInk, true);
  text(img, "predicted", {left + n * cell / 2, 46}, 0.42, kInk, true);
  text(img, "true", {10, top + n * cell / 2}, 0.42);
  for (int i = 0; i < n; ++i) {
    const std::int64_t support = std::max<std::int64_t>(1, cm.support(i));
    for (int j = 0; j < n; ++j) {
      const double share = static_cast<double>(cm.counts(i, j)) / static_cast<double>(support);
      const int shade = 255 - static_cast<int>(std::lround(share * 200));
      const cv::Rect r(left + j * cell, top + i * cell, cell, cell);
      cv::rectangle(img, r, cv::Scalar(255, shade, shade), cv::FILLED);
      cv::rectangle(img, r, kGrid);
      text(img, std::to_string(cm.counts(i, j)), {r.x + cell / 2, r.y + cell / 2 + 5}, 0.4,
           share > 0.6 ? cv::Scalar(255, 255, 255) : kInk, true);
    }
    text(img, std::to_string(cm.labels[static_cast<std::size_t>(i)]), {left - 24, top + i * cell + cell / 2 + 5});
    text(img, std::to_string(cm.labels[static_cast<std::size_t>(i)]),
         {left + i * cell + cell / 2, top + n * cell + 20}, 0.45, kInk, true);
  }
  save(path, img);
}

void write_contact_sheet(const std::filesystem::path& path, const std::vector<Image>& images,
                         int columns, const std::vector<std::string>& captions) {
  if (images.empty()) throw ReportError("contact sheet needs at least one image");
  columns = std::max(1, columns);
  const int h = images.front().height(), w = images.front().width();
  const int caption = captions.empty() ? 0 : 20;
  const int rows = (static_cast<int>(images.size()) + columns - 1) / columns;
  cv::Mat sheet(rows * (h + caption + 4), columns * (w + 4), CV_8UC3, cv::Scalar(255, 255, 255));
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].height() != h || images[k].width() != w)
      throw GeometryError("contact sheet images must share one size");
    const int r = static_cast<int>(k) / columns, c = static_cast<int>(k) % columns;
    const cv::Rect slot(c * (w + 4) + 2, r * (h + caption + 4) + 2, w, h);
    to_bgr_mat(to_uint8(images[k])).copyTo(sheet(slot));
    if (k < captions.size()) text(sheet, captions[k], {slot.x + 2, slot.y + h + 15}, 0.4);
  }
  save(path, sheet);
}

}  // namespace seastate
