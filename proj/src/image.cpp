#include "seastate/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace seastate {

Image to_float(const Image8& image) {
  Image out;
  for (int c = 0; c < 3; ++c) out.planes[c] = image.planes[c].cast<float>() / 255.0f;
  return out;
}

Image8 to_uint8(const Image& image) {
  Image8 out;
  for (int c = 0; c < 3; ++c)
    out.planes[c] = (image.planes[c].max(0.0f).min(1.0f) * 255.0f).round().cast<std::uint8_t>();
  return out;
}

Image8 from_bgr_mat(const cv::Mat& bgr) {
  if (bgr.empty()) throw DataError("empty image");
  cv::Mat src = bgr;
  if (src.type() == CV_8UC1) cv::cvtColor(bgr, src, cv::COLOR_GRAY2BGR);
  if (src.type() == CV_8UC4) cv::cvtColor(bgr, src, cv::COLOR_BGRA2BGR);
  if (src.type() != CV_8UC3) throw DataError("unsupported pixel format");
  Image8 out(src.rows, src.cols);
  for (int y = 0; y < src.rows; ++y) {
    const auto* row = src.ptr<cv::Vec3b>(y);
    for (int x = 0; x < src.cols; ++x) {
      out.planes[0](y, x) = row[x][2];
      out.planes[1](y, x) = row[x][1];
      out.planes[2](y, x) = row[x][0];
    }
  }
  return out;
}

cv::Mat to_bgr_mat(const Image8& image) {
  cv::Mat out(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < out.rows; ++y) {
    auto* row = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < out.cols; ++x)
      row[x] = {image.planes[2](y, x), image.planes[1](y, x), image.planes[0](y, x)};
  }
  return out;
}

Image8 read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw DataError("cannot read image " + path.string());
  return from_bgr_mat(mat);
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 1};
  if (!cv::imwrite(path.string(), to_bgr_mat(image), params))
    throw DataError("cannot write image " + path.string());
}

}  // namespace seastate
