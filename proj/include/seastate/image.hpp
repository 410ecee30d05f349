#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <opencv2/core.hpp>

#include "seastate/errors.hpp"

namespace seastate {

/// Axis-aligned pixel rectangle; x/y measured from the top-left corner.
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(const Rect& inner) const noexcept {
    return inner.x >= x && inner.y >= y && inner.x + inner.width <= x + width &&
           inner.y + inner.height <= y + height;
  }
  bool operator==(const Rect&) const = default;
};

using CropRegion = Rect;

template <typename Scalar>
using PlaneT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Planar RGB image. Planes are row-major so a plane maps onto cv::Mat without copying.
template <typename Scalar>
struct ImageT {
  using Plane = PlaneT<Scalar>;
  std::array<Plane, 3> planes;

  ImageT() = default;
  ImageT(int height, int width) {
    for (auto& p : planes) p.resize(height, width);
  }

  static ImageT constant(int height, int width, Scalar value) {
    ImageT img(height, width);
    for (auto& p : img.planes) p.setConstant(value);
    return img;
  }

  int height() const noexcept { return static_cast<int>(planes[0].rows()); }
  int width() const noexcept { return static_cast<int>(planes[0].cols()); }
  Rect bounds() const noexcept { return {0, 0, width(), height()}; }

  bool operator==(const ImageT& other) const {
    if (height() != other.height() || width() != other.width()) return false;
    for (int c = 0; c < 3; ++c)
      if ((planes[c] != other.planes[c]).any()) return false;
    return true;
  }
};

using Image = ImageT<float>;
using Image8 = ImageT<std::uint8_t>;

/// Exact pixel copy of `region`; throws GeometryError if the region leaves the image.
template <typename Scalar>
ImageT<Scalar> crop(const ImageT<Scalar>& image, const Rect& region) {
  if (region.width <= 0 || region.height <= 0 || !image.bounds().contains(region))
    throw GeometryError("crop region (" + std::to_string(region.x) + "," +
                        std::to_string(region.y) + "," + std::to_string(region.width) + "," +
                        std::to_string(region.height) + ") outside " +
                        std::to_string(image.width()) + "x" + std::to_string(image.height()));
  ImageT<Scalar> out;
  for (int c = 0; c < 3; ++c)
    out.planes[c] = image.planes[c].block(region.y, region.x, region.height, region.width);
  return out;
}

/// 8-bit to [0,1].
Image to_float(const Image8& image);
/// [0,1] to 8-bit with rounding and clamping.
Image8 to_uint8(const Image& image);

/// Conversions from/to OpenCV's interleaved BGR layout.
Image8 from_bgr_mat(const cv::Mat& bgr);
cv::Mat to_bgr_mat(const Image8& image);

Image8 read_image(const std::filesystem::path& path);
/// Lossless PNG.
void write_png(const std::filesystem::path& path, const Image8& image);

/// Non-owning cv::Mat view of a plane, for OpenCV kernels.
inline cv::Mat plane_view(PlaneT<float>& plane) {
  return {static_cast<int>(plane.rows()), static_cast<int>(plane.cols()), CV_32F, plane.data()};
}
inline cv::Mat plane_view(const PlaneT<float>& plane) {
  return {static_cast<int>(plane.rows()), static_cast<int>(plane.cols()), CV_32F,
          const_cast<float*>(plane.data())};
}

}  // namespace seastate
