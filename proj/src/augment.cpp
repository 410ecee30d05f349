#include "seastate/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/imgproc.hpp>

namespace seastate {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string("augment.") + name + " must lie in [0,1]");
}

void check_interval(const Interval& iv, const char* name) {
  if (!(iv.lo <= iv.hi)) throw ConfigError(std::string("augment.") + name + " has lo > hi");
}

Image clamp01(Image image) {
  for (auto& p : image.planes) p = p.max(0.0f).min(1.0f);
  return image;
}

}  // namespace

void AugmentConfig::validate() const {
  if (crop_out < 1 || crop_out > 331) throw ConfigError("augment.crop_out must lie in [1,331]");
  if (blur_kernel_size < 1 || blur_kernel_size % 2 == 0)
    throw ConfigError("augment.blur_kernel_size must be odd and >= 1");
  check_probability(motion_blur_prob, "motion_blur_prob");
  check_probability(flip_prob, "flip_prob");
  check_probability(brightness_contrast_prob, "brightness_contrast_prob");
  check_probability(rotation_prob, "rotation_prob");
  check_probability(grayscale_prob, "grayscale_prob");
  check_interval(brightness_delta, "brightness_delta");
  check_interval(contrast, "contrast");
  check_interval(rotation, "rotation");
  if (!(contrast.lo > 0.0)) throw ConfigError("augment.contrast must be positive");
}

Eigen::MatrixXd motion_blur_kernel(int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("motion blur kernel size must be odd and >= 1");
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(k, k);
  kernel.row(k / 2).setConstant(1.0 / k);
  return kernel;
}

CropRegion center_crop_region(int height, int width, int out) {
  if (height < out || width < out)
    throw GeometryError("image " + std::to_string(width) + "x" + std::to_string(height) +
                        " smaller than crop " + std::to_string(out));
  return {(width - out) / 2, (height - out) / 2, out, out};
}

Image random_crop(const Image& image, int out, Rng& rng, CropRegion* chosen) {
  if (image.height() < out || image.width() < out)
    throw GeometryError("image " + std::to_string(image.width()) + "x" +
                        std::to_string(image.height()) + " smaller than crop " +
                        std::to_string(out));
  const int y = rng.uniform_int(0, image.height() - out);
  const int x = rng.uniform_int(0, image.width() - out);
  const CropRegion region{x, y, out, out};
  if (chosen) *chosen = region;
  return crop(image, region);
}

Image apply_motion_blur(const Image& image, int k) {
  const Eigen::MatrixXd kernel = motion_blur_kernel(k);
  cv::Mat cv_kernel(k, k, CV_32F);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) cv_kernel.at<float>(r, c) = static_cast<float>(kernel(r, c));
  Image out(image.height(), image.width());
  for (int c = 0; c < 3; ++c) {
    cv::Mat dst = plane_view(out.planes[c]);
    cv::filter2D(plane_view(image.planes[c]), dst, CV_32F, cv_kernel, cv::Point(-1, -1), 0.0,
                 cv::BORDER_REPLICATE);
  }
  return out;
}

Image motion_blur(const Image& image, Rng& rng, double p, int k, bool* applied) {
  const bool fire = rng.bernoulli(p);
  if (applied) *applied = fire;
  return fire ? apply_motion_blur(image, k) : image;
}

Image flip_horizontal(const Image& image) {
  Image out;
  for (int c = 0; c < 3; ++c) out.planes[c] = image.planes[c].rowwise().reverse();
  return out;
}

Image adjust_brightness_contrast(const Image& image, double delta, double factor) {
  if (delta == 0.0 && factor == 1.0) return image;
  Image out;
  for (int c = 0; c < 3; ++c) {
    const float mean = image.planes[c].mean();
    out.planes[c] = (image.planes[c] - mean) * static_cast<float>(factor) + mean +
                    static_cast<float>(delta);
  }
  return clamp01(std::move(out));
}

Image rotate(const Image& image, double radians) {
  if (radians == 0.0) return image;
  const cv::Point2f center((image.width() - 1) * 0.5f, (image.height() - 1) * 0.5f);
  const cv::Mat m = cv::getRotationMatrix2D(center, radians * 180.0 / std::numbers::pi, 1.0);
  Image out(image.height(), image.width());
  for (int c = 0; c < 3; ++c) {
    cv::Mat dst = plane_view(out.planes[c]);
    cv::warpAffine(plane_view(image.planes[c]), dst, m, dst.size(), cv::INTER_LINEAR,
                   cv::BORDER_REPLICATE);
  }
  return clamp01(std::move(out));
}

Image to_grayscale(const Image& image) {
  const PlaneT<float> luma =
      0.2989f * image.planes[0] + 0.5870f * image.planes[1] + 0.1140f * image.planes[2];
  Image out;
  for (auto& p : out.planes) p = luma.max(0.0f).min(1.0f);
  return out;
}

Image flip_brightness_contrast_rotate_grayscale(const Image& image, Rng& rng,
                                                const AugmentConfig& config,
                                                AugmentTrace* trace) {
  AugmentTrace local;
  AugmentTrace& t = trace ? *trace : local;
  Image out = image;

  t.flipped = rng.bernoulli(config.flip_prob);
  if (t.flipped) out = flip_horizontal(out);

  t.brightness_contrast = rng.bernoulli(config.brightness_contrast_prob);
  if (t.brightness_contrast) {
    t.brightness_delta = rng.uniform(config.brightness_delta.lo, config.brightness_delta.hi);
    t.contrast_factor = rng.uniform(config.contrast.lo, config.contrast.hi);
    out = adjust_brightness_contrast(out, t.brightness_delta, t.contrast_factor);
  }

  t.rotated = rng.bernoulli(config.rotation_prob);
  if (t.rotated) {
    t.rotation = rng.uniform(config.rotation.lo, config.rotation.hi);
    out = rotate(out, t.rotation);
  }

  t.grayscale = rng.bernoulli(config.grayscale_prob);
  if (t.grayscale) out = to_grayscale(out);
  return out;
}

Image augment_train(const Image& image, Rng& rng, const AugmentConfig& config,
                    AugmentTrace* trace) {
  AugmentTrace local;
  AugmentTrace& t = trace ? *trace : local;
  Image out;
  if (config.center_crop_override) {
    t.crop = center_crop_region(image.height(), image.width(), config.crop_out);
    out = crop(image, t.crop);
  } else {
    out = random_crop(image, config.crop_out, rng, &t.crop);
  }
  out = motion_blur(out, rng, config.motion_blur_prob, config.blur_kernel_size, &t.blurred);
  return flip_brightness_contrast_rotate_grayscale(out, rng, config, &t);
}

Image prepare_eval(const Image& image, int out) {
  return crop(image, center_crop_region(image.height(), image.width(), out));
}

}  // namespace seastate
