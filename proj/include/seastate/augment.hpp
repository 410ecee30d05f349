#pragma once

#include <numbers>

#include <Eigen/Dense>

#include "seastate/image.hpp"
#include "seastate/rng.hpp"

namespace seastate {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Training-time augmentation parameters. Probabilities of 1 mean "always".
struct AugmentConfig {
  int crop_out = 224;
  double motion_blur_prob = 0.5;
  int blur_kernel_size = 7;
  double flip_prob = 0.5;
  double brightness_contrast_prob = 1.0;
  /// Additive delta on [0,1] pixels.
  Interval brightness_delta{-0.2, 0.2};
  Interval contrast{0.5, 1.5};
  double rotation_prob = 1.0;
  Interval rotation{-0.2 * std::numbers::pi, 0.2 * std::numbers::pi};
  double grayscale_prob = 0.2;
  std::uint64_t seed = 0;
  /// Replaces the random crop with the evaluation center crop.
  bool center_crop_override = false;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

/// Which transforms fired on one draw, and with which parameters.
struct AugmentTrace {
  CropRegion crop;
  bool blurred = false;
  bool flipped = false;
  bool brightness_contrast = false;
  double brightness_delta = 0.0;
  double contrast_factor = 1.0;
  bool rotated = false;
  double rotation = 0.0;
  bool grayscale = false;
};

/// k x k kernel whose center row holds 1/k per tap.
Eigen::MatrixXd motion_blur_kernel(int k);

CropRegion center_crop_region(int height, int width, int out);

Image random_crop(const Image& image, int out, Rng& rng, CropRegion* chosen = nullptr);

/// Unconditional horizontal motion blur, edge-replicated borders.
Image apply_motion_blur(const Image& image, int k);
/// Blur with probability p.
Image motion_blur(const Image& image, Rng& rng, double p, int k, bool* applied = nullptr);

Image flip_horizontal(const Image& image);
/// (x - channel mean) * factor + channel mean + delta, clamped to [0,1].
Image adjust_brightness_contrast(const Image& image, double delta, double factor);
/// Rotation about the image center, bilinear sampling, edge replication.
Image rotate(const Image& image, double radians);
Image to_grayscale(const Image& image);

Image flip_brightness_contrast_rotate_grayscale(const Image& image, Rng& rng,
                                                const AugmentConfig& config,
                                                AugmentTrace* trace = nullptr);

/// crop -> blur -> flip -> brightness/contrast -> rotation -> grayscale.
Image augment_train(const Image& image, Rng& rng, const AugmentConfig& config,
                    AugmentTrace* trace = nullptr);

/// Deterministic center crop used for validation and testing.
Image prepare_eval(const Image& image, int out = 224);

}  // namespace seastate
