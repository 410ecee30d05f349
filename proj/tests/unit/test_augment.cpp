#include <cmath>

#include "doctest.h"
#include "seastate/augment.hpp"
#include "support.hpp"

using namespace seastate;
using testing::noise_image;

namespace {

AugmentConfig quiet() {
  AugmentConfig c;
  c.motion_blur_prob = 0.0;
  c.flip_prob = 0.0;
  c.brightness_contrast_prob = 0.0;
  c.rotation_prob = 0.0;
  c.grayscale_prob = 0.0;
  return c;
}

/// Horizontal 1 x k box filter with edge replication, written out directly.
Image box_blur_oracle(const Image& img, int k) {
  Image out(img.height(), img.width());
  const int r = k / 2;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) acc += img.planes[c](y, std::clamp(x + d, 0, img.width() - 1));
        out.planes[c](y, x) = static_cast<float>(acc / k);
      }
  return out;
}

}  // namespace

TEST_SUITE("augmentation") {

TEST_CASE("blur kernel taps sum to one") {
  for (int k : {1, 3, 5, 7, 9, 15, 31}) {
    const auto kernel = motion_blur_kernel(k);
    CHECK(std::abs(kernel.sum() - 1.0) <= 1e-12);
    CHECK(std::abs(kernel.row(k / 2).sum() - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(motion_blur_kernel(4), ConfigError);
  CHECK_THROWS_AS(motion_blur_kernel(0), ConfigError);
}

TEST_CASE("impulse spreads into a horizontal run of seven") {
  Image img = Image::constant(21, 21, 0.0f);
  for (auto& p : img.planes) p(10, 10) = 0.7f;
  const Image out = apply_motion_blur(img, 7);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 21; ++y)
      for (int x = 0; x < 21; ++x) {
        const float expected = (y == 10 && std::abs(x - 10) <= 3) ? 0.7f / 7.0f : 0.0f;
        CHECK(std::abs(out.planes[c](y, x) - expected) <= 1e-6f);
      }
}

TEST_CASE("blur matches a direct convolution on noise") {
  const Image img = noise_image(17, 23, 3);
  for (int k : {3, 7}) CHECK(testing::max_abs_diff(apply_motion_blur(img, k), box_blur_oracle(img, k)) <= 1e-5f);
}

TEST_CASE("blur of a constant field is unchanged") {
  const Image gray = Image::constant(40, 40, 0.42f);
  CHECK(testing::max_abs_diff(apply_motion_blur(gray, 7), gray) <= 1e-6f);
}

TEST_CASE("blur with p = 0 is bit-identical") {
  const Image img = noise_image(30, 30, 4);
  Rng rng(1);
  bool applied = true;
  CHECK(motion_blur(img, rng, 0.0, 7, &applied) == img);
  CHECK_FALSE(applied);
}

TEST_CASE("random crop: identity, bounds, reproducibility, content invariance") {
  const Image small = noise_image(224, 224, 5);
  Rng r0(0);
  CHECK(random_crop(small, 224, r0) == small);

  const Image big = noise_image(331, 331, 6);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng a(seed), b(seed);
    CropRegion ra, rb;
    const Image ca = random_crop(big, 224, a, &ra);
    const Image cb = random_crop(big, 224, b, &rb);
    CHECK(ra == rb);
    CHECK(ca == cb);
    CHECK(ra.x >= 0);
    CHECK(ra.x <= 107);
    CHECK(ra.y >= 0);
    CHECK(ra.y <= 107);
    CHECK(ca.height() == 224);
    CHECK(ca.width() == 224);
  }
  Rng rc(3);
  const Image flat = Image::constant(331, 331, 0.25f);
  CHECK(random_crop(flat, 224, rc) == Image::constant(224, 224, 0.25f));
  Rng rd(3);
  CHECK_THROWS_AS(random_crop(small, 300, rd), GeometryError);
}

TEST_CASE("flip is an involution") {
  const Image img = noise_image(31, 47, 7);
  AugmentConfig c = quiet();
  c.flip_prob = 1.0;
  Rng rng(11);
  const Image once = flip_brightness_contrast_rotate_grayscale(img, rng, c);
  CHECK_FALSE(once == img);
  CHECK(flip_brightness_contrast_rotate_grayscale(once, rng, c) == img);
  CHECK(once.planes[1](5, 0) == img.planes[1](5, 46));
}

TEST_CASE("neutral photometric parameters are the identity") {
  const Image img = noise_image(40, 40, 8);
  AugmentConfig c = quiet();
  c.brightness_contrast_prob = 1.0;
  c.brightness_delta = {0.0, 0.0};
  c.contrast = {1.0, 1.0};
  c.rotation_prob = 1.0;
  c.rotation = {0.0, 0.0};
  Rng rng(12);
  CHECK(flip_brightness_contrast_rotate_grayscale(img, rng, c) == img);
}

TEST_CASE("brightness and contrast follow the affine formula") {
  const Image img = noise_image(20, 20, 9);
  const Image out = adjust_brightness_contrast(img, 0.05, 0.8);
  for (int c = 0; c < 3; ++c) {
    const double mean = img.planes[c].cast<double>().mean();
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        const double expected = std::clamp((img.planes[c](y, x) - mean) * 0.8 + mean + 0.05, 0.0, 1.0);
        CHECK(std::abs(out.planes[c](y, x) - expected) <= 1e-5);
      }
  }
}

TEST_CASE("forced grayscale makes channels equal") {
  const Image img = noise_image(25, 25, 10);
  AugmentConfig c = quiet();
  c.grayscale_prob = 1.0;
  Rng rng(2);
  const Image g = flip_brightness_contrast_rotate_grayscale(img, rng, c);
  CHECK((g.planes[0] == g.planes[1]).all());
  CHECK((g.planes[1] == g.planes[2]).all());
}

TEST_CASE("rotation keeps the centre pixel and the range") {
  Image img = noise_image(41, 41, 13);
  const Image r = rotate(img, 0.3);
  CHECK(std::abs(r.planes[0](20, 20) - img.planes[0](20, 20)) <= 1e-4f);
  CHECK(testing::in_unit_range(r));
  CHECK(rotate(img, 0.0) == img);
}

TEST_CASE("center crop offset for 331 is 53") {
  CHECK(center_crop_region(331, 331, 224) == CropRegion{53, 53, 224, 224});
  const Image big = noise_image(331, 331, 14);
  const Image e = prepare_eval(big);
  CHECK(e == crop(big, {53, 53, 224, 224}));
  CHECK(prepare_eval(big) == e);
  const Image small = noise_image(224, 224, 15);
  CHECK(prepare_eval(small) == small);
}

TEST_CASE("zero probabilities with center override equal evaluation preprocessing") {
  AugmentConfig c = quiet();
  c.center_crop_override = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image img = noise_image(331, 331, 100 + seed);
    Rng rng(seed);
    CHECK(augment_train(img, rng, c) == prepare_eval(img));
  }
}

TEST_CASE("augment_train is deterministic and shape/range preserving") {
  const AugmentConfig c;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Image img = noise_image(331, 331, 200 + seed);
    Rng a(seed), b(seed);
    const Image x = augment_train(img, a, c);
    CHECK(x == augment_train(img, b, c));
    CHECK(x.height() == 224);
    CHECK(x.width() == 224);
    CHECK(testing::in_unit_range(x));
  }
}

TEST_CASE("application rates match configured probabilities") {
  const AugmentConfig c;
  const Image img = noise_image(240, 240, 16);
  int blur = 0, flip = 0, gray = 0;
  Rng rng(2024);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    AugmentTrace t;
    augment_train(img, rng, c, &t);
    blur += t.blurred;
    flip += t.flipped;
    gray += t.grayscale;
  }
  auto within = [&](int count, double p) {
    const double sigma = std::sqrt(n * p * (1 - p));
    return std::abs(count - n * p) <= 3 * sigma;
  };
  CHECK(within(blur, 0.5));
  CHECK(within(flip, 0.5));
  CHECK(within(gray, 0.2));
}

TEST_CASE("invalid augmentation config names the field") {
  AugmentConfig c;
  c.flip_prob = 1.5;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("flip_prob") != std::string::npos);
  }
  AugmentConfig even;
  even.blur_kernel_size = 6;
  CHECK_THROWS_AS(even.validate(), ConfigError);
}

}
