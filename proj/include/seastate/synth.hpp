#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "seastate/image.hpp"

namespace seastate {

struct DatasetManifest;

struct SynthConfig {
  int num_classes = 8;
  int train_per_class = 300;
  int val_per_class = 50;
  int test_per_class = 100;
  int image_size = 331;
  std::uint64_t seed = 7;
  /// Within-class jitter of wavelength and amplitude, in units of half the class step.
  /// Below 1 the classes do not overlap.
  double difficulty = 0.5;
  std::string name = "synthetic-sea";

  void validate() const;
};

/// A procedural sea surface: a few oriented travelling gratings plus lattice noise.
/// Pixel values depend only on absolute coordinates, so rendering a sub-region
/// equals cropping the full render.
struct WaveField {
  struct Grating {
    double kx = 0.0;
    double ky = 0.0;
    double amplitude = 0.0;
    double phase = 0.0;
    double omega = 0.0;
  };
  std::vector<Grating> gratings;
  double noise_amplitude = 0.03;
  double noise_cell = 3.0;
  std::uint64_t noise_seed = 0;
  std::array<double, 3> base{0.35, 0.45, 0.55};
  std::array<double, 3> gain{0.7, 0.85, 1.0};
};

/// Dominant wavelength in pixels for a class; grows geometrically with the index.
double class_wavelength(int class_index, int num_classes);
/// Peak amplitude; grows faster than the wavelength so the slope grows too.
double class_amplitude(int class_index, int num_classes);

WaveField make_wave_field(int class_index, int num_classes, std::uint64_t seed,
                          double difficulty);

/// Renders `region` of the field at time `t` (seconds).
Image render_wave_field(const WaveField& field, const Rect& region, double t = 0.0);

Image generate_texture(int class_index, std::uint64_t seed, int size, int num_classes = 8,
                       double difficulty = 0.5);

/// Mean luminance gradient magnitude; the statistic that orders the classes.
double mean_gradient_magnitude(const Image& image);

/// Writes <out>/<split>/<label>/<id>.png and <out>/manifest.tsv.
DatasetManifest generate_dataset(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Nearest-centroid classifier on mean gradient magnitude, fit on train, scored on test.
double gradient_centroid_baseline_accuracy(const DatasetManifest& manifest,
                                           const std::filesystem::path& root);

}  // namespace seastate
