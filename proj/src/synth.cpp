#include "seastate/synth.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "seastate/dataset.hpp"
#include "seastate/rng.hpp"

namespace fs = std::filesystem;

namespace seastate {

namespace {

constexpr double kMinWavelength = 6.0;
constexpr double kMaxWavelength = 40.0;
constexpr double kMaxAmplitude = 0.4;
// A ~ lambda^1.5, so the slope A/lambda grows like sqrt(lambda).
constexpr double kAmplitudeExponent = 1.5;

double wavelength_at(double position, int num_classes) {
  const double t = num_classes > 1 ? position / (num_classes - 1) : 0.0;
  return kMinWavelength * std::pow(kMaxWavelength / kMinWavelength, t);
}

double amplitude_for(double wavelength) {
  return kMaxAmplitude * std::pow(wavelength / kMaxWavelength, kAmplitudeExponent);
}

double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL +
                                                       static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("synth.classes must be >= 2");
  if (image_size < 224) throw ConfigError("synth.image_size must be >= 224");
  if (!(difficulty > 0.0)) throw ConfigError("synth.difficulty must be > 0");
  if (train_per_class < 0 || val_per_class < 0 || test_per_class < 0)
    throw ConfigError("synth per-class counts must be >= 0");
}

double class_wavelength(int class_index, int num_classes) {
  return wavelength_at(class_index, num_classes);
}

double class_amplitude(int class_index, int num_classes) {
  return amplitude_for(class_wavelength(class_index, num_classes));
}

WaveField make_wave_field(int class_index, int num_classes, std::uint64_t seed,
                          double difficulty) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(class_index), 0x5ea5ULL}));
  const double half = 0.5 * difficulty;
  const double position = class_index + (half > 0.0 ? rng.uniform(-half, half) : 0.0);
  const double wavelength = wavelength_at(position, num_classes);
  const double amplitude = amplitude_for(wavelength);
  const double heading = rng.uniform(0.0, std::numbers::pi);

  static constexpr double kScale[] = {1.0, 0.9, 1.12};
  static constexpr double kWeight[] = {0.5, 0.3, 0.2};
  static constexpr double kTurn[] = {0.0, 0.35, -0.35};

  WaveField field;
  for (int i = 0; i < 3; ++i) {
    const double lambda = wavelength * kScale[i];
    const double k = 2.0 * std::numbers::pi / lambda;
    const double angle = heading + kTurn[i];
    WaveField::Grating g;
    g.kx = k * std::cos(angle);
    g.ky = k * std::sin(angle);
    g.amplitude = amplitude * kWeight[i];
    g.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g.omega = 2.0 * std::numbers::pi * 0.8 / std::sqrt(lambda / kMinWavelength);
    field.gratings.push_back(g);
  }
  field.noise_amplitude = 0.01;
  field.noise_cell = 2.0;
  field.noise_seed = rng.engine()();
  return field;
}

Image render_wave_field(const WaveField& field, const Rect& region, double t) {
  using Eigen::ArrayXd;
  const int h = region.height;
  const int w = region.width;
  const ArrayXd xs = ArrayXd::LinSpaced(w, region.x, region.x + w - 1);
  const ArrayXd ys = ArrayXd::LinSpaced(h, region.y, region.y + h - 1);

  // sin(kx x + ky y + phi) = sin(kx x) cos(ky y + phi) + cos(kx x) sin(ky y + phi)
  Eigen::MatrixXd value = Eigen::MatrixXd::Zero(h, w);
  for (const auto& g : field.gratings) {
    const ArrayXd ax = g.kx * xs;
    const ArrayXd ay = g.ky * ys + g.phase + g.omega * t;
    value.noalias() += g.amplitude * (ay.cos().matrix() * ax.sin().matrix().transpose());
    value.noalias() += g.amplitude * (ay.sin().matrix() * ax.cos().matrix().transpose());
  }

  if (field.noise_amplitude > 0.0) {
    const std::uint64_t seed = field.noise_seed ^ splitmix64(std::bit_cast<std::uint64_t>(t));
    const double cell = field.noise_cell;
    for (int r = 0; r < h; ++r) {
      const double fy = (region.y + r) / cell;
      const auto iy = static_cast<std::int64_t>(std::floor(fy));
      const double ty = fy - iy;
      for (int c = 0; c < w; ++c) {
        const double fx = (region.x + c) / cell;
        const auto ix = static_cast<std::int64_t>(std::floor(fx));
        const double tx = fx - ix;
        const double top = (1 - tx) * lattice_value(seed, ix, iy) + tx * lattice_value(seed, ix + 1, iy);
        const double bottom =
            (1 - tx) * lattice_value(seed, ix, iy + 1) + tx * lattice_value(seed, ix + 1, iy + 1);
        value(r, c) += field.noise_amplitude * ((1 - ty) * top + ty * bottom);
      }
    }
  }

  Image out(h, w);
  for (int c = 0; c < 3; ++c)
    out.planes[c] =
        (field.base[c] + field.gain[c] * value.array()).max(0.0).min(1.0).cast<float>();
  return out;
}

Image generate_texture(int class_index, std::uint64_t seed, int size, int num_classes,
                       double difficulty) {
  if (class_index < 0 || class_index >= num_classes)
    throw ConfigError(fmt::format("class index {} outside [0,{})", class_index, num_classes));
  return render_wave_field(make_wave_field(class_index, num_classes, seed, difficulty),
                           {0, 0, size, size});
}

double mean_gradient_magnitude(const Image& image) {
  const PlaneT<float> luma =
      0.2989f * image.planes[0] + 0.5870f * image.planes[1] + 0.1140f * image.planes[2];
  const Eigen::Index h = luma.rows() - 1;
  const Eigen::Index w = luma.cols() - 1;
  if (h <= 0 || w <= 0) return 0.0;
  const Eigen::ArrayXXd gx = (luma.block(0, 1, h, w) - luma.block(0, 0, h, w)).cast<double>();
  const Eigen::ArrayXXd gy = (luma.block(1, 0, h, w) - luma.block(0, 0, h, w)).cast<double>();
  return (gx.square() + gy.square()).sqrt().mean();
}

DatasetManifest generate_dataset(const SynthConfig& config, const fs::path& out_dir) {
  config.validate();
  DatasetManifest manifest;
  manifest.name = config.name;
  manifest.strategy = Strategy::LL;
  manifest.seed = config.seed;
  manifest.label_range = {1, config.num_classes};

  for (int c = 0; c < config.num_classes; ++c) {
    const int label = c + 1;
    std::int64_t frame = 0;
    for (Split split : kSplits) {
      const int count = split == Split::train ? config.train_per_class
                        : split == Split::val ? config.val_per_class
                                              : config.test_per_class;
      for (int i = 0; i < count; ++i, ++frame) {
        ImageRecord r;
        r.session_id = fmt::format("synth-c{}", label);
        r.frame_index = frame;
        r.id = fmt::format("{}_f{:08d}", r.session_id, frame);
        r.crop = {0, 0, config.image_size, config.image_size};
        r.label = SeaStateLabel{label};
        r.split = split;
        r.strategy = Strategy::LL;
        const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(c),
                                                             static_cast<std::uint64_t>(frame)});
        if (!out_dir.empty())
          write_png(out_dir / r.relative_path(),
                    to_uint8(generate_texture(c, seed, config.image_size, config.num_classes,
                                              config.difficulty)));
        manifest.records.push_back(std::move(r));
      }
    }
  }
  manifest.recount();
  if (!out_dir.empty()) write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

double gradient_centroid_baseline_accuracy(const DatasetManifest& manifest, const fs::path& root) {
  const int n = manifest.label_range.count();
  std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  for (const auto* r : manifest.split_records(Split::train)) {
    const auto k = static_cast<std::size_t>(manifest.label_range.index_of(r->label.value));
    sum[k] += mean_gradient_magnitude(to_float(read_image(root / r->relative_path())));
    ++count[k];
  }
  std::vector<double> centroid(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 0; k < centroid.size(); ++k)
    centroid[k] = count[k] ? sum[k] / count[k] : std::numeric_limits<double>::infinity();

  int hits = 0;
  int total = 0;
  for (const auto* r : manifest.split_records(Split::test)) {
    const double stat = mean_gradient_magnitude(to_float(read_image(root / r->relative_path())));
    std::size_t best = 0;
    for (std::size_t k = 1; k < centroid.size(); ++k)
      if (std::abs(stat - centroid[k]) < std::abs(stat - centroid[best])) best = k;
    hits += manifest.label_range.label_at(static_cast<int>(best)) == r->label.value;
    ++total;
  }
  if (total == 0) throw EmptyReportError("no test records for the baseline");
  return static_cast<double>(hits) / total;
}

}  // namespace seastate
