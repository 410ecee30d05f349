#include "seastate/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seastate/errors.hpp"

namespace seastate {

Adam::Adam(std::size_t size, AdamConfig config)
    : config_(config),
      m_(Eigen::VectorXf::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXf::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Eigen::VectorXf& params, const Eigen::VectorXf& grad, const ParameterRanges& ranges,
                double lr) {
  ++steps_;
  const auto b1 = static_cast<float>(config_.beta1);
  const auto b2 = static_cast<float>(config_.beta2);
  const double correction =
      std::sqrt(1.0 - std::pow(config_.beta2, steps_)) / (1.0 - std::pow(config_.beta1, steps_));
  const auto alpha = static_cast<float>(lr * correction);
  const auto eps = static_cast<float>(config_.epsilon);
  for (const auto& [begin, end] : ranges) {
    const auto b = static_cast<Eigen::Index>(begin);
    const auto n = static_cast<Eigen::Index>(end - begin);
    auto m = m_.segment(b, n);
    auto v = v_.segment(b, n);
    const auto g = grad.segment(b, n);
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseAbs2();
    params.segment(b, n).array() -= alpha * m.array() / (v.array().sqrt() + eps);
  }
}

RmsProp::RmsProp(std::size_t size, RmsPropConfig config)
    : config_(config), v_(Eigen::VectorXf::Zero(static_cast<Eigen::Index>(size))) {}

void RmsProp::step(Eigen::VectorXf& params, const Eigen::VectorXf& grad,
                   const ParameterRanges& ranges, double lr) {
  const auto rho = static_cast<float>(config_.rho);
  const auto eps = static_cast<float>(config_.epsilon);
  const auto rate = static_cast<float>(lr);
  for (const auto& [begin, end] : ranges) {
    const auto b = static_cast<Eigen::Index>(begin);
    const auto n = static_cast<Eigen::Index>(end - begin);
    auto v = v_.segment(b, n);
    const auto g = grad.segment(b, n);
    v = rho * v + (1.0f - rho) * g.cwiseAbs2();
    params.segment(b, n).array() -= rate * g.array() / (v.array().sqrt() + eps);
  }
}

void PlateauConfig::validate() const {
  if (!(base_lr > 0)) throw ConfigError("training.base_lr must be > 0");
  if (!(min_lr > 0) || min_lr > base_lr) throw ConfigError("training.min_lr must be in (0, base_lr]");
  if (!(factor > 1)) throw ConfigError("training.plateau_factor must be > 1");
  if (patience < 1) throw ConfigError("training.patience must be >= 1");
  if (!(threshold >= 0)) throw ConfigError("training.improvement_threshold must be >= 0");
}

PlateauScheduler::PlateauScheduler(PlateauConfig config)
    : config_(config), lr_(config.base_lr), best_(-std::numeric_limits<double>::infinity()) {
  config_.validate();
}

double PlateauScheduler::update(double value) {
  const double score = config_.monitor == PlateauMonitor::val_accuracy ? value : -value;
  if (score > best_ + config_.threshold) {
    best_ = score;
    wait_ = 0;
    return lr_;
  }
  if (++wait_ >= config_.patience) {
    lr_ = std::max(config_.base_lr / std::pow(config_.factor, ++reductions_), config_.min_lr);
    if (config_.reset_on_reduction) wait_ = 0;
  }
  return lr_;
}

double plateau_lr(std::span<const double> history, const PlateauConfig& config) {
  PlateauScheduler scheduler(config);
  for (double v : history) scheduler.update(v);
  return scheduler.lr();
}

}  // namespace seastate
