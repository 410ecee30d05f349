#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace seastate {

using ParameterRanges = std::vector<std::pair<std::size_t, std::size_t>>;

/// Updates only parameters inside `ranges`; state for the rest stays untouched.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Eigen::VectorXf& params, const Eigen::VectorXf& grad,
                    const ParameterRanges& ranges, double lr) = 0;
  virtual const char* name() const noexcept = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(std::size_t size, AdamConfig config = {});
  void step(Eigen::VectorXf& params, const Eigen::VectorXf& grad, const ParameterRanges& ranges,
            double lr) override;
  const char* name() const noexcept override { return "adam"; }

 private:
  AdamConfig config_;
  Eigen::VectorXf m_;
  Eigen::VectorXf v_;
  long steps_ = 0;
};

struct RmsPropConfig {
  double rho = 0.9;
  double epsilon = 1e-7;
};

class RmsProp final : public Optimizer {
 public:
  explicit RmsProp(std::size_t size, RmsPropConfig config = {});
  void step(Eigen::VectorXf& params, const Eigen::VectorXf& grad, const ParameterRanges& ranges,
            double lr) override;
  const char* name() const noexcept override { return "rmsprop"; }

 private:
  RmsPropConfig config_;
  Eigen::VectorXf v_;
};

enum class PlateauMonitor { val_accuracy, val_loss };

struct PlateauConfig {
  double base_lr = 1e-4;
  double factor = 5.0;
  double min_lr = 1e-6;
  int patience = 30;
  double threshold = 1e-6;
  PlateauMonitor monitor = PlateauMonitor::val_accuracy;
  /// Clear the stagnation counter after each reduction.
  bool reset_on_reduction = true;

  void validate() const;
  bool operator==(const PlateauConfig&) const = default;
};

/// Incremental reduce-on-plateau schedule.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauConfig config);
  /// Records one epoch's monitored value and returns the rate for the next epoch.
  double update(double value);
  double lr() const noexcept { return lr_; }
  int reductions() const noexcept { return reductions_; }

 private:
  PlateauConfig config_;
  double lr_;
  double best_;
  int wait_ = 0;
  int reductions_ = 0;
};

/// Rate for the epoch following `history`; base_lr for an empty history.
double plateau_lr(std::span<const double> history, const PlateauConfig& config);

}  // namespace seastate
