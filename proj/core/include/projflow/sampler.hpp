#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "projflow/flow_oracle.hpp"
#include "projflow/kinematic_metric.hpp"
#include "projflow/linear_ops.hpp"
#include "projflow/projector.hpp"

namespace projflow {

/// Named noise-mixing schedules:
///   "flowdps" -> eta = t + dt clamped to [0, 1]
///   "zero"    -> 0   (deterministic recomposition; reduces to Euler)
///   "one"     -> 1   (fresh noise only)
/// Throws ValidationError on an unknown name.
double etaScheduleEval(const std::string& name, double t, double dt);

struct SamplerConfig {
  int steps = 100;
  std::string eta_schedule = "flowdps";
  std::uint64_t rng_seed = 0;
  bool record_trajectory = false;
};

/// Per-step snapshot, recorded only when record_trajectory is on.
struct StepTrace {
  double t = 0.0;
  double hard_residual = 0.0;     // relative max over zero-variance rows
  double correction_rnorm = 0.0;  // ||delta||_R
  Eigen::VectorXd x_t;
  Eigen::VectorXd x1_hat;
  Eigen::VectorXd x1_star;
};

struct SampleResult {
  Eigen::VectorXd output;  // corrected endpoint of the last step
  // lightweight per-step series, always recorded
  std::vector<double> hard_residuals;
  std::vector<double> correction_rnorms;
  std::vector<StepTrace> traces;  // only with record_trajectory
  double finalHardResidual() const {
    return hard_residuals.empty() ? 0.0 : hard_residuals.back();
  }
};

/// Supplies the measurement system for each sampling step.  Static
/// systems ignore both arguments and let the projection factorize once;
/// time-varying providers (inpainting, calibrated soft schedules) are
/// re-queried and re-factorized every step.  Providers must be
/// reentrant: sample() calls are pure readers.
class ConstraintProvider {
 public:
  virtual ~ConstraintProvider() = default;
  virtual ConstraintSystem system(double t, const Eigen::VectorXd& x1_hat) const = 0;
  virtual bool timeInvariant() const { return false; }
};

class StaticProvider final : public ConstraintProvider {
 public:
  explicit StaticProvider(ConstraintSystem system) : system_(std::move(system)) {}
  ConstraintSystem system(double, const Eigen::VectorXd&) const override {
    return system_;
  }
  bool timeInvariant() const override { return true; }

 private:
  ConstraintSystem system_;
};

class FunctionProvider final : public ConstraintProvider {
 public:
  using Fn = std::function<ConstraintSystem(double, const Eigen::VectorXd&)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  ConstraintSystem system(double t, const Eigen::VectorXd& x1_hat) const override {
    return fn_(t, x1_hat);
  }

 private:
  Fn fn_;
};

/// Soft-constraint schedule that makes the per-step projection equal the
/// exact Gaussian conditional update for an isotropic prior N(mu, c I):
/// base variances are divided by the conditional variance scale
/// c(1-t)^2 / (t^2 c + (1-t)^2), so soft observations contribute exactly
/// one likelihood factor over the whole run instead of hardening.
/// Use with a metric whose w_kin is 0 (R = I).  This is the linear-
/// Gaussian testbed behind the posterior sanity checks.
class CalibratedSoftProvider final : public ConstraintProvider {
 public:
  CalibratedSoftProvider(ConstraintSystem base, double prior_variance);
  ConstraintSystem system(double t, const Eigen::VectorXd&) const override;

 private:
  ConstraintSystem base_;
  double prior_variance_;
};

/// ProjFlow sampling: Euler-grid loop t_i = i/T that predicts the clean
/// endpoint by Tweedie's identity, projects it onto the measurement set
/// under the kinematics-aware metric, and stochastically recomposes the
/// next state:
///
///   x1_hat  = x_t + (1-t) v(x_t, t)
///   x1_star = project(x1_hat)
///   x0_est  = (x_t - t * x1_star) / (1 - t)         (path noise estimate)
///   x_next  = a * x1_star + s * (sqrt(1-eta) x0_est + sqrt(eta) eps),
///             a = t + dt,  s = 1 - (t + dt)
///
/// The output is the last corrected endpoint (the last step has a = 1,
/// s = 0, so it coincides with x_{t=1}).  Deterministic for a given
/// config; distinct seeds may run concurrently.
SampleResult sample(const VelocityOracle& oracle,
                    const ConstraintProvider& provider,
                    const KinematicMetric& metric, const SamplerConfig& config);

/// Convenience: sample a motion with a static constraint system.
SampleResult sample(const VelocityOracle& oracle, const ConstraintSystem& system,
                    const KinematicMetric& metric, const SamplerConfig& config);

}  // namespace projflow
