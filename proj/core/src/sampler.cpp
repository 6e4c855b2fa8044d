#include "projflow/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "projflow/errors.hpp"
#include "projflow/rng.hpp"

namespace projflow {

double etaScheduleEval(const std::string& name, double t, double dt) {
  if (t < 0.0 || t >= 1.0) {
    throw ValidationError("eta schedule: t outside [0, 1)");
  }
  if (name == "flowdps") return std::clamp(t + dt, 0.0, 1.0);
  if (name == "zero") return 0.0;
  if (name == "one") return 1.0;
  throw ValidationError("eta schedule: unknown name \"" + name + "\"");
}

CalibratedSoftProvider::CalibratedSoftProvider(ConstraintSystem base,
                                               double prior_variance)
    : base_(std::move(base)), prior_variance_(prior_variance) {
  if (!(prior_variance_ > 0.0)) {
    throw ValidationError("calibrated provider: prior variance must be "
                          "positive");
  }
  if ((base_.sigma_diag.array() <= 0.0).any()) {
    throw ValidationError("calibrated provider: all rows must be soft");
  }
}

ConstraintSystem CalibratedSoftProvider::system(double t,
                                                const Eigen::VectorXd&) const {
  const double c = prior_variance_;
  const double scale =
      c * (1.0 - t) * (1.0 - t) / (t * t * c + (1.0 - t) * (1.0 - t));
  return ConstraintSystem(base_.op, base_.target, base_.sigma_diag / scale);
}

namespace {

[[noreturn]] void rethrowAnnotated(const std::exception& e, int step, double t) {
  const std::string note = "sampling step " + std::to_string(step) + " (t=" +
                           std::to_string(t) + "): " + e.what();
  if (dynamic_cast<const DimensionError*>(&e)) throw DimensionError(note);
  if (dynamic_cast<const RankDeficientError*>(&e)) throw RankDeficientError(note);
  if (dynamic_cast<const InfeasibleError*>(&e)) throw InfeasibleError(note);
  if (dynamic_cast<const ValidationError*>(&e)) throw ValidationError(note);
  throw NumericError(note);
}

}  // namespace

SampleResult sample(const VelocityOracle& oracle,
                    const ConstraintProvider& provider,
                    const KinematicMetric& metric,
                    const SamplerConfig& config) {
  if (config.steps < 1) {
    throw ValidationError("sampler: steps must be >= 1");
  }
  if (oracle.dim() != metric.dim()) {
    throw DimensionError("sampler: oracle dimension " +
                         std::to_string(oracle.dim()) +
                         " does not match metric dimension " +
                         std::to_string(metric.dim()));
  }
  // validate the schedule name up front
  etaScheduleEval(config.eta_schedule, 0.0, 1.0 / config.steps);

  const Eigen::Index d = oracle.dim();
  const int steps = config.steps;
  const double dt = 1.0 / steps;

  Rng rng(config.rng_seed);
  Eigen::VectorXd x = rng.normalVector(d);

  ProjectionWorkspace workspace(metric);
  const bool static_system = provider.timeInvariant();
  if (static_system) {
    try {
      workspace.factorize(provider.system(0.0, x));
    } catch (const std::exception& e) {
      rethrowAnnotated(e, 0, 0.0);
    }
  }

  SampleResult result;
  result.hard_residuals.reserve(steps);
  result.correction_rnorms.reserve(steps);
  if (config.record_trajectory) result.traces.reserve(steps);

  Eigen::VectorXd x1_star;
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    try {
      const Eigen::VectorXd x1_hat = x + (1.0 - t) * oracle.velocity(x, t);

      if (!static_system) {
        workspace.factorize(provider.system(t, x1_hat));
      }
      Projection proj = workspace.project(x1_hat);
      x1_star = std::move(proj.x1_star);

      const double residual = workspace.hardResidual(x1_star);
      const double rnorm = metric.rNorm(proj.delta);
      result.hard_residuals.push_back(residual);
      result.correction_rnorms.push_back(rnorm);
      if (config.record_trajectory) {
        result.traces.push_back({t, residual, rnorm, x, x1_hat, x1_star});
      }

      // alpha = (i+1)/T is exactly 1.0 on the last step, so the final
      // state equals the last corrected endpoint
      const double alpha = static_cast<double>(i + 1) / steps;
      const double sigma = 1.0 - alpha;
      const double eta = etaScheduleEval(config.eta_schedule, t, dt);

      Eigen::VectorXd x0_est = (x - t * x1_star) / (1.0 - t);
      if (eta > 0.0) {
        x0_est = std::sqrt(1.0 - eta) * x0_est +
                 std::sqrt(eta) * rng.normalVector(d);
      }
      x = alpha * x1_star + sigma * x0_est;
    } catch (const std::exception& e) {
      rethrowAnnotated(e, i, t);
    }
  }

  result.output = std::move(x1_star);
  return result;
}

SampleResult sample(const VelocityOracle& oracle, const ConstraintSystem& system,
                    const KinematicMetric& metric, const SamplerConfig& config) {
  return sample(oracle, StaticProvider(system), metric, config);
}

}  // namespace projflow
