#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "projflow/kinematic_metric.hpp"
#include "projflow/linear_ops.hpp"
#include "projflow/motion.hpp"
#include "projflow/sampler.hpp"

namespace projflow {

/// One user keyframe: values for a subset of axes of one joint at one
/// frame.  These are the hard observations of the inpainting problem.
struct KeyframeEntry {
  int frame = 0;
  int joint = 0;
  std::vector<int> axes;       // subset of {0,1,2}
  std::vector<double> values;  // aligned with axes
};

/// Validated keyframe set bound to a motion shape.  Derives the hard
/// observation index set and value vector, both ordered by
/// (frame, joint, axis).
class KeyframeSpec {
 public:
  KeyframeSpec(std::vector<KeyframeEntry> entries, int frames, int joints);

  int frames() const { return frames_; }
  int joints() const { return joints_; }
  const std::vector<KeyframeEntry>& entries() const { return entries_; }

  const std::vector<VecIndex>& observedIndices() const { return indices_; }
  const Eigen::VectorXd& observedValues() const { return values_; }

  /// Hard rows as a mask system (all zero variance).
  ConstraintSystem hardSystem() const;

 private:
  std::vector<KeyframeEntry> entries_;
  int frames_;
  int joints_;
  std::vector<VecIndex> indices_;
  Eigen::VectorXd values_;
};

enum class PseudoFlag : std::uint8_t {
  Absent,        // no observation of this (joint, axis) anywhere
  Interpolated,  // between two observed frames
  Extrapolated,  // outside the observed span; copies the nearest frame
  Hard,          // the observation itself (never a pseudo row)
};

/// Per-joint linear interpolation / nearest-copy extrapolation of the
/// hard observations, plus the per-(frame, joint) temporal distance to
/// the nearest hard observation of the same joint (any axis).
class PseudoObsTable {
 public:
  PseudoObsTable(const KeyframeSpec& spec);

  int frames() const { return frames_; }
  int joints() const { return joints_; }

  double value(int frame, int joint, int axis) const {
    return values_[cell(frame, joint, axis)];
  }
  PseudoFlag flag(int frame, int joint, int axis) const {
    return flags_[cell(frame, joint, axis)];
  }

  /// Temporal distance (frames) to the nearest hard observation of this
  /// joint; a large sentinel when the joint has none.
  int distance(int frame, int joint) const {
    return distances_[static_cast<std::size_t>(frame) * joints_ + joint];
  }

 private:
  std::size_t cell(int frame, int joint, int axis) const {
    return (static_cast<std::size_t>(frame) * joints_ + joint) * 3 + axis;
  }

  int frames_;
  int joints_;
  std::vector<double> values_;
  std::vector<PseudoFlag> flags_;
  std::vector<int> distances_;
};

PseudoObsTable buildPseudoObs(const KeyframeSpec& spec);

/// Inpainting knobs.  Defaults follow the motion-inpainting
/// hyperparameter set: tau_min 0.1, c0 3.0, lambda_s 1.0, p 2.0,
/// trust clipped to [0.02, 1.0], radius shrinking from 10 to 3 frames.
struct TrustParams {
  double tau_min = 0.1;
  double c0 = 3.0;
  double lambda_s = 1.0;
  double p = 2.0;
  double pi_min = 0.02;
  double pi_max = 1.0;
  double l_min = 3.0;
  double l_max = 10.0;
  /// When set, the frame budget is clipped before the per-joint split
  /// instead of clipping the per-joint scores afterwards.
  bool clip_frame_budget_first = false;

  void validate() const;
};

/// Shrinking activation radius l(t) = (1-t) l_max + t l_min.
double maskingRadius(double t, const TrustParams& params);

/// Frame-wise curvature s_n = || x_{n+1} - 2 x_n + x_{n-1} ||_R of the
/// predicted endpoint, measured with the per-frame joint-block metric
/// summed over axes.  Boundary frames copy the nearest interior value;
/// fewer than 3 frames gives all zeros.
Eigen::VectorXd curvature(const Eigen::VectorXd& x1_hat_flat,
                          const KinematicMetric& metric);

/// Global time decay tau(t) = tau_min + (1 - tau_min)(1 - t).
double timeDecay(double t, const TrustParams& params);

/// sigma^2 = r (1/pi - 1); pi = 1 gives an exact (zero variance) row.
/// Throws ValidationError for pi <= 0.
double varianceFromTrust(double pi, double r);

/// Time-varying constraint builder for motion inpainting: hard keyframe
/// rows plus pseudo-observation rows that activate within the shrinking
/// radius and carry adaptive variances from the trust model.
class InpaintSchedule {
 public:
  InpaintSchedule(KeyframeSpec spec, const KinematicMetric& metric,
                  TrustParams params = {});

  const KeyframeSpec& keyframes() const { return spec_; }
  const PseudoObsTable& table() const { return table_; }
  const TrustParams& params() const { return params_; }

  /// Active pseudo cells at time t, ordered by (frame, joint, axis).
  /// Activation depends only on static distances and the radius, so the
  /// active set shrinks monotonically in t.
  std::vector<VecIndex> activeSet(double t) const;

  /// Per-active-element trust scores, aligned with activeSet(t); all
  /// axes of a joint share the joint's score.
  Eigen::VectorXd trustScores(double t, const Eigen::VectorXd& x1_hat) const;

  /// Stacked system: hard rows first (zero variance), then active
  /// pseudo rows with variances from the trust scores.
  ConstraintSystem systemAt(double t, const Eigen::VectorXd& x1_hat) const;

 private:
  KeyframeSpec spec_;
  PseudoObsTable table_;
  const KinematicMetric* metric_;
  TrustParams params_;
  Eigen::VectorXd joint_weights_;  // q_j
};

/// ConstraintProvider adapter for the sampler.
class InpaintProvider final : public ConstraintProvider {
 public:
  explicit InpaintProvider(InpaintSchedule schedule)
      : schedule_(std::move(schedule)) {}

  const InpaintSchedule& schedule() const { return schedule_; }

  ConstraintSystem system(double t, const Eigen::VectorXd& x1_hat) const override {
    return schedule_.systemAt(t, x1_hat);
  }

 private:
  InpaintSchedule schedule_;
};

}  // namespace projflow
