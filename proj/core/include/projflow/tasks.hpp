#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "projflow/flow_oracle.hpp"
#include "projflow/inpaint.hpp"
#include "projflow/linear_ops.hpp"
#include "projflow/motion.hpp"
#include "projflow/sampler.hpp"

namespace projflow {

enum class TaskKind { Trajectory, Inpaint, Lift, Loop, Relative };

std::string taskKindName(TaskKind kind);
TaskKind taskKindFromName(const std::string& name);

/// A fully specified spatial-control task over one motion shape.
/// Static tasks carry their stacked system; inpainting carries the
/// keyframes + trust parameters and builds its provider per run.
struct Task {
  TaskKind kind = TaskKind::Trajectory;
  SkeletonPtr skeleton;
  int frames = 0;

  std::optional<ConstraintSystem> system;    // static kinds
  std::optional<KeyframeSpec> keyframes;     // trajectory + inpaint targets
  TrustParams trust;                         // inpaint

  // lifting
  std::optional<Camera> camera;
  std::vector<std::pair<int, int>> lift_entries;  // (frame, joint) per 2-row block
  Eigen::VectorXd targets_2d;

  // relative offset
  int joint_a = -1;
  int joint_b = -1;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  std::vector<int> relative_frames;

  int joints() const { return skeleton ? skeleton->jointCount() : 0; }

  /// Hard rows used for residual reporting (inpainting reports against
  /// its keyframes; static kinds against their system).
  ConstraintSystem reportingSystem() const;
};

/// Keyframe placement for the density protocol: density = 1 puts the
/// single key mid-sequence; density >= 2 spaces keys evenly including
/// both endpoints.  With random placement, frames are drawn without
/// replacement from the seeded generator.  Throws ValidationError when
/// density is outside [1, N].
std::vector<int> densityFrames(int frames, int density, bool random_placement,
                               std::uint64_t seed);

/// Hard mask on all three coordinates of `joint` at the density-selected
/// frames; targets are taken from the reference motion.
Task buildTrajectoryTask(const MotionSeq& reference, int joint, int density,
                         bool random_placement = false, std::uint64_t seed = 0);

/// Inpainting task from explicit keyframes.
Task buildInpaintTask(SkeletonPtr skeleton, int frames, KeyframeSpec keyframes,
                      TrustParams trust = {});

/// 2D-to-3D lifting: orthographic rows for every joint at the keypose
/// frame plus the tracked joint at all other frames, all hard; 2D
/// targets come from projecting the reference motion.
Task buildLiftingTask(const Camera& camera, const MotionSeq& reference,
                      int keypose_frame, int traj_joint);

/// Start pose == end pose, all joints, hard.
Task buildLoopTask(SkeletonPtr skeleton, int frames);

/// x[n, joint_a] - x[n, joint_b] = offset on the selected frames
/// (all frames when empty), hard.
Task buildRelativeTask(SkeletonPtr skeleton, int frames, int joint_a,
                       int joint_b, const Eigen::Vector3d& offset,
                       std::vector<int> frames_sel = {});

struct EvalThresholds {
  double traj_threshold = 0.05;  // meters
  double loc_threshold = 0.01;   // meters
  double foot_height = 0.05;     // meters above ground
  double foot_slide = 0.0025;    // meters per frame
  int foot_joint = -1;           // -1: resolve "left_foot" by name, else 0
  int up_axis = 1;
};

struct EvalReport {
  double traj_err = 0.0;
  double loc_err = 0.0;
  double avg_err = 0.0;
  double mpjpe_2d = 0.0;
  double foot_skate_ratio = 0.0;
  double prior_nll = 0.0;
  double hard_residual = 0.0;  // recomputed from the task, not the sampler
  std::vector<double> residual_series;
  std::vector<double> correction_series;

  std::string toJson() const;
};

/// Deviation metrics against the task targets.  traj_err / loc_err are
/// the fractions of controlled keyframes deviating beyond their
/// thresholds; avg_err is the mean deviation; lifting deviations are
/// measured in the 2D image plane.  The hard residual is recomputed
/// from the task system.
EvalReport evaluate(const MotionSeq& output, const Task& task,
                    const EvalThresholds& thresholds = {},
                    const GaussianPrior* nll_prior = nullptr);

struct TaskRun {
  MotionSeq motion;
  SampleResult sample;
  EvalReport report;
};

/// End-to-end: build the provider, run the sampler, evaluate.
TaskRun runTask(const Task& task, const VelocityOracle& oracle,
                const KinematicMetric& metric, const SamplerConfig& config,
                const EvalThresholds& thresholds = {},
                const GaussianPrior* nll_prior = nullptr);

/// Tagged constraint descriptors (CLI "constraints" list) -> one stacked
/// system.  Descriptor types: "mask", "loop", "relative", "orthographic".
ConstraintSystem parseConstraintSpec(const std::string& json_text,
                                     SkeletonPtr skeleton, int frames);

}  // namespace projflow
