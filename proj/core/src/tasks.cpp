#include "projflow/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "projflow/errors.hpp"
#include "projflow/projector.hpp"
#include "projflow/rng.hpp"

namespace projflow {

using nlohmann::json;

std::string taskKindName(TaskKind kind) {
  switch (kind) {
    case TaskKind::Trajectory: return "trajectory";
    case TaskKind::Inpaint: return "inpaint";
    case TaskKind::Lift: return "lift";
    case TaskKind::Loop: return "loop";
    case TaskKind::Relative: return "relative";
  }
  return "unknown";
}

TaskKind taskKindFromName(const std::string& name) {
  if (name == "trajectory") return TaskKind::Trajectory;
  if (name == "inpaint") return TaskKind::Inpaint;
  if (name == "lift") return TaskKind::Lift;
  if (name == "loop") return TaskKind::Loop;
  if (name == "relative") return TaskKind::Relative;
  throw ValidationError("unknown task kind \"" + name + "\"");
}

ConstraintSystem Task::reportingSystem() const {
  if (kind == TaskKind::Inpaint) {
    return keyframes->hardSystem();
  }
  return *system;
}

std::vector<int> densityFrames(int frames, int density, bool random_placement,
                               std::uint64_t seed) {
  if (density < 1 || density > frames) {
    throw ValidationError("density " + std::to_string(density) +
                          " outside [1, N=" + std::to_string(frames) + "]");
  }
  std::vector<int> chosen;
  if (random_placement) {
    Rng rng(seed);
    std::set<int> picked;
    while (static_cast<int>(picked.size()) < density) {
      picked.insert(static_cast<int>(rng.below(frames)));
    }
    chosen.assign(picked.begin(), picked.end());
  } else if (density == 1) {
    chosen.push_back(frames / 2);
  } else {
    for (int i = 0; i < density; ++i) {
      chosen.push_back(static_cast<int>(
          std::lround(static_cast<double>(i) * (frames - 1) / (density - 1))));
    }
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  }
  return chosen;
}

Task buildTrajectoryTask(const MotionSeq& reference, int joint, int density,
                         bool random_placement, std::uint64_t seed) {
  if (joint < 0 || joint >= reference.joints()) {
    throw ValidationError("trajectory task: joint out of range");
  }
  const std::vector<int> frames_sel =
      densityFrames(reference.frames(), density, random_placement, seed);

  std::vector<KeyframeEntry> entries;
  entries.reserve(frames_sel.size());
  for (const int n : frames_sel) {
    entries.push_back({n,
                       joint,
                       {0, 1, 2},
                       {reference.at(n, joint, 0), reference.at(n, joint, 1),
                        reference.at(n, joint, 2)}});
  }
  KeyframeSpec spec(std::move(entries), reference.frames(), reference.joints());

  Task task;
  task.kind = TaskKind::Trajectory;
  task.skeleton = reference.skeleton();
  task.frames = reference.frames();
  task.system = spec.hardSystem();
  task.keyframes = std::move(spec);
  return task;
}

Task buildInpaintTask(SkeletonPtr skeleton, int frames, KeyframeSpec keyframes,
                      TrustParams trust) {
  trust.validate();
  Task task;
  task.kind = TaskKind::Inpaint;
  task.skeleton = std::move(skeleton);
  task.frames = frames;
  task.keyframes = std::move(keyframes);
  task.trust = trust;
  return task;
}

Task buildLiftingTask(const Camera& camera, const MotionSeq& reference,
                      int keypose_frame, int traj_joint) {
  const int frames = reference.frames();
  const int joints = reference.joints();
  if (keypose_frame < 0 || keypose_frame >= frames) {
    throw ValidationError("lifting task: keypose frame out of range");
  }
  if (traj_joint < 0 || traj_joint >= joints) {
    throw ValidationError("lifting task: trajectory joint out of range");
  }
  std::vector<std::pair<int, int>> entries;
  for (int j = 0; j < joints; ++j) entries.push_back({keypose_frame, j});
  for (int n = 0; n < frames; ++n) {
    if (n != keypose_frame) entries.push_back({n, traj_joint});
  }

  Eigen::VectorXd y2d(2 * static_cast<Eigen::Index>(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& [n, j] = entries[k];
    y2d.segment<2>(2 * static_cast<Eigen::Index>(k)) =
        camera.project(reference.position(n, j));
  }

  Task task;
  task.kind = TaskKind::Lift;
  task.skeleton = reference.skeleton();
  task.frames = frames;
  task.camera = camera;
  task.lift_entries = entries;
  task.targets_2d = y2d;
  task.system = ConstraintSystem(
      orthographicOp(camera, std::move(entries), frames, joints), y2d,
      Eigen::VectorXd::Zero(y2d.size()));
  return task;
}

Task buildLoopTask(SkeletonPtr skeleton, int frames) {
  const int joints = skeleton->jointCount();
  Task task;
  task.kind = TaskKind::Loop;
  task.skeleton = std::move(skeleton);
  task.frames = frames;
  const Eigen::Index m = 3 * static_cast<Eigen::Index>(joints);
  task.system = ConstraintSystem(loopClosureOp(frames, joints),
                                 Eigen::VectorXd::Zero(m),
                                 Eigen::VectorXd::Zero(m));
  return task;
}

Task buildRelativeTask(SkeletonPtr skeleton, int frames, int joint_a,
                       int joint_b, const Eigen::Vector3d& offset,
                       std::vector<int> frames_sel) {
  if (frames_sel.empty()) {
    frames_sel.resize(frames);
    for (int n = 0; n < frames; ++n) frames_sel[n] = n;
  }
  const int joints = skeleton->jointCount();
  const Eigen::Index m = 3 * static_cast<Eigen::Index>(frames_sel.size());
  Eigen::VectorXd target(m);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(frames_sel.size()); ++k) {
    target.segment<3>(3 * k) = offset;
  }

  Task task;
  task.kind = TaskKind::Relative;
  task.skeleton = std::move(skeleton);
  task.frames = frames;
  task.joint_a = joint_a;
  task.joint_b = joint_b;
  task.offset = offset;
  task.relative_frames = frames_sel;
  task.system = ConstraintSystem(
      relativeOffsetOp(joint_a, joint_b, std::move(frames_sel), frames, joints),
      std::move(target), Eigen::VectorXd::Zero(m));
  return task;
}

namespace {

double footSkateRatio(const MotionSeq& motion, const EvalThresholds& th) {
  if (motion.frames() < 2) return 0.0;
  int foot = th.foot_joint;
  if (foot < 0) {
    foot = motion.skeleton()->jointIndex("left_foot");
    if (foot < 0) foot = 0;
  }
  const int up = th.up_axis;
  int skating = 0;
  for (int n = 1; n < motion.frames(); ++n) {
    if (motion.at(n, foot, up) >= th.foot_height) continue;
    double slide2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      if (c == up) continue;
      const double d = motion.at(n, foot, c) - motion.at(n - 1, foot, c);
      slide2 += d * d;
    }
    if (std::sqrt(slide2) > th.foot_slide) ++skating;
  }
  return static_cast<double>(skating) / (motion.frames() - 1);
}

}  // namespace

EvalReport evaluate(const MotionSeq& output, const Task& task,
                    const EvalThresholds& thresholds,
                    const GaussianPrior* nll_prior) {
  if (output.frames() != task.frames || output.joints() != task.joints()) {
    throw DimensionError("evaluate: output shape does not match the task");
  }
  EvalReport report;

  std::vector<double> deviations;
  switch (task.kind) {
    case TaskKind::Trajectory:
    case TaskKind::Inpaint: {
      for (const auto& e : task.keyframes->entries()) {
        double dev2 = 0.0;
        for (std::size_t a = 0; a < e.axes.size(); ++a) {
          const double d = output.at(e.frame, e.joint, e.axes[a]) - e.values[a];
          dev2 += d * d;
        }
        deviations.push_back(std::sqrt(dev2));
      }
      break;
    }
    case TaskKind::Lift: {
      // image-plane deviations
      double total = 0.0;
      for (std::size_t k = 0; k < task.lift_entries.size(); ++k) {
        const auto& [n, j] = task.lift_entries[k];
        const Eigen::Vector2d proj = task.camera->project(output.position(n, j));
        const Eigen::Vector2d want =
            task.targets_2d.segment<2>(2 * static_cast<Eigen::Index>(k));
        const double dev = (proj - want).norm();
        deviations.push_back(dev);
        total += dev;
      }
      report.mpjpe_2d = total / static_cast<double>(task.lift_entries.size());
      break;
    }
    case TaskKind::Loop: {
      for (int j = 0; j < output.joints(); ++j) {
        deviations.push_back(
            (output.position(0, j) - output.position(output.frames() - 1, j))
                .norm());
      }
      break;
    }
    case TaskKind::Relative: {
      for (const int n : task.relative_frames) {
        deviations.push_back((output.position(n, task.joint_a) -
                              output.position(n, task.joint_b) - task.offset)
                                 .norm());
      }
      break;
    }
  }

  if (!deviations.empty()) {
    int beyond_traj = 0;
    int beyond_loc = 0;
    double total = 0.0;
    for (const double dev : deviations) {
      beyond_traj += dev > thresholds.traj_threshold;
      beyond_loc += dev > thresholds.loc_threshold;
      total += dev;
    }
    const double count = static_cast<double>(deviations.size());
    report.traj_err = beyond_traj / count;
    report.loc_err = beyond_loc / count;
    report.avg_err = total / count;
  }

  report.foot_skate_ratio = footSkateRatio(output, thresholds);
  if (nll_prior) {
    report.prior_nll = -nll_prior->logDensity(output.flat());
  }

  // recompute the hard residual from the task system; the sampler's own
  // series is reported but not trusted
  const ConstraintSystem system = task.reportingSystem();
  if (system.rows() > 0) {
    const Eigen::VectorXd r = system.op->apply(output.flat()) - system.target;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (system.sigma_diag[i] == 0.0) {
        worst = std::max(worst,
                         std::abs(r[i]) / (1.0 + std::abs(system.target[i])));
      }
    }
    report.hard_residual = worst;
  }
  return report;
}

std::string EvalReport::toJson() const {
  json j;
  j["traj_err"] = traj_err;
  j["loc_err"] = loc_err;
  j["avg_err"] = avg_err;
  j["mpjpe_2d"] = mpjpe_2d;
  j["foot_skate_ratio"] = foot_skate_ratio;
  j["prior_nll"] = prior_nll;
  j["hard_residual"] = hard_residual;
  j["residual_series"] = residual_series;
  j["correction_series"] = correction_series;
  return j.dump(2);
}

TaskRun runTask(const Task& task, const VelocityOracle& oracle,
                const KinematicMetric& metric, const SamplerConfig& config,
                const EvalThresholds& thresholds,
                const GaussianPrior* nll_prior) {
  SampleResult result;
  if (task.kind == TaskKind::Inpaint) {
    InpaintProvider provider(
        InpaintSchedule(*task.keyframes, metric, task.trust));
    result = sample(oracle, provider, metric, config);
  } else {
    result = sample(oracle, StaticProvider(*task.system), metric, config);
  }
  MotionSeq motion = devectorize(result.output, task.frames, task.skeleton);
  EvalReport report = evaluate(motion, task, thresholds, nll_prior);
  report.residual_series = result.hard_residuals;
  report.correction_series = result.correction_rnorms;
  return {std::move(motion), std::move(result), std::move(report)};
}

namespace {

KeyframeEntry keyframeEntryFromJson(const json& e) {
  KeyframeEntry entry;
  entry.frame = e.at("frame").get<int>();
  entry.joint = e.at("joint").get<int>();
  const std::string axes = e.value("axes", std::string("xyz"));
  for (const char c : axes) {
    switch (c) {
      case 'x': entry.axes.push_back(0); break;
      case 'y': entry.axes.push_back(1); break;
      case 'z': entry.axes.push_back(2); break;
      default:
        throw ValidationError("keyframe axes must be a subset of \"xyz\"");
    }
  }
  entry.values = e.at("value").get<std::vector<double>>();
  return entry;
}

}  // namespace

ConstraintSystem parseConstraintSpec(const std::string& json_text,
                                     SkeletonPtr skeleton, int frames) {
  json spec;
  try {
    spec = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("constraint spec: ") + e.what());
  }
  if (!spec.is_array()) {
    throw ParseError("constraint spec: expected a list of descriptors");
  }
  const int joints = skeleton->jointCount();

  std::vector<ConstraintSystem> parts;
  for (const auto& c : spec) {
    const std::string type = c.at("type").get<std::string>();
    const double sigma = c.value("sigma", 0.0);
    if (type == "mask") {
      std::vector<KeyframeEntry> entries;
      for (const auto& e : c.at("entries")) {
        entries.push_back(keyframeEntryFromJson(e));
      }
      KeyframeSpec kf(std::move(entries), frames, joints);
      ConstraintSystem base = kf.hardSystem();
      parts.emplace_back(base.op, base.target,
                         Eigen::VectorXd::Constant(base.rows(), sigma));
    } else if (type == "loop") {
      const Eigen::Index m = 3 * static_cast<Eigen::Index>(joints);
      parts.emplace_back(loopClosureOp(frames, joints), Eigen::VectorXd::Zero(m),
                         Eigen::VectorXd::Constant(m, sigma));
    } else if (type == "relative") {
      std::vector<int> sel = c.value("frames", std::vector<int>{});
      if (sel.empty()) {
        sel.resize(frames);
        for (int n = 0; n < frames; ++n) sel[n] = n;
      }
      const auto off = c.at("offset").get<std::vector<double>>();
      if (off.size() != 3) {
        throw ValidationError("relative descriptor: offset must have 3 entries");
      }
      const Eigen::Index m = 3 * static_cast<Eigen::Index>(sel.size());
      Eigen::VectorXd target(m);
      for (Eigen::Index k = 0; k < m / 3; ++k) {
        target.segment<3>(3 * k) = Eigen::Vector3d(off[0], off[1], off[2]);
      }
      parts.emplace_back(
          relativeOffsetOp(c.at("joint_a").get<int>(),
                           c.at("joint_b").get<int>(), std::move(sel), frames,
                           joints),
          std::move(target), Eigen::VectorXd::Constant(m, sigma));
    } else if (type == "orthographic") {
      const auto& cam = c.at("camera");
      const Camera camera = Camera::fromEuler(
          cam.value("yaw", 0.0), cam.value("pitch", 0.0), cam.value("roll", 0.0),
          cam.value("scale", 1.0));
      std::vector<std::pair<int, int>> entries;
      std::vector<double> targets;
      for (const auto& e : c.at("entries")) {
        entries.push_back({e.at("frame").get<int>(), e.at("joint").get<int>()});
        const auto uv = e.at("target").get<std::vector<double>>();
        if (uv.size() != 2) {
          throw ValidationError("orthographic descriptor: target must be "
                                "[u, v]");
        }
        targets.push_back(uv[0]);
        targets.push_back(uv[1]);
      }
      const Eigen::Index m = static_cast<Eigen::Index>(targets.size());
      parts.emplace_back(
          orthographicOp(camera, std::move(entries), frames, joints),
          Eigen::Map<const Eigen::VectorXd>(targets.data(), m),
          Eigen::VectorXd::Constant(m, sigma));
    } else {
      throw ValidationError("constraint spec: unknown type \"" + type + "\"");
    }
  }
  if (parts.empty()) {
    return ConstraintSystem::unconstrained(
        static_cast<Eigen::Index>(3) * frames * joints);
  }
  return parts.size() == 1 ? parts.front() : stackSystems(parts);
}

}  // namespace projflow
