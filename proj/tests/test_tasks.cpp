#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "projflow/errors.hpp"
#include "projflow/tasks.hpp"
#include "test_helpers.hpp"

using namespace projflow;

namespace {

struct Fixture {
  SkeletonPtr skeleton = testing::humanml22();
  int frames = 24;
  KinematicMetric metric{*skeleton, 24, 10.0, 1.0};
  std::vector<MotionSeq> corpus = synthCorpus(skeleton, 24, 60, 3);
  GaussianPrior prior = fitGaussianPrior(corpus, 6);
  GaussianVelocityOracle oracle{prior};
};

}  // namespace

TEST_CASE("density frame placement") {
  CHECK(densityFrames(196, 196, false, 0).size() == 196);
  CHECK(densityFrames(64, 1, false, 0) == std::vector<int>{32});
  CHECK(densityFrames(64, 2, false, 0) == std::vector<int>{0, 63});
  const auto five = densityFrames(64, 5, false, 0);
  CHECK(five.size() == 5);
  CHECK(five.front() == 0);
  CHECK(five.back() == 63);
  CHECK_THROWS_AS(densityFrames(64, 65, false, 0), ValidationError);
  CHECK_THROWS_AS(densityFrames(64, 0, false, 0), ValidationError);

  const auto random_a = densityFrames(64, 7, true, 9);
  const auto random_b = densityFrames(64, 7, true, 9);
  CHECK(random_a == random_b);  // seeded
  CHECK(random_a.size() == 7);
}

TEST_CASE("trajectory task construction and run") {
  Fixture f;
  const Task task = buildTrajectoryTask(f.corpus[0], /*joint=*/0, /*density=*/5);
  CHECK(task.kind == TaskKind::Trajectory);
  CHECK(task.system->rows() == 15);
  CHECK(task.system->hardRowCount() == 15);

  SamplerConfig config;
  config.steps = 50;
  config.rng_seed = 1;
  const TaskRun run = runTask(task, f.oracle, f.metric, config, {}, &f.prior);
  CHECK(run.report.hard_residual <= 1e-8);
  CHECK(run.report.traj_err == 0.0);
  CHECK(run.report.loc_err == 0.0);
  CHECK(run.report.avg_err <= 1e-8);
  CHECK(std::isfinite(run.report.prior_nll));
}

TEST_CASE("lifting task: feasibility and reprojection") {
  Fixture f;
  const Camera camera = Camera::fromEuler(25.0, 12.0, 0.0, 1.1);
  const Task task = buildLiftingTask(camera, f.corpus[1], /*keypose=*/0,
                                     /*traj_joint=*/20);

  SUBCASE("the reference motion is feasible") {
    const Eigen::VectorXd residual =
        task.system->op->apply(f.corpus[1].flat()) - task.system->target;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("system rows have norm s") {
    const Eigen::MatrixXd dense = materialize(*task.system->op);
    for (Eigen::Index r = 0; r < std::min<Eigen::Index>(dense.rows(), 12); ++r) {
      CHECK(dense.row(r).norm() == doctest::Approx(1.1).epsilon(1e-10));
    }
  }
  SUBCASE("sampled output reprojects onto the 2D targets") {
    SamplerConfig config;
    config.steps = 50;
    config.rng_seed = 2;
    const TaskRun run = runTask(task, f.oracle, f.metric, config);
    CHECK(run.report.mpjpe_2d <= 1e-8);
    CHECK(run.report.hard_residual <= 1e-8);
  }
}

TEST_CASE("loop and relative tasks close exactly") {
  Fixture f;
  SamplerConfig config;
  config.steps = 50;
  config.rng_seed = 3;

  SUBCASE("loop closure") {
    const Task task = buildLoopTask(f.skeleton, f.frames);
    const TaskRun run = runTask(task, f.oracle, f.metric, config);
    CHECK(run.report.hard_residual <= 1e-8);
    for (int j = 0; j < 22; ++j) {
      const double gap =
          (run.motion.position(0, j) - run.motion.position(f.frames - 1, j))
              .norm();
      CHECK(gap <= 1e-7);
    }
  }
  SUBCASE("relative offset") {
    const Eigen::Vector3d offset(0.0, 0.0, 0.35);
    const Task task =
        buildRelativeTask(f.skeleton, f.frames, 20, 21, offset, {});
    const TaskRun run = runTask(task, f.oracle, f.metric, config);
    CHECK(run.report.hard_residual <= 1e-8);
    for (int n = 0; n < f.frames; ++n) {
      const Eigen::Vector3d gap = run.motion.position(n, 20) -
                                  run.motion.position(n, 21) - offset;
      CHECK(gap.norm() <= 1e-7);
    }
  }
  SUBCASE("loop + trajectory stack is accepted") {
    const Task traj = buildTrajectoryTask(f.corpus[0], 0, 2);
    const Task loop = buildLoopTask(f.skeleton, f.frames);
    CHECK_NOTHROW(stackSystems({*traj.system, *loop.system}));
  }
}

TEST_CASE("evaluate thresholds") {
  Fixture f;
  const Task task = buildTrajectoryTask(f.corpus[0], 0, 5);

  SUBCASE("exact output scores zeros") {
    const EvalReport report = evaluate(f.corpus[0], task);
    CHECK(report.traj_err == 0.0);
    CHECK(report.loc_err == 0.0);
    CHECK(report.avg_err == 0.0);
    CHECK(report.hard_residual == 0.0);
  }
  SUBCASE("a 0.02 m offset trips loc but not traj") {
    MotionSeq shifted = f.corpus[0];
    for (const auto& e : task.keyframes->entries()) {
      shifted.at(e.frame, e.joint, 0) += 0.02;
    }
    const EvalReport report = evaluate(shifted, task);
    CHECK(report.loc_err == 1.0);   // all beyond 0.01
    CHECK(report.traj_err == 0.0);  // none beyond 0.05
    CHECK(report.avg_err == doctest::Approx(0.02).epsilon(1e-9));
  }
  SUBCASE("stationary grounded foot does not skate") {
    MotionSeq still(f.skeleton, f.frames);
    // grounded (below height threshold) but not moving
    const EvalReport report = evaluate(still, buildLoopTask(f.skeleton, f.frames));
    CHECK(report.foot_skate_ratio == 0.0);
  }
  SUBCASE("sliding grounded foot skates") {
    MotionSeq slide(f.skeleton, f.frames);
    const int foot = f.skeleton->jointIndex("left_foot");
    for (int n = 0; n < f.frames; ++n) {
      slide.at(n, foot, 0) = 0.01 * n;  // 1 cm per frame, at height 0
    }
    const EvalReport report = evaluate(slide, buildLoopTask(f.skeleton, f.frames));
    CHECK(report.foot_skate_ratio == 1.0);
  }
}

TEST_CASE("report residuals are recomputed independently") {
  Fixture f;
  const Task task = buildTrajectoryTask(f.corpus[2], 0, 2);
  SamplerConfig config;
  config.steps = 40;
  config.rng_seed = 4;
  const TaskRun run = runTask(task, f.oracle, f.metric, config);

  const Eigen::VectorXd recomputed =
      task.system->op->apply(run.motion.flat()) - task.system->target;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < recomputed.size(); ++i) {
    worst = std::max(worst, std::abs(recomputed[i]) /
                                (1.0 + std::abs(task.system->target[i])));
  }
  CHECK(run.report.hard_residual == doctest::Approx(worst).epsilon(1e-12));
}

TEST_CASE("library-level runs are reproducible") {
  Fixture f;
  const Task task = buildTrajectoryTask(f.corpus[0], 0, 5);
  SamplerConfig config;
  config.steps = 30;
  config.rng_seed = 9;
  const TaskRun a = runTask(task, f.oracle, f.metric, config);
  const TaskRun b = runTask(task, f.oracle, f.metric, config);
  CHECK(a.motion.flat() == b.motion.flat());  // bitwise
}

TEST_CASE("constraint spec parsing") {
  const auto skeleton = testing::chainSkeleton(3);
  const int frames = 4;

  SUBCASE("mask + loop stack") {
    const std::string spec = R"([
      {"type": "mask",
       "entries": [{"frame": 0, "joint": 1, "axes": "xz", "value": [0.5, -0.5]}]},
      {"type": "loop"}
    ])";
    const ConstraintSystem sys = parseConstraintSpec(spec, skeleton, frames);
    CHECK(sys.rows() == 2 + 9);
    CHECK(sys.hardRowCount() == sys.rows());
  }
  SUBCASE("relative with sigma") {
    const std::string spec = R"([
      {"type": "relative", "joint_a": 0, "joint_b": 2,
       "offset": [0.1, 0.0, 0.0], "frames": [1, 3], "sigma": 0.25}
    ])";
    const ConstraintSystem sys = parseConstraintSpec(spec, skeleton, frames);
    CHECK(sys.rows() == 6);
    CHECK((sys.sigma_diag.array() == 0.25).all());
    CHECK(sys.target[0] == 0.1);
  }
  SUBCASE("orthographic") {
    const std::string spec = R"([
      {"type": "orthographic",
       "camera": {"yaw": 10, "pitch": 5, "roll": 0, "scale": 1.0},
       "entries": [{"frame": 2, "joint": 1, "target": [0.3, 0.4]}]}
    ])";
    const ConstraintSystem sys = parseConstraintSpec(spec, skeleton, frames);
    CHECK(sys.rows() == 2);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parseConstraintSpec("not json", skeleton, frames),
                    ParseError);
    CHECK_THROWS_AS(parseConstraintSpec(R"([{"type": "bogus"}])", skeleton,
                                        frames),
                    ValidationError);
  }
}
