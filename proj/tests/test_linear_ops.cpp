#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "projflow/errors.hpp"
#include "projflow/linear_ops.hpp"
#include "test_helpers.hpp"

using namespace projflow;

namespace {

void checkAdjointConsistency(const LinOp& op, Rng& rng, double tol = 1e-10) {
  const Eigen::VectorXd v = rng.normalVector(op.cols());
  const Eigen::VectorXd u = rng.normalVector(op.rows());
  const double lhs = op.apply(v).dot(u);
  const double rhs = v.dot(op.adjoint(u));
  const double scale = 1.0 + std::abs(lhs) + std::abs(rhs);
  CHECK(std::abs(lhs - rhs) <= tol * scale);
}

void checkLinearity(const LinOp& op, Rng& rng) {
  const Eigen::VectorXd u = rng.normalVector(op.cols());
  const Eigen::VectorXd v = rng.normalVector(op.cols());
  const double a = rng.normal(), b = rng.normal();
  const Eigen::VectorXd lhs = op.apply(a * u + b * v);
  const Eigen::VectorXd rhs = a * op.apply(u) + b * op.apply(v);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + rhs.norm()));
}

}  // namespace

TEST_CASE("mask op basics") {
  const Eigen::Index d = 6;
  Rng rng(1);
  const Eigen::VectorXd v = rng.normalVector(d);

  SUBCASE("select all behaves as identity") {
    auto op = maskOp(std::vector<Eigen::Index>{0, 1, 2, 3, 4, 5}, d);
    CHECK(op->apply(v) == v);
    CHECK(op->adjoint(v) == v);
  }
  SUBCASE("select none gives m = 0") {
    auto op = maskOp(std::vector<Eigen::Index>{}, d);
    CHECK(op->rows() == 0);
    CHECK(op->apply(v).size() == 0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(maskOp(std::vector<Eigen::Index>{6}, d), ValidationError);
    CHECK_THROWS_AS(maskOp(std::vector<Eigen::Index>{1, 1}, d), ValidationError);
  }
}

TEST_CASE("mask of pelvis xz over 5 frames matches the dense 0/1 matrix") {
  const int frames = 196, joints = 22;
  std::vector<VecIndex> picks;
  for (int n = 0; n < 5; ++n) {
    picks.push_back({0, 40 * n, 0});  // x
    picks.push_back({2, 40 * n, 0});  // z
  }
  auto op = maskOp(picks, frames, joints);
  CHECK(op->rows() == 10);

  Rng rng(2);
  const Eigen::VectorXd v = rng.normalVector(op->cols());
  const Eigen::VectorXd got = op->apply(v);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    CHECK(got[static_cast<Eigen::Index>(k)] ==
          v[picks[k].flat(frames, joints)]);
  }
  checkAdjointConsistency(*op, rng);
}

TEST_CASE("orthographic op") {
  SUBCASE("identity camera projects to (x, y)") {
    const Camera cam(1.0, Eigen::Matrix3d::Identity());
    auto op = orthographicOp(cam, {{0, 0}}, 1, 1);
    Eigen::VectorXd v(3);
    v << 3, 4, 5;
    const Eigen::VectorXd y = op->apply(v);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 4.0);
  }
  SUBCASE("scaled 90-degree z rotation") {
    Eigen::Matrix3d rot;
    rot << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // rotate +90 deg about z
    const Camera cam(2.0, rot);
    auto op = orthographicOp(cam, {{0, 0}}, 1, 1);
    Eigen::VectorXd v(3);
    v << 1, 0, 0;
    const Eigen::VectorXd y = op->apply(v);
    CHECK(y[0] == doctest::Approx(0.0));
    CHECK(y[1] == doctest::Approx(2.0));
  }
  SUBCASE("random cameras in the sweep range match dense materialization") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const Camera cam = Camera::fromEuler(rng.uniform(-45.0, 45.0),
                                           rng.uniform(0.0, 30.0), 0.0,
                                           rng.uniform(0.8, 1.2));
      const int frames = 4, joints = 3;
      std::vector<std::pair<int, int>> fj = {{0, 0}, {1, 2}, {3, 1}};
      auto op = orthographicOp(cam, fj, frames, joints);
      const Eigen::MatrixXd dense = materialize(*op);
      const Eigen::VectorXd v = rng.normalVector(op->cols());
      CHECK((op->apply(v) - dense * v).cwiseAbs().maxCoeff() < 1e-12);
      checkAdjointConsistency(*op, rng);

      // every row has Euclidean norm s
      for (Eigen::Index r = 0; r < dense.rows(); ++r) {
        CHECK(dense.row(r).norm() == doctest::Approx(cam.scale).epsilon(1e-10));
      }
    }
  }
  SUBCASE("invalid rotation is rejected") {
    Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
    bad(0, 1) = 1e-4;
    CHECK_THROWS_AS(Camera(1.0, bad), ValidationError);
    // reflection (det -1)
    Eigen::Matrix3d mirror = Eigen::Matrix3d::Identity();
    mirror(2, 2) = -1.0;
    CHECK_THROWS_AS(Camera(1.0, mirror), ValidationError);
  }
}

TEST_CASE("loop closure op") {
  const int frames = 5, joints = 3;
  auto op = loopClosureOp(frames, joints);
  CHECK(op->rows() == 9);

  SUBCASE("identical first and last frames give zero") {
    Rng rng(4);
    Eigen::VectorXd v = rng.normalVector(op->cols());
    for (int c = 0; c < 3; ++c) {
      v.segment((static_cast<Eigen::Index>(c) * frames + frames - 1) * joints,
                joints) =
          v.segment(static_cast<Eigen::Index>(c) * frames * joints, joints);
    }
    CHECK(op->apply(v).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("unit x offset gives J copies of (1,0,0)") {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(op->cols());
    for (int j = 0; j < joints; ++j) {
      // last frame = first + (1, 0, 0): x difference of -? first - last = -1
      v[(static_cast<Eigen::Index>(0) * frames + frames - 1) * joints + j] = 1.0;
    }
    const Eigen::VectorXd y = op->apply(v);
    for (int j = 0; j < joints; ++j) {
      CHECK(y[3 * j + 0] == -1.0);
      CHECK(y[3 * j + 1] == 0.0);
      CHECK(y[3 * j + 2] == 0.0);
    }
  }
  SUBCASE("matches dense difference matrix") {
    Rng rng(5);
    const Eigen::MatrixXd dense = materialize(*op);
    const Eigen::VectorXd v = rng.normalVector(op->cols());
    CHECK((op->apply(v) - dense * v).cwiseAbs().maxCoeff() < 1e-12);
    checkAdjointConsistency(*op, rng);
  }
  SUBCASE("single frame is rejected") {
    CHECK_THROWS_AS(loopClosureOp(1, joints), ValidationError);
  }
}

TEST_CASE("relative offset op") {
  const int frames = 4, joints = 3;
  auto op = relativeOffsetOp(0, 2, {0, 2}, frames, joints);
  CHECK(op->rows() == 6);

  SUBCASE("joints at the target offset give that offset back") {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(op->cols());
    const Eigen::Vector3d d(0.3, -0.1, 0.7);
    for (int n = 0; n < frames; ++n) {
      for (int c = 0; c < 3; ++c) {
        v[(static_cast<Eigen::Index>(c) * frames + n) * joints + 0] = d[c];
        v[(static_cast<Eigen::Index>(c) * frames + n) * joints + 2] = 0.0;
      }
    }
    const Eigen::VectorXd y = op->apply(v);
    for (int k = 0; k < 2; ++k) {
      for (int c = 0; c < 3; ++c) {
        CHECK(y[3 * k + c] == doctest::Approx(d[c]));
      }
    }
  }
  SUBCASE("matches dense and is adjoint-consistent") {
    Rng rng(6);
    const Eigen::MatrixXd dense = materialize(*op);
    const Eigen::VectorXd v = rng.normalVector(op->cols());
    CHECK((op->apply(v) - dense * v).cwiseAbs().maxCoeff() < 1e-12);
    checkAdjointConsistency(*op, rng);
  }
  SUBCASE("equal joints are rejected") {
    CHECK_THROWS_AS(relativeOffsetOp(1, 1, {0}, frames, joints),
                    ValidationError);
  }
}

TEST_CASE("stacking") {
  const int frames = 3, joints = 2;
  const Eigen::Index d = 3 * frames * joints;
  auto mask = maskOp(std::vector<Eigen::Index>{0, 5}, d);
  auto loop = loopClosureOp(frames, joints);

  SUBCASE("stack of one equals that system") {
    ConstraintSystem sys(mask, Eigen::VectorXd::Ones(2),
                         Eigen::VectorXd::Zero(2));
    const ConstraintSystem stacked = stackSystems({sys});
    Rng rng(7);
    const Eigen::VectorXd v = rng.normalVector(d);
    CHECK(stacked.op->apply(v) == sys.op->apply(v));
  }
  SUBCASE("row counts add and application concatenates") {
    auto stacked = stackOps({mask, loop});
    CHECK(stacked->rows() == mask->rows() + loop->rows());
    Rng rng(8);
    const Eigen::VectorXd v = rng.normalVector(d);
    const Eigen::VectorXd y = stacked->apply(v);
    CHECK(y.head(2) == mask->apply(v));
    CHECK(y.tail(loop->rows()) == loop->apply(v));
    checkAdjointConsistency(*stacked, rng);
    checkLinearity(*stacked, rng);
  }
  SUBCASE("dense vertical concatenation") {
    auto stacked = stackOps({mask, loop});
    const Eigen::MatrixXd dense = materialize(*stacked);
    Eigen::MatrixXd expect(stacked->rows(), d);
    expect << materialize(*mask), materialize(*loop);
    CHECK((dense - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dimension mismatch is rejected") {
    auto other = maskOp(std::vector<Eigen::Index>{0}, d + 3);
    CHECK_THROWS_AS(stackOps({mask, other}), DimensionError);
  }
}

TEST_CASE("adjoint consistency and linearity across all kinds") {
  Rng rng(9);
  const int frames = 6, joints = 4;
  for (int trial = 0; trial < 12; ++trial) {
    const ConstraintSystem sys =
        testing::randomStructuredSystem(rng, frames, joints, 9, 0.1);
    checkAdjointConsistency(*sys.op, rng);
    checkLinearity(*sys.op, rng);
  }
}

TEST_CASE("materialize respects the entry cap") {
  auto op = maskOp(std::vector<Eigen::Index>{0, 1}, 100);
  CHECK_THROWS_AS(materialize(*op, 150), ValidationError);
  const Eigen::MatrixXd dense = materialize(*op);
  CHECK(dense.rows() == 2);
  CHECK(dense.cols() == 100);
  CHECK(dense(0, 0) == 1.0);
  CHECK(dense(1, 1) == 1.0);
  CHECK(dense.sum() == 2.0);
}

TEST_CASE("constraint system validation") {
  const Eigen::Index d = 6;
  auto op = maskOp(std::vector<Eigen::Index>{0, 1}, d);
  CHECK_THROWS_AS(ConstraintSystem(op, Eigen::VectorXd::Zero(3),
                                   Eigen::VectorXd::Zero(3)),
                  DimensionError);
  CHECK_THROWS_AS(ConstraintSystem(op, Eigen::VectorXd::Zero(2),
                                   Eigen::VectorXd::Constant(2, -1.0)),
                  ValidationError);
  const ConstraintSystem sys(op, Eigen::VectorXd::Zero(2),
                             (Eigen::VectorXd(2) << 0.0, 0.5).finished());
  CHECK(sys.hardRowCount() == 1);
  CHECK(ConstraintSystem::unconstrained(d).rows() == 0);
}
