#pragma once

#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "projflow/motion.hpp"

namespace projflow {

enum class OpKind {
  CoordinateMask,
  OrthographicProject,
  FrameDifference,
  JointDifference,
  RowStack,
};

/// Structured linear observation operator A : R^d -> R^m with an exact
/// adjoint.  Implementations are immutable and applied matrix-free.
class LinOp {
 public:
  virtual ~LinOp() = default;

  OpKind kind() const { return kind_; }
  Eigen::Index rows() const { return rows_; }  // m
  Eigen::Index cols() const { return cols_; }  // d

  /// A v.  Throws DimensionError on a length mismatch.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  /// A^T u.
  Eigen::VectorXd adjoint(const Eigen::VectorXd& u) const;

  /// Flat coordinate indices when this operator is a pure coordinate
  /// mask (enables the block-diagonal projection fast path), else null.
  virtual const std::vector<Eigen::Index>* maskIndices() const {
    return nullptr;
  }

 protected:
  LinOp(OpKind kind, Eigen::Index rows, Eigen::Index cols);

  virtual void applyImpl(const Eigen::VectorXd& v, Eigen::VectorXd& out) const = 0;
  virtual void adjointImpl(const Eigen::VectorXd& u, Eigen::VectorXd& out) const = 0;

 private:
  OpKind kind_;
  Eigen::Index rows_;
  Eigen::Index cols_;
};

using LinOpPtr = std::shared_ptr<const LinOp>;

/// Orthographic camera: y = scale * P * rotation * x with P = [e_x e_y]^T.
/// Throws ValidationError when rotation is not in SO(3) to 1e-8 or the
/// scale is not positive.
struct Camera {
  double scale;
  Eigen::Matrix3d rotation;

  Camera(double scale, const Eigen::Matrix3d& rotation);

  /// Angles in degrees, composed yaw (world y) * pitch (world x) *
  /// roll (world z).
  static Camera fromEuler(double yaw_deg, double pitch_deg, double roll_deg,
                          double scale);

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return scale * (rotation * p).head<2>();
  }
};

/// Selects the given flat coordinates, in the given order.
/// Throws ValidationError on out-of-range or duplicate indices.
LinOpPtr maskOp(std::vector<Eigen::Index> indices, Eigen::Index d);

/// Mask over (axis, frame, joint) triples; rows ordered by the given
/// sequence.
LinOpPtr maskOp(const std::vector<VecIndex>& indices, int frames, int joints);

/// 2 rows (u, v) per selected (frame, joint) pair, ordered as given.
LinOpPtr orthographicOp(const Camera& camera,
                        std::vector<std::pair<int, int>> frame_joints,
                        int frames, int joints);

/// 3J rows computing (first frame - last frame), ordered joint-major,
/// axis-minor.  Requires N >= 2.
LinOpPtr loopClosureOp(int frames, int joints);

/// 3 rows per selected frame computing x[n, joint_a] - x[n, joint_b],
/// frame-major, axis-minor.  Requires joint_a != joint_b.
LinOpPtr relativeOffsetOp(int joint_a, int joint_b, std::vector<int> frames_sel,
                          int frames, int joints);

/// Vertical concatenation; parts must share d.
LinOpPtr stackOps(std::vector<LinOpPtr> parts);

/// Dense m x d materialization (columns are A e_k); test and diagnostic
/// oracle.  Throws ValidationError when m*d exceeds the entry cap.
Eigen::MatrixXd materialize(const LinOp& op,
                            Eigen::Index max_entries = 10'000'000);

/// One stacked measurement model (A, y, Sigma).  sigma_diag holds the
/// diagonal of Sigma (variances); rows with exactly zero variance are
/// hard equality constraints.
struct ConstraintSystem {
  LinOpPtr op;
  Eigen::VectorXd target;      // y
  Eigen::VectorXd sigma_diag;  // variances, >= 0

  ConstraintSystem(LinOpPtr op, Eigen::VectorXd target,
                   Eigen::VectorXd sigma_diag);

  Eigen::Index rows() const { return op->rows(); }
  Eigen::Index dim() const { return op->cols(); }

  Eigen::Index hardRowCount() const;

  /// Empty system (m = 0); projection through it is a no-op.
  static ConstraintSystem unconstrained(Eigen::Index d);
};

/// Concatenates rows, targets, and variances in order.
/// Throws DimensionError when the parts disagree on d.
ConstraintSystem stackSystems(const std::vector<ConstraintSystem>& systems);

}  // namespace projflow
