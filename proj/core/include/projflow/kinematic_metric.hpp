#pragma once

#include <Eigen/Core>

#include "projflow/skeleton.hpp"

namespace projflow {

/// Kinematics-aware metric over vectorized motions,
///
///   R = w_kin (I_3 (x) I_N (x) L) + lambda I_d,    d = 3*J*N,
///
/// with L the unnormalized graph Laplacian of the skeleton.  R is block
/// diagonal in the canonical flat order: every (axis, frame) slice of J
/// entries sees the same J x J block R_J = w_kin L + lambda I_J.  All
/// operations therefore reduce to the one-time eigendecomposition
/// L = U diag(evals) U^T; nothing of size d x d is ever formed.
///
/// Immutable after construction; concurrent reads are safe.
class KinematicMetric {
 public:
  /// Throws ValidationError for lambda <= 0 or w_kin < 0.  The skeleton
  /// is connected by construction, so L has a single zero eigenvalue and
  /// R is symmetric positive definite with smallest eigenvalue lambda.
  KinematicMetric(const Skeleton& skeleton, int frames, double w_kin,
                  double lambda);

  int frames() const { return frames_; }
  int joints() const { return joints_; }
  double wKin() const { return w_kin_; }
  double lambda() const { return lambda_; }
  Eigen::Index dim() const {
    return static_cast<Eigen::Index>(3) * frames_ * joints_;
  }

  /// R v, computed blockwise in O(d*J).
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  /// R^{-1} v via U diag(1/(w_kin*eval + lambda)) U^T per block.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;

  /// Column-wise solve for a d x m right-hand side.
  Eigen::MatrixXd solveMatrix(const Eigen::MatrixXd& rhs) const;

  /// sqrt(v^T R v); zero iff v = 0.
  double rNorm(const Eigen::VectorXd& v) const;

  /// (w_kin L + lambda I_J) u for a single J-vector.
  Eigen::VectorXd applyJointBlock(const Eigen::VectorXd& u) const;

  /// sqrt(u^T (w_kin L + lambda I_J) u) for a single J-vector.
  double jointBlockNorm(const Eigen::VectorXd& u) const;

  /// R_J^{-1} = (w_kin L + lambda I_J)^{-1}, the block shared by every
  /// (axis, frame) slice of R^{-1}.  Cached.
  const Eigen::MatrixXd& rinvJointBlock() const { return rinv_block_; }

  /// diag(R^{-1}) collapsed to one value per joint (the diagonal is
  /// invariant across frames and axes).
  const Eigen::VectorXd& rinvDiagPerJoint() const { return rinv_diag_; }

  /// diag(R^{-1}) entry for one flat coordinate.
  double rinvDiag(Eigen::Index flat) const {
    return rinv_diag_[static_cast<int>(flat % joints_)];
  }

  /// Per-joint budget weights q_j = 1 / ||column_j(R_J^{-1})||_2.
  /// High-influence joints (large column norm) get small weights.
  Eigen::VectorXd jointInfluenceWeights() const;

  const Eigen::MatrixXd& laplacian() const { return laplacian_; }
  const Eigen::VectorXd& laplacianEigenvalues() const { return evals_; }

 private:
  int frames_;
  int joints_;
  double w_kin_;
  double lambda_;
  Eigen::MatrixXd laplacian_;   // J x J
  Eigen::MatrixXd evecs_;       // U
  Eigen::VectorXd evals_;       // ascending, >= 0, clamped at 1e-12
  Eigen::VectorXd inv_scale_;   // 1 / (w_kin * eval + lambda)
  Eigen::MatrixXd rinv_block_;  // R_J^{-1}
  Eigen::MatrixXd r_block_;     // R_J
  Eigen::VectorXd rinv_diag_;   // diag(R_J^{-1})
};

}  // namespace projflow
