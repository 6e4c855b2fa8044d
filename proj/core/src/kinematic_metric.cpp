#include "projflow/kinematic_metric.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "projflow/errors.hpp"

namespace projflow {

KinematicMetric::KinematicMetric(const Skeleton& skeleton, int frames,
                                 double w_kin, double lambda)
    : frames_(frames),
      joints_(skeleton.jointCount()),
      w_kin_(w_kin),
      lambda_(lambda) {
  if (frames_ < 1) throw ValidationError("metric: frame count must be positive");
  if (!(lambda_ > 0.0)) throw ValidationError("metric: lambda must be positive");
  if (w_kin_ < 0.0) throw ValidationError("metric: w_kin must be nonnegative");

  laplacian_ = skeleton.laplacian();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian_);
  if (eig.info() != Eigen::Success) {
    throw NumericError("metric: Laplacian eigendecomposition failed");
  }
  evecs_ = eig.eigenvectors();
  evals_ = eig.eigenvalues();

  const double recon_err =
      (laplacian_ - evecs_ * evals_.asDiagonal() * evecs_.transpose())
          .cwiseAbs()
          .maxCoeff();
  if (recon_err > 1e-10) {
    throw NumericError("metric: eigendecomposition residual " +
                       std::to_string(recon_err) + " exceeds 1e-10");
  }

  // numerical zero modes of the Laplacian are clamped to exactly 0
  for (Eigen::Index k = 0; k < evals_.size(); ++k) {
    if (evals_[k] < 1e-12) evals_[k] = 0.0;
  }

  inv_scale_ = (w_kin_ * evals_.array() + lambda_).inverse().matrix();
  rinv_block_ = evecs_ * inv_scale_.asDiagonal() * evecs_.transpose();
  r_block_ = w_kin_ * laplacian_ +
             lambda_ * Eigen::MatrixXd::Identity(joints_, joints_);
  rinv_diag_ = rinv_block_.diagonal();
}

Eigen::VectorXd KinematicMetric::apply(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) {
    throw DimensionError("metric apply: vector length " +
                         std::to_string(v.size()) + ", expected " +
                         std::to_string(dim()));
  }
  Eigen::VectorXd out(v.size());
  const Eigen::Index blocks = static_cast<Eigen::Index>(3) * frames_;
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.segment(b * joints_, joints_).noalias() =
        r_block_ * v.segment(b * joints_, joints_);
  }
  return out;
}

Eigen::VectorXd KinematicMetric::solve(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) {
    throw DimensionError("metric solve: vector length " +
                         std::to_string(v.size()) + ", expected " +
                         std::to_string(dim()));
  }
  Eigen::VectorXd out(v.size());
  const Eigen::Index blocks = static_cast<Eigen::Index>(3) * frames_;
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.segment(b * joints_, joints_).noalias() =
        rinv_block_ * v.segment(b * joints_, joints_);
  }
  return out;
}

Eigen::MatrixXd KinematicMetric::solveMatrix(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != dim()) {
    throw DimensionError("metric solve: rhs has " + std::to_string(rhs.rows()) +
                         " rows, expected " + std::to_string(dim()));
  }
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  const Eigen::Index blocks = static_cast<Eigen::Index>(3) * frames_;
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.middleRows(b * joints_, joints_).noalias() =
        rinv_block_ * rhs.middleRows(b * joints_, joints_);
  }
  return out;
}

double KinematicMetric::rNorm(const Eigen::VectorXd& v) const {
  return std::sqrt(std::max(0.0, v.dot(apply(v))));
}

Eigen::VectorXd KinematicMetric::applyJointBlock(const Eigen::VectorXd& u) const {
  if (u.size() != joints_) {
    throw DimensionError("metric joint block: vector length " +
                         std::to_string(u.size()) + ", expected " +
                         std::to_string(joints_));
  }
  return r_block_ * u;
}

double KinematicMetric::jointBlockNorm(const Eigen::VectorXd& u) const {
  return std::sqrt(std::max(0.0, u.dot(applyJointBlock(u))));
}

Eigen::VectorXd KinematicMetric::jointInfluenceWeights() const {
  Eigen::VectorXd q(joints_);
  for (int j = 0; j < joints_; ++j) {
    q[j] = 1.0 / rinv_block_.col(j).norm();
  }
  return q;
}

}  // namespace projflow
