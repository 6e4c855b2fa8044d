#include "projflow/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "projflow/errors.hpp"
#include "projflow/motion.hpp"

namespace projflow {

namespace {

[[noreturn]] void throwRankDeficient(const Eigen::MatrixXd& s_matrix) {
  // name the rows that dominate the near-null directions
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s_matrix);
  const Eigen::VectorXd& evals = eig.eigenvalues();
  const double scale = std::max(evals.cwiseAbs().maxCoeff(), 1e-300);
  std::string rows;
  int named = 0;
  for (Eigen::Index k = 0; k < evals.size() && named < 4; ++k) {
    if (evals[k] > 1e-10 * scale) break;
    Eigen::Index worst = 0;
    eig.eigenvectors().col(k).cwiseAbs().maxCoeff(&worst);
    if (!rows.empty()) rows += ", ";
    rows += std::to_string(worst);
    ++named;
  }
  throw RankDeficientError(
      "projection: A R^{-1} A^T + Sigma is singular; zero-variance rows are "
      "linearly dependent (near-null directions dominated by rows {" +
      rows + "})");
}

Eigen::MatrixXd denseMetric(const KinematicMetric& metric) {
  const Eigen::Index d = metric.dim();
  const int joints = metric.joints();
  const Eigen::MatrixXd block =
      metric.wKin() * metric.laplacian() +
      metric.lambda() * Eigen::MatrixXd::Identity(joints, joints);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index b = 0; b < d / joints; ++b) {
    dense.block(b * joints, b * joints, joints, joints) = block;
  }
  return dense;
}

}  // namespace

ProjectionWorkspace::ProjectionWorkspace(const KinematicMetric& metric)
    : metric_(&metric) {}

void ProjectionWorkspace::factorize(const ConstraintSystem& system) {
  if (system.dim() != metric_->dim()) {
    throw DimensionError("projection: system dimension " +
                         std::to_string(system.dim()) +
                         " does not match metric dimension " +
                         std::to_string(metric_->dim()));
  }
  op_ = system.op;
  target_ = system.target;
  sigma_ = system.sigma_diag;
  ready_ = false;

  const Eigen::Index m = op_->rows();
  if (m == 0) {
    ready_ = true;
    mask_path_ = false;
    basis_.resize(0, 0);
    return;
  }

  Eigen::MatrixXd s_matrix(m, m);
  const std::vector<Eigen::Index>* mask = op_->maskIndices();
  mask_path_ = mask != nullptr;
  if (mask_path_) {
    // S = (R^{-1} restricted to the mask) + Sigma.  R^{-1} couples only
    // coordinates in the same (axis, frame) block.
    const Eigen::MatrixXd& rinv = metric_->rinvJointBlock();
    const int frames = metric_->frames();
    const int joints = metric_->joints();
    s_matrix.setZero();
    for (Eigen::Index a = 0; a < m; ++a) {
      const VecIndex ia = VecIndex::fromFlat((*mask)[a], frames, joints);
      for (Eigen::Index b = 0; b < m; ++b) {
        const VecIndex ib = VecIndex::fromFlat((*mask)[b], frames, joints);
        if (ia.axis == ib.axis && ia.frame == ib.frame) {
          s_matrix(a, b) = rinv(ia.joint, ib.joint);
        }
      }
    }
    basis_.resize(0, 0);
  } else {
    Eigen::MatrixXd adjoint_cols(metric_->dim(), m);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      unit[k] = 1.0;
      adjoint_cols.col(k) = op_->adjoint(unit);
      unit[k] = 0.0;
    }
    basis_ = metric_->solveMatrix(adjoint_cols);
    for (Eigen::Index k = 0; k < m; ++k) {
      s_matrix.col(k) = op_->apply(basis_.col(k));
    }
    s_matrix = 0.5 * (s_matrix + s_matrix.transpose()).eval();
  }
  s_matrix.diagonal() += sigma_;

  llt_.compute(s_matrix);
  if (llt_.info() != Eigen::Success) {
    throwRankDeficient(s_matrix);
  }
  ready_ = true;
}

Projection ProjectionWorkspace::project(const Eigen::VectorXd& x1_hat) const {
  if (!ready_) {
    throw ValidationError("projection: workspace has no factorized system");
  }
  if (x1_hat.size() != metric_->dim()) {
    throw DimensionError("projection: endpoint length " +
                         std::to_string(x1_hat.size()) + ", expected " +
                         std::to_string(metric_->dim()));
  }
  const Eigen::Index m = op_->rows();
  if (m == 0) {
    return {x1_hat, Eigen::VectorXd::Zero(x1_hat.size())};
  }
  const Eigen::VectorXd residual = target_ - op_->apply(x1_hat);
  const Eigen::VectorXd weights = llt_.solve(residual);

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(x1_hat.size());
  if (mask_path_) {
    const std::vector<Eigen::Index>& mask = *op_->maskIndices();
    const Eigen::MatrixXd& rinv = metric_->rinvJointBlock();
    const int frames = metric_->frames();
    const int joints = metric_->joints();
    for (Eigen::Index k = 0; k < m; ++k) {
      const VecIndex idx = VecIndex::fromFlat(mask[k], frames, joints);
      const Eigen::Index block =
          (static_cast<Eigen::Index>(idx.axis) * frames + idx.frame) * joints;
      delta.segment(block, joints) += weights[k] * rinv.col(idx.joint);
    }
  } else {
    delta.noalias() = basis_ * weights;
  }
  return {x1_hat + delta, std::move(delta)};
}

Projection ProjectionWorkspace::project(const Eigen::VectorXd& x1_hat,
                                        const ConstraintSystem& system) {
  factorize(system);
  return project(x1_hat);
}

double ProjectionWorkspace::hardResidual(const Eigen::VectorXd& x) const {
  if (!ready_) {
    throw ValidationError("projection: workspace has no factorized system");
  }
  if (op_->rows() == 0) return 0.0;
  const Eigen::VectorXd r = op_->apply(x) - target_;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (sigma_[i] == 0.0) {
      worst = std::max(worst, std::abs(r[i]) / (1.0 + std::abs(target_[i])));
    }
  }
  return worst;
}

Projection projectEndpoint(const Eigen::VectorXd& x1_hat,
                           const ConstraintSystem& system,
                           const KinematicMetric& metric) {
  ProjectionWorkspace workspace(metric);
  return workspace.project(x1_hat, system);
}

Eigen::VectorXd mapOracle(const Eigen::VectorXd& x1_hat,
                          const ConstraintSystem& system,
                          const KinematicMetric& metric) {
  if ((system.sigma_diag.array() <= 0.0).any()) {
    throw ValidationError("map oracle: requires all-soft rows (sigma^2 > 0)");
  }
  if (x1_hat.size() != metric.dim() || system.dim() != metric.dim()) {
    throw DimensionError("map oracle: dimension mismatch");
  }
  const Eigen::MatrixXd a_dense = materialize(*system.op);
  const Eigen::MatrixXd r_dense = denseMetric(metric);
  const Eigen::VectorXd inv_sigma = system.sigma_diag.cwiseInverse();

  const Eigen::MatrixXd normal =
      r_dense + a_dense.transpose() * inv_sigma.asDiagonal() * a_dense;
  const Eigen::VectorXd rhs =
      r_dense * x1_hat +
      a_dense.transpose() * (inv_sigma.asDiagonal() * system.target);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success) {
    throw NumericError("map oracle: singular normal matrix");
  }
  return ldlt.solve(rhs);
}

Eigen::VectorXd ddnmOracle(const Eigen::VectorXd& x1_hat,
                           const ConstraintSystem& system) {
  if ((system.sigma_diag.array() != 0.0).any()) {
    throw ValidationError("ddnm oracle: requires Sigma = 0");
  }
  if (x1_hat.size() != system.dim()) {
    throw DimensionError("ddnm oracle: dimension mismatch");
  }
  if (system.rows() == 0) return x1_hat;

  const Eigen::MatrixXd a_dense = materialize(*system.op);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a_dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-10 * sv.maxCoeff();

  // A^+ r with small singular values dropped
  const Eigen::VectorXd r = system.target - a_dense * x1_hat;
  Eigen::VectorXd coeffs = svd.matrixU().transpose() * r;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    coeffs[k] = sv[k] > cutoff ? coeffs[k] / sv[k] : 0.0;
  }
  return x1_hat + svd.matrixV() * coeffs;
}

double objectiveValue(const Eigen::VectorXd& delta,
                      const Eigen::VectorXd& x1_hat,
                      const ConstraintSystem& system,
                      const KinematicMetric& metric) {
  if (delta.size() != metric.dim() || x1_hat.size() != metric.dim() ||
      system.dim() != metric.dim()) {
    throw DimensionError("objective: dimension mismatch");
  }
  const Eigen::VectorXd residual =
      system.target - system.op->apply(x1_hat + delta);
  double data_term = 0.0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    if (system.sigma_diag[i] == 0.0) {
      if (std::abs(residual[i]) > 1e-6 * (1.0 + std::abs(system.target[i]))) {
        throw InfeasibleError("objective: hard row " + std::to_string(i) +
                              " violated by " + std::to_string(residual[i]));
      }
    } else {
      data_term += residual[i] * residual[i] / system.sigma_diag[i];
    }
  }
  return 0.5 * delta.dot(metric.apply(delta)) + 0.5 * data_term;
}

}  // namespace projflow
