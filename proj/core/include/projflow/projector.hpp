#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "projflow/kinematic_metric.hpp"
#include "projflow/linear_ops.hpp"

namespace projflow {

struct Projection {
  Eigen::VectorXd x1_star;  // corrected clean endpoint
  Eigen::VectorXd delta;    // metric-optimal correction
};

/// Closed-form metric-weighted projection of a clean endpoint onto the
/// measurement set:
///
///   delta* = R^{-1} A^T (A R^{-1} A^T + Sigma)^{-1} (y - A x1_hat).
///
/// The m x m system S = A R^{-1} A^T + Sigma is formed explicitly and
/// factorized with a Cholesky decomposition; nothing d x d is touched.
/// For pure coordinate masks, R^{-1} is block diagonal, so S is gathered
/// from the cached J x J inverse block instead of running m solves.
///
/// A workspace holds one factorization at a time.  Time-invariant
/// systems factorize once and project many times; time-varying systems
/// (inpainting) re-factorize every step.  Workspaces are not shared
/// across threads; distinct workspaces may run concurrently.
class ProjectionWorkspace {
 public:
  explicit ProjectionWorkspace(const KinematicMetric& metric);

  /// Forms and factorizes S for the given system.  Throws
  /// RankDeficientError (naming near-null rows) when the zero-variance
  /// rows are linearly dependent.
  void factorize(const ConstraintSystem& system);

  bool factorized() const { return ready_; }

  /// Projects against the factorized system.
  Projection project(const Eigen::VectorXd& x1_hat) const;

  /// factorize + project in one call.
  Projection project(const Eigen::VectorXd& x1_hat,
                     const ConstraintSystem& system);

  /// Max hard-row residual of x, relative: max_i |(Ax - y)_i| / (1 + |y_i|)
  /// over rows with zero variance; 0 when there are none.
  double hardResidual(const Eigen::VectorXd& x) const;

  const KinematicMetric& metric() const { return *metric_; }

 private:
  const KinematicMetric* metric_;
  bool ready_ = false;
  LinOpPtr op_;
  Eigen::VectorXd target_;
  Eigen::VectorXd sigma_;
  bool mask_path_ = false;
  Eigen::MatrixXd basis_;  // B = R^{-1} A^T, d x m (generic path only)
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// One-shot convenience wrapper.
Projection projectEndpoint(const Eigen::VectorXd& x1_hat,
                           const ConstraintSystem& system,
                           const KinematicMetric& metric);

/// Independent reference: dense normal-equations MAP solve
///   (R + A^T Sigma^{-1} A) x = R x1_hat + A^T Sigma^{-1} y.
/// Requires all rows soft (sigma^2 > 0) and small d.
Eigen::VectorXd mapOracle(const Eigen::VectorXd& x1_hat,
                          const ConstraintSystem& system,
                          const KinematicMetric& metric);

/// Independent reference: range/null-space update A^+ y + (I - A^+ A) x1_hat
/// with the Moore-Penrose pseudoinverse (SVD, cutoff 1e-10 * sigma_max).
/// Requires Sigma = 0.
Eigen::VectorXd ddnmOracle(const Eigen::VectorXd& x1_hat,
                           const ConstraintSystem& system);

/// Correction objective: 0.5 ||delta||_R^2 + 0.5 ||y - A(x1_hat+delta)||^2
/// over soft rows; hard rows are feasibility conditions and contribute 0.
/// Throws InfeasibleError when a hard row is violated beyond
/// 1e-6 * (1 + |y_i|).
double objectiveValue(const Eigen::VectorXd& delta,
                      const Eigen::VectorXd& x1_hat,
                      const ConstraintSystem& system,
                      const KinematicMetric& metric);

}  // namespace projflow
