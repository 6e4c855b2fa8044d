#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "projflow/motion.hpp"
#include "projflow/rng.hpp"
#include "projflow/skeleton.hpp"

namespace projflow {

/// Gaussian N(mu, C) with C = W W^T + b I (k = 0 gives the isotropic
/// case C = b I).  All conditional quantities refer to the straight
/// noise-to-data path x_t = (1-t) x0 + t x1 with x0 ~ N(0, I):
///
///   E[x1 | x_t] = mu + t C M_t^{-1} (x_t - t mu),
///   M_t = t^2 C + (1-t)^2 I.
///
/// Low-rank solves go through the k x k capacitance system, never d x d.
class GaussianPrior {
 public:
  GaussianPrior(Eigen::VectorXd mu, Eigen::MatrixXd w_factor, double base_var);
  static GaussianPrior isotropic(Eigen::VectorXd mu, double variance);

  Eigen::Index dim() const { return mu_.size(); }
  Eigen::Index rank() const { return w_.cols(); }
  bool isIsotropic() const { return w_.cols() == 0; }

  const Eigen::VectorXd& mean() const { return mu_; }
  const Eigen::MatrixXd& factor() const { return w_; }
  double baseVariance() const { return base_var_; }

  /// C v.
  Eigen::VectorXd covApply(const Eigen::VectorXd& v) const;

  /// E[x1 | x_t] on the straight path.
  Eigen::VectorXd conditionalMean(const Eigen::VectorXd& x_t, double t) const;

  /// Scalar Var(x1 | x_t) = c (1-t)^2 / (t^2 c + (1-t)^2) for the
  /// isotropic case; throws ValidationError otherwise.
  double conditionalVarScale(double t) const;

  /// log N(x; mu, C).
  double logDensity(const Eigen::VectorXd& x) const;

  /// log N(x_t; t mu, M_t), the path marginal density.
  double logPathMarginal(const Eigen::VectorXd& x_t, double t) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd w_;    // d x k
  double base_var_;      // b > 0
  Eigen::MatrixXd wtw_;  // W^T W, cached
};

/// Finite mixture of Gaussian priors; weights are normalized at
/// construction.  Responsibilities are evaluated in log space.
class MixturePrior {
 public:
  MixturePrior(std::vector<double> weights, std::vector<GaussianPrior> comps);

  Eigen::Index dim() const { return comps_.front().dim(); }
  std::size_t componentCount() const { return comps_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const GaussianPrior& component(std::size_t k) const { return comps_[k]; }

  Eigen::VectorXd conditionalMean(const Eigen::VectorXd& x_t, double t) const;
  double logDensity(const Eigen::VectorXd& x) const;

 private:
  std::vector<double> weights_;
  std::vector<GaussianPrior> comps_;
};

/// Velocity-field contract: v(x_t, t) for t in [0, 1 - 1e-6].
/// Evaluation is pure; implementations are safe to share across
/// concurrent sampling runs.
class VelocityOracle {
 public:
  virtual ~VelocityOracle() = default;

  Eigen::Index dim() const { return dim_; }

  /// Throws ValidationError when t is outside [0, 1 - 1e-6] or the
  /// state has the wrong length.
  Eigen::VectorXd velocity(const Eigen::VectorXd& x_t, double t) const;

 protected:
  explicit VelocityOracle(Eigen::Index dim) : dim_(dim) {}
  virtual Eigen::VectorXd velocityImpl(const Eigen::VectorXd& x_t,
                                       double t) const = 0;

 private:
  Eigen::Index dim_;
};

/// Exact rectified-flow velocity for a Gaussian prior:
/// v = (E[x1|x_t] - x_t) / (1 - t).
class GaussianVelocityOracle final : public VelocityOracle {
 public:
  explicit GaussianVelocityOracle(GaussianPrior prior);
  const GaussianPrior& prior() const { return prior_; }

 private:
  Eigen::VectorXd velocityImpl(const Eigen::VectorXd& x_t,
                               double t) const override;
  GaussianPrior prior_;
};

/// Exact rectified-flow velocity for a Gaussian-mixture prior.
class MixtureVelocityOracle final : public VelocityOracle {
 public:
  explicit MixtureVelocityOracle(MixturePrior prior);
  const MixturePrior& prior() const { return prior_; }

 private:
  Eigen::VectorXd velocityImpl(const Eigen::VectorXd& x_t,
                               double t) const override;
  MixturePrior prior_;
};

/// x1_hat = x_t + (1-t) v(x_t, t).
Eigen::VectorXd tweedieEndpoint(const VelocityOracle& oracle,
                                const Eigen::VectorXd& x_t, double t);

/// Procedural gait-like corpus: the root translates along a smooth
/// random heading while limbs swing sinusoidally around per-corpus rest
/// offsets.  Deterministic for a given (skeleton, frames, count, seed).
std::vector<MotionSeq> synthCorpus(const SkeletonPtr& skeleton, int frames,
                                   int count, std::uint64_t seed);

/// Probabilistic-PCA style fit: mu = sample mean, W from the top-k
/// sample-covariance eigenpairs (via the count x count Gram matrix),
/// b = mean residual variance floored at 1e-6.  Requires count > k.
GaussianPrior fitGaussianPrior(const std::vector<MotionSeq>& corpus, int rank);

/// Prior file {d, mu, rank, W (row-major), b, frames?, joints?}.
struct PriorFile {
  GaussianPrior prior;
  int frames = 0;  // 0 when the prior is not tied to a motion shape
  int joints = 0;
};
PriorFile loadPrior(const std::filesystem::path& path);
void savePrior(const GaussianPrior& prior, const std::filesystem::path& path,
               int frames = 0, int joints = 0);

}  // namespace projflow
