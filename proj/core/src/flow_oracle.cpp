#include "projflow/flow_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "projflow/errors.hpp"

namespace projflow {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle) {
  Eigen::Matrix3d k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
         (1.0 - std::cos(angle)) * k * k;
}

}  // namespace

GaussianPrior::GaussianPrior(Eigen::VectorXd mu, Eigen::MatrixXd w_factor,
                             double base_var)
    : mu_(std::move(mu)), w_(std::move(w_factor)), base_var_(base_var) {
  if (mu_.size() < 1) throw ValidationError("prior: empty mean");
  if (!(base_var_ > 0.0)) {
    throw ValidationError("prior: base variance must be positive");
  }
  if (w_.size() > 0 && w_.rows() != mu_.size()) {
    throw DimensionError("prior: factor rows must match mean length");
  }
  if (w_.cols() >= mu_.size()) {
    throw ValidationError("prior: rank must be below the dimension");
  }
  wtw_ = w_.transpose() * w_;
}

GaussianPrior GaussianPrior::isotropic(Eigen::VectorXd mu, double variance) {
  const Eigen::Index d = mu.size();
  return GaussianPrior(std::move(mu), Eigen::MatrixXd(d, 0), variance);
}

Eigen::VectorXd GaussianPrior::covApply(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw DimensionError("prior covApply: bad length");
  if (isIsotropic()) return base_var_ * v;
  return w_ * (w_.transpose() * v) + base_var_ * v;
}

Eigen::VectorXd GaussianPrior::conditionalMean(const Eigen::VectorXd& x_t,
                                               double t) const {
  if (x_t.size() != dim()) {
    throw DimensionError("prior conditionalMean: bad length");
  }
  const double beta = t * t * base_var_ + (1.0 - t) * (1.0 - t);
  const Eigen::VectorXd z = x_t - t * mu_;
  Eigen::VectorXd minv_z;
  if (isIsotropic()) {
    minv_z = z / beta;
  } else {
    // M = beta I + (tW)(tW)^T; Woodbury through the k x k capacitance
    const Eigen::Index k = rank();
    const Eigen::MatrixXd cap =
        beta * Eigen::MatrixXd::Identity(k, k) + (t * t) * wtw_;
    const Eigen::VectorXd q = cap.ldlt().solve(w_.transpose() * z) * (t * t);
    minv_z = (z - w_ * q) / beta;
  }
  return mu_ + t * covApply(minv_z);
}

double GaussianPrior::conditionalVarScale(double t) const {
  if (!isIsotropic()) {
    throw ValidationError("prior: conditional variance scale is only scalar "
                          "for isotropic covariances");
  }
  const double c = base_var_;
  return c * (1.0 - t) * (1.0 - t) /
         (t * t * c + (1.0 - t) * (1.0 - t));
}

double GaussianPrior::logDensity(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw DimensionError("prior logDensity: bad length");
  const Eigen::VectorXd z = x - mu_;
  const double d = static_cast<double>(dim());
  if (isIsotropic()) {
    return -0.5 * (z.squaredNorm() / base_var_ + d * std::log(base_var_) +
                   d * kLogTwoPi);
  }
  const Eigen::Index k = rank();
  const Eigen::MatrixXd cap =
      base_var_ * Eigen::MatrixXd::Identity(k, k) + wtw_;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cap);
  const Eigen::VectorXd wz = w_.transpose() * z;
  const double quad =
      (z.squaredNorm() - wz.dot(ldlt.solve(wz))) / base_var_;
  const double logdet = (d - static_cast<double>(k)) * std::log(base_var_) +
                        ldlt.vectorD().array().log().sum();
  return -0.5 * (quad + logdet + d * kLogTwoPi);
}

double GaussianPrior::logPathMarginal(const Eigen::VectorXd& x_t,
                                      double t) const {
  if (x_t.size() != dim()) {
    throw DimensionError("prior logPathMarginal: bad length");
  }
  const double beta = t * t * base_var_ + (1.0 - t) * (1.0 - t);
  const Eigen::VectorXd z = x_t - t * mu_;
  const double d = static_cast<double>(dim());
  if (isIsotropic()) {
    return -0.5 * (z.squaredNorm() / beta + d * std::log(beta) + d * kLogTwoPi);
  }
  const Eigen::Index k = rank();
  const Eigen::MatrixXd cap =
      beta * Eigen::MatrixXd::Identity(k, k) + (t * t) * wtw_;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cap);
  const Eigen::VectorXd wz = w_.transpose() * z;
  const double quad =
      (z.squaredNorm() - (t * t) * wz.dot(ldlt.solve(wz))) / beta;
  const double logdet = (d - static_cast<double>(k)) * std::log(beta) +
                        ldlt.vectorD().array().log().sum();
  return -0.5 * (quad + logdet + d * kLogTwoPi);
}

MixturePrior::MixturePrior(std::vector<double> weights,
                           std::vector<GaussianPrior> comps)
    : weights_(std::move(weights)), comps_(std::move(comps)) {
  if (comps_.empty() || weights_.size() != comps_.size()) {
    throw ValidationError("mixture: need matching, non-empty weights and "
                          "components");
  }
  double total = 0.0;
  for (const double w : weights_) {
    if (!(w > 0.0)) throw ValidationError("mixture: weights must be positive");
    total += w;
  }
  for (double& w : weights_) w /= total;
  for (const auto& comp : comps_) {
    if (comp.dim() != comps_.front().dim()) {
      throw DimensionError("mixture: components disagree on dimension");
    }
  }
}

Eigen::VectorXd MixturePrior::conditionalMean(const Eigen::VectorXd& x_t,
                                              double t) const {
  const std::size_t n = comps_.size();
  Eigen::VectorXd log_resp(n);
  for (std::size_t k = 0; k < n; ++k) {
    log_resp[k] = std::log(weights_[k]) + comps_[k].logPathMarginal(x_t, t);
  }
  const double top = log_resp.maxCoeff();
  // log-sum-exp guard keeps responsibilities finite for any finite input
  Eigen::VectorXd resp = (log_resp.array() - top).exp();
  resp /= resp.sum();

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim());
  for (std::size_t k = 0; k < n; ++k) {
    if (resp[k] > 0.0) {
      mean += resp[k] * comps_[k].conditionalMean(x_t, t);
    }
  }
  return mean;
}

double MixturePrior::logDensity(const Eigen::VectorXd& x) const {
  Eigen::VectorXd terms(comps_.size());
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    terms[k] = std::log(weights_[k]) + comps_[k].logDensity(x);
  }
  const double top = terms.maxCoeff();
  return top + std::log((terms.array() - top).exp().sum());
}

Eigen::VectorXd VelocityOracle::velocity(const Eigen::VectorXd& x_t,
                                         double t) const {
  if (x_t.size() != dim_) {
    throw DimensionError("velocity oracle: state length " +
                         std::to_string(x_t.size()) + ", expected " +
                         std::to_string(dim_));
  }
  if (t < 0.0 || t > 1.0 - 1e-6) {
    throw ValidationError("velocity oracle: t = " + std::to_string(t) +
                          " outside [0, 1 - 1e-6]");
  }
  return velocityImpl(x_t, t);
}

GaussianVelocityOracle::GaussianVelocityOracle(GaussianPrior prior)
    : VelocityOracle(prior.dim()), prior_(std::move(prior)) {}

Eigen::VectorXd GaussianVelocityOracle::velocityImpl(const Eigen::VectorXd& x_t,
                                                     double t) const {
  return (prior_.conditionalMean(x_t, t) - x_t) / (1.0 - t);
}

MixtureVelocityOracle::MixtureVelocityOracle(MixturePrior prior)
    : VelocityOracle(prior.dim()), prior_(std::move(prior)) {}

Eigen::VectorXd MixtureVelocityOracle::velocityImpl(const Eigen::VectorXd& x_t,
                                                    double t) const {
  return (prior_.conditionalMean(x_t, t) - x_t) / (1.0 - t);
}

Eigen::VectorXd tweedieEndpoint(const VelocityOracle& oracle,
                                const Eigen::VectorXd& x_t, double t) {
  return x_t + (1.0 - t) * oracle.velocity(x_t, t);
}

std::vector<MotionSeq> synthCorpus(const SkeletonPtr& skeleton, int frames,
                                   int count, std::uint64_t seed) {
  if (count < 1) throw ValidationError("synth corpus: count must be >= 1");
  if (frames < 1) throw ValidationError("synth corpus: frames must be >= 1");
  const int joints = skeleton->jointCount();
  Rng rng(seed);

  // tree over the skeleton (BFS from joint 0) with fixed rest offsets
  std::vector<int> parent(joints, -1);
  std::vector<int> order;
  {
    std::vector<std::vector<int>> adj(joints);
    for (const auto& [a, b] : skeleton->edges()) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(joints, 0);
    order.push_back(0);
    seen[0] = 1;
    for (std::size_t head = 0; head < order.size(); ++head) {
      for (const int v : adj[order[head]]) {
        if (!seen[v]) {
          seen[v] = 1;
          parent[v] = order[head];
          order.push_back(v);
        }
      }
    }
  }

  std::vector<Eigen::Vector3d> rest(joints, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> swing_axis(joints, Eigen::Vector3d::UnitX());
  for (int j = 0; j < joints; ++j) {
    if (parent[j] < 0) continue;
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    rest[j] = (0.15 + 0.15 * rng.uniform()) * dir;
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    swing_axis[j] = axis.normalized();
  }

  std::vector<MotionSeq> corpus;
  corpus.reserve(count);
  for (int s = 0; s < count; ++s) {
    MotionSeq motion(skeleton, frames);
    const double heading0 = rng.uniform(0.0, kTwoPi);
    const double speed = rng.uniform(0.5, 1.5);           // m/s
    const double sway_amp = rng.uniform(0.0, 0.7);        // heading sway, rad
    const double sway_phase = rng.uniform(0.0, kTwoPi);
    const double gait_cycles = rng.uniform(1.5, 4.0);     // per sequence
    const double bob_amp = rng.uniform(0.01, 0.05);
    const double bob_phase = rng.uniform(0.0, kTwoPi);
    const double root_height = rng.uniform(0.85, 1.0);

    std::vector<double> swing_amp(joints, 0.0), swing_phase(joints, 0.0);
    std::vector<double> swing_harmonic(joints, 1.0);
    for (int j = 0; j < joints; ++j) {
      if (parent[j] < 0) continue;
      swing_amp[j] = rng.uniform(0.05, 0.45);  // rad, bone-plausible
      swing_phase[j] = rng.uniform(0.0, kTwoPi);
      swing_harmonic[j] = rng.uniform() < 0.5 ? 1.0 : 2.0;
    }

    Eigen::Vector3d root(0.0, root_height, 0.0);
    const double dt = 1.0 / motion.fps();
    std::vector<Eigen::Vector3d> pos(joints);
    for (int n = 0; n < frames; ++n) {
      const double phase = kTwoPi * gait_cycles * n / frames;
      if (n > 0) {
        const double heading =
            heading0 + sway_amp * std::sin(phase + sway_phase);
        root.x() += speed * dt * std::sin(heading);
        root.z() += speed * dt * std::cos(heading);
      }
      root.y() = root_height + bob_amp * std::sin(2.0 * phase + bob_phase);

      pos[0] = root;
      for (std::size_t head = 1; head < order.size(); ++head) {
        const int j = order[head];
        const double angle =
            swing_amp[j] * std::sin(swing_harmonic[j] * phase + swing_phase[j]);
        pos[j] = pos[parent[j]] + rodrigues(swing_axis[j], angle) * rest[j];
      }
      for (int j = 0; j < joints; ++j) motion.setPosition(n, j, pos[j]);
    }
    corpus.push_back(std::move(motion));
  }
  return corpus;
}

GaussianPrior fitGaussianPrior(const std::vector<MotionSeq>& corpus, int rank) {
  if (rank < 0) throw ValidationError("prior fit: rank must be >= 0");
  const int count = static_cast<int>(corpus.size());
  if (count <= rank) {
    throw ValidationError("prior fit: need more sequences than the rank");
  }
  const Eigen::Index d = corpus.front().dim();
  Eigen::MatrixXd x(count, d);
  for (int i = 0; i < count; ++i) {
    if (corpus[i].dim() != d) {
      throw DimensionError("prior fit: corpus sequences disagree on shape");
    }
    x.row(i) = corpus[i].flat().transpose();
  }
  const Eigen::VectorXd mu = x.colwise().mean();
  x.rowwise() -= mu.transpose();
  const double denom = std::max(count - 1, 1);

  constexpr double kFloor = 1e-6;
  if (rank == 0) {
    const double b =
        std::max(x.squaredNorm() / (denom * static_cast<double>(d)), kFloor);
    return GaussianPrior::isotropic(mu, b);
  }

  // eigenpairs of the sample covariance via the count x count Gram matrix
  const Eigen::MatrixXd gram = x * x.transpose() / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending

  double top_sum = 0.0;
  for (int i = 0; i < rank; ++i) {
    top_sum += std::max(evals[count - 1 - i], 0.0);
  }
  const double residual = std::max(gram.trace() - top_sum, 0.0);
  const double b =
      std::max(residual / static_cast<double>(d - rank), kFloor);

  Eigen::MatrixXd w(d, rank);
  Eigen::Index kept = 0;
  for (int i = 0; i < rank; ++i) {
    const double lam = evals[count - 1 - i];
    if (lam <= kFloor || lam <= b) continue;  // spectrally empty direction
    const Eigen::VectorXd u = eig.eigenvectors().col(count - 1 - i);
    Eigen::VectorXd v = x.transpose() * u;
    v /= std::sqrt(lam * denom);  // unit eigenvector of the covariance
    w.col(kept++) = std::sqrt(lam - b) * v;
  }
  w.conservativeResize(Eigen::NoChange, kept);
  return GaussianPrior(mu, std::move(w), b);
}

PriorFile loadPrior(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    const Eigen::Index d = j.at("d").get<Eigen::Index>();
    const auto mu_raw = j.at("mu").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mu_raw.size()) != d) {
      throw ParseError(path.string() + ": mu length does not match d");
    }
    Eigen::VectorXd mu =
        Eigen::Map<const Eigen::VectorXd>(mu_raw.data(), d);
    const Eigen::Index rank = j.at("rank").get<Eigen::Index>();
    const auto w_raw = j.value("W", std::vector<double>{});
    if (static_cast<Eigen::Index>(w_raw.size()) != d * rank) {
      throw ParseError(path.string() + ": W length does not match d*rank");
    }
    Eigen::MatrixXd w(d, rank);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < rank; ++c) w(r, c) = w_raw[r * rank + c];
    }
    PriorFile file{GaussianPrior(std::move(mu), std::move(w),
                                 j.at("b").get<double>()),
                   j.value("frames", 0), j.value("joints", 0)};
    return file;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void savePrior(const GaussianPrior& prior, const std::filesystem::path& path,
               int frames, int joints) {
  json j;
  j["d"] = prior.dim();
  j["mu"] = std::vector<double>(prior.mean().data(),
                                prior.mean().data() + prior.dim());
  j["rank"] = prior.rank();
  std::vector<double> w_raw;
  w_raw.reserve(prior.dim() * prior.rank());
  for (Eigen::Index r = 0; r < prior.dim(); ++r) {
    for (Eigen::Index c = 0; c < prior.rank(); ++c) {
      w_raw.push_back(prior.factor()(r, c));
    }
  }
  j["W"] = std::move(w_raw);
  j["b"] = prior.baseVariance();
  if (frames > 0) j["frames"] = frames;
  if (joints > 0) j["joints"] = joints;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << j.dump() << "\n";
}

}  // namespace projflow
