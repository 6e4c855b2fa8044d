#include "projflow/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "projflow/errors.hpp"

namespace projflow {

namespace {
constexpr int kNoObservation = std::numeric_limits<int>::max() / 2;
}

KeyframeSpec::KeyframeSpec(std::vector<KeyframeEntry> entries, int frames,
                           int joints)
    : entries_(std::move(entries)), frames_(frames), joints_(joints) {
  std::set<std::tuple<int, int, int>> seen;
  std::vector<std::pair<VecIndex, double>> cells;
  for (const auto& e : entries_) {
    if (e.frame < 0 || e.frame >= frames_ || e.joint < 0 || e.joint >= joints_) {
      throw ValidationError("keyframes: (frame, joint) out of range");
    }
    if (e.axes.empty() || e.axes.size() != e.values.size()) {
      throw ValidationError("keyframes: axes and values must align and be "
                            "non-empty");
    }
    for (std::size_t a = 0; a < e.axes.size(); ++a) {
      const int axis = e.axes[a];
      if (axis < 0 || axis > 2) {
        throw ValidationError("keyframes: axis out of range");
      }
      if (!seen.insert({e.frame, e.joint, axis}).second) {
        throw ValidationError("keyframes: duplicate (frame, joint, axis)");
      }
      cells.push_back({VecIndex{axis, e.frame, e.joint}, e.values[a]});
    }
  }
  std::sort(cells.begin(), cells.end(), [](const auto& lhs, const auto& rhs) {
    const VecIndex &a = lhs.first, &b = rhs.first;
    return std::tie(a.frame, a.joint, a.axis) < std::tie(b.frame, b.joint, b.axis);
  });
  indices_.reserve(cells.size());
  values_.resize(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    indices_.push_back(cells[i].first);
    values_[static_cast<Eigen::Index>(i)] = cells[i].second;
  }
}

ConstraintSystem KeyframeSpec::hardSystem() const {
  return ConstraintSystem(maskOp(indices_, frames_, joints_), values_,
                          Eigen::VectorXd::Zero(values_.size()));
}

PseudoObsTable::PseudoObsTable(const KeyframeSpec& spec)
    : frames_(spec.frames()), joints_(spec.joints()) {
  const std::size_t cells = static_cast<std::size_t>(frames_) * joints_ * 3;
  values_.assign(cells, 0.0);
  flags_.assign(cells, PseudoFlag::Absent);
  distances_.assign(static_cast<std::size_t>(frames_) * joints_,
                    kNoObservation);

  // observed frames per (joint, axis), and per joint over any axis
  std::vector<std::vector<std::pair<int, double>>> obs(
      static_cast<std::size_t>(joints_) * 3);
  std::vector<std::vector<int>> joint_frames(joints_);
  for (std::size_t i = 0; i < spec.observedIndices().size(); ++i) {
    const VecIndex idx = spec.observedIndices()[i];
    obs[static_cast<std::size_t>(idx.joint) * 3 + idx.axis].push_back(
        {idx.frame, spec.observedValues()[static_cast<Eigen::Index>(i)]});
    joint_frames[idx.joint].push_back(idx.frame);
  }

  for (int j = 0; j < joints_; ++j) {
    auto& frames_of_joint = joint_frames[j];
    std::sort(frames_of_joint.begin(), frames_of_joint.end());
    frames_of_joint.erase(
        std::unique(frames_of_joint.begin(), frames_of_joint.end()),
        frames_of_joint.end());
    for (int n = 0; n < frames_; ++n) {
      int best = kNoObservation;
      for (const int f : frames_of_joint) {
        best = std::min(best, std::abs(n - f));
      }
      distances_[static_cast<std::size_t>(n) * joints_ + j] = best;
    }

    for (int axis = 0; axis < 3; ++axis) {
      auto& points = obs[static_cast<std::size_t>(j) * 3 + axis];
      if (points.empty()) continue;  // stays Absent everywhere
      std::sort(points.begin(), points.end());
      for (int n = 0; n < frames_; ++n) {
        const std::size_t c = cell(n, j, axis);
        // nearest observed frame at or after n
        auto after = std::lower_bound(
            points.begin(), points.end(), std::make_pair(n, -1.0),
            [](const auto& a, const auto& b) { return a.first < b.first; });
        if (after != points.end() && after->first == n) {
          flags_[c] = PseudoFlag::Hard;
          values_[c] = after->second;
          continue;
        }
        if (after == points.begin()) {
          // before the first observation: copy it
          flags_[c] = PseudoFlag::Extrapolated;
          values_[c] = points.front().second;
        } else if (after == points.end()) {
          // after the last observation: copy it
          flags_[c] = PseudoFlag::Extrapolated;
          values_[c] = points.back().second;
        } else {
          const auto& [n1, v1] = *(after - 1);
          const auto& [n2, v2] = *after;
          const double w = static_cast<double>(n - n1) / (n2 - n1);
          flags_[c] = PseudoFlag::Interpolated;
          values_[c] = (1.0 - w) * v1 + w * v2;
        }
      }
    }
  }
}

PseudoObsTable buildPseudoObs(const KeyframeSpec& spec) {
  return PseudoObsTable(spec);
}

void TrustParams::validate() const {
  if (!(tau_min > 0.0 && tau_min <= 1.0)) {
    throw ValidationError("trust params: tau_min must be in (0, 1]");
  }
  if (!(pi_min > 0.0 && pi_min <= pi_max && pi_max <= 1.0)) {
    throw ValidationError("trust params: need 0 < pi_min <= pi_max <= 1");
  }
  if (l_min > l_max) {
    throw ValidationError("trust params: l_min must not exceed l_max");
  }
  if (!(c0 > 0.0) || lambda_s < 0.0 || p <= 0.0) {
    throw ValidationError("trust params: invalid adaptive-variance constants");
  }
}

double maskingRadius(double t, const TrustParams& params) {
  if (t < 0.0 || t > 1.0) {
    throw ValidationError("masking radius: t outside [0, 1]");
  }
  return (1.0 - t) * params.l_max + t * params.l_min;
}

double timeDecay(double t, const TrustParams& params) {
  return params.tau_min + (1.0 - params.tau_min) * (1.0 - t);
}

Eigen::VectorXd curvature(const Eigen::VectorXd& x1_hat_flat,
                          const KinematicMetric& metric) {
  if (x1_hat_flat.size() != metric.dim()) {
    throw DimensionError("curvature: endpoint length mismatch");
  }
  const int frames = metric.frames();
  const int joints = metric.joints();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(frames);
  if (frames < 3) return s;

  const auto block = [&](int axis, int n) {
    return x1_hat_flat.segment(
        (static_cast<Eigen::Index>(axis) * frames + n) * joints, joints);
  };
  for (int n = 1; n + 1 < frames; ++n) {
    double quad = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      const Eigen::VectorXd diff =
          block(axis, n + 1) - 2.0 * block(axis, n) + block(axis, n - 1);
      quad += diff.dot(metric.applyJointBlock(diff));
    }
    s[n] = std::sqrt(std::max(0.0, quad));
  }
  s[0] = s[1];
  s[frames - 1] = s[frames - 2];
  return s;
}

double varianceFromTrust(double pi, double r) {
  if (!(pi > 0.0)) {
    throw ValidationError("trust to variance: pi must be positive");
  }
  if (!(r > 0.0)) {
    throw ValidationError("trust to variance: r must be positive");
  }
  return r * (1.0 / pi - 1.0);
}

InpaintSchedule::InpaintSchedule(KeyframeSpec spec,
                                 const KinematicMetric& metric,
                                 TrustParams params)
    : spec_(std::move(spec)),
      table_(spec_),
      metric_(&metric),
      params_(params) {
  params_.validate();
  if (spec_.frames() != metric.frames() || spec_.joints() != metric.joints()) {
    throw DimensionError("inpaint schedule: keyframes and metric disagree on "
                         "the motion shape");
  }
  joint_weights_ = metric.jointInfluenceWeights();
}

std::vector<VecIndex> InpaintSchedule::activeSet(double t) const {
  const double radius = maskingRadius(t, params_);
  std::vector<VecIndex> active;
  for (int n = 0; n < spec_.frames(); ++n) {
    for (int j = 0; j < spec_.joints(); ++j) {
      if (!(table_.distance(n, j) < radius)) continue;
      for (int axis = 0; axis < 3; ++axis) {
        const PseudoFlag flag = table_.flag(n, j, axis);
        if (flag == PseudoFlag::Interpolated ||
            flag == PseudoFlag::Extrapolated) {
          active.push_back(VecIndex{axis, n, j});
        }
      }
    }
  }
  std::sort(active.begin(), active.end(), [](const VecIndex& a, const VecIndex& b) {
    return std::tie(a.frame, a.joint, a.axis) < std::tie(b.frame, b.joint, b.axis);
  });
  return active;
}

Eigen::VectorXd InpaintSchedule::trustScores(double t,
                                             const Eigen::VectorXd& x1_hat) const {
  const std::vector<VecIndex> active = activeSet(t);
  Eigen::VectorXd scores(static_cast<Eigen::Index>(active.size()));
  if (active.empty()) return scores;

  const Eigen::VectorXd s = curvature(x1_hat, *metric_);
  // median curvature over interior frames, for robust normalization
  double s_med = 0.0;
  if (spec_.frames() >= 3) {
    std::vector<double> interior(s.data() + 1, s.data() + spec_.frames() - 1);
    std::sort(interior.begin(), interior.end());
    const std::size_t h = interior.size() / 2;
    s_med = interior.size() % 2 ? interior[h]
                                : 0.5 * (interior[h - 1] + interior[h]);
  }

  // active joints per frame
  std::vector<std::vector<int>> frame_joints(spec_.frames());
  for (const VecIndex& idx : active) {
    auto& joints = frame_joints[idx.frame];
    if (joints.empty() || joints.back() != idx.joint) {
      joints.push_back(idx.joint);
    }
  }

  const double tau = timeDecay(t, params_);
  std::vector<double> frame_budget(spec_.frames(), 0.0);
  std::vector<double> q_total(spec_.frames(), 0.0);
  for (int n = 0; n < spec_.frames(); ++n) {
    if (frame_joints[n].empty()) continue;
    // s_med == 0 (near-linear prediction) means interpolation is
    // reliable; treat the ratio as 0 for maximal trust
    const double ratio = s_med > 0.0 ? s[n] / s_med : 0.0;
    double budget =
        tau * params_.c0 / (1.0 + params_.lambda_s * std::pow(ratio, params_.p));
    if (params_.clip_frame_budget_first) {
      budget = std::clamp(budget, params_.pi_min, params_.pi_max);
    }
    frame_budget[n] = budget;
    for (const int j : frame_joints[n]) q_total[n] += joint_weights_[j];
  }

  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const VecIndex idx = active[static_cast<std::size_t>(i)];
    const double share =
        frame_joints[idx.frame].size() == 1
            ? 1.0
            : joint_weights_[idx.joint] / q_total[idx.frame];
    scores[i] = std::clamp(frame_budget[idx.frame] * share, params_.pi_min,
                           params_.pi_max);
  }
  return scores;
}

ConstraintSystem InpaintSchedule::systemAt(double t,
                                           const Eigen::VectorXd& x1_hat) const {
  const std::vector<VecIndex>& hard = spec_.observedIndices();
  const std::vector<VecIndex> active = activeSet(t);
  const Eigen::VectorXd scores = trustScores(t, x1_hat);

  std::vector<VecIndex> all;
  all.reserve(hard.size() + active.size());
  all.insert(all.end(), hard.begin(), hard.end());
  all.insert(all.end(), active.begin(), active.end());

  const Eigen::Index m = static_cast<Eigen::Index>(all.size());
  const Eigen::Index m_hard = static_cast<Eigen::Index>(hard.size());
  Eigen::VectorXd target(m);
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(m);
  target.head(m_hard) = spec_.observedValues();
  for (Eigen::Index i = m_hard; i < m; ++i) {
    const VecIndex idx = all[static_cast<std::size_t>(i)];
    target[i] = table_.value(idx.frame, idx.joint, idx.axis);
    sigma[i] = varianceFromTrust(scores[i - m_hard],
                                 metric_->rinvDiagPerJoint()[idx.joint]);
  }
  return ConstraintSystem(maskOp(all, spec_.frames(), spec_.joints()),
                          std::move(target), std::move(sigma));
}

}  // namespace projflow
