#include "projflow/linear_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include <Eigen/Geometry>

#include "projflow/errors.hpp"

namespace projflow {

LinOp::LinOp(OpKind kind, Eigen::Index rows, Eigen::Index cols)
    : kind_(kind), rows_(rows), cols_(cols) {
  if (rows_ < 0 || cols_ < 1) {
    throw ValidationError("linear op: invalid shape");
  }
}

Eigen::VectorXd LinOp::apply(const Eigen::VectorXd& v) const {
  if (v.size() != cols_) {
    throw DimensionError("linear op apply: vector length " +
                         std::to_string(v.size()) + ", expected " +
                         std::to_string(cols_));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
  applyImpl(v, out);
  return out;
}

Eigen::VectorXd LinOp::adjoint(const Eigen::VectorXd& u) const {
  if (u.size() != rows_) {
    throw DimensionError("linear op adjoint: vector length " +
                         std::to_string(u.size()) + ", expected " +
                         std::to_string(rows_));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
  adjointImpl(u, out);
  return out;
}

namespace {

class MaskOp final : public LinOp {
 public:
  MaskOp(std::vector<Eigen::Index> indices, Eigen::Index d)
      : LinOp(OpKind::CoordinateMask, static_cast<Eigen::Index>(indices.size()),
              d),
        indices_(std::move(indices)) {
    std::unordered_set<Eigen::Index> seen;
    for (const Eigen::Index idx : indices_) {
      if (idx < 0 || idx >= cols()) {
        throw ValidationError("mask op: index " + std::to_string(idx) +
                              " out of range [0, " + std::to_string(cols()) +
                              ")");
      }
      if (!seen.insert(idx).second) {
        throw ValidationError("mask op: duplicate index " + std::to_string(idx));
      }
    }
  }

  const std::vector<Eigen::Index>* maskIndices() const override {
    return &indices_;
  }

 private:
  void applyImpl(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override {
    for (Eigen::Index k = 0; k < rows(); ++k) out[k] = v[indices_[k]];
  }
  void adjointImpl(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    for (Eigen::Index k = 0; k < rows(); ++k) out[indices_[k]] = u[k];
  }

  std::vector<Eigen::Index> indices_;
};

class OrthographicOp final : public LinOp {
 public:
  OrthographicOp(const Camera& camera,
                 std::vector<std::pair<int, int>> frame_joints, int frames,
                 int joints)
      : LinOp(OpKind::OrthographicProject,
              2 * static_cast<Eigen::Index>(frame_joints.size()),
              static_cast<Eigen::Index>(3) * frames * joints),
        camera_(camera),
        frame_joints_(std::move(frame_joints)),
        frames_(frames),
        joints_(joints) {
    for (const auto& [n, j] : frame_joints_) {
      if (n < 0 || n >= frames_ || j < 0 || j >= joints_) {
        throw ValidationError("orthographic op: (frame, joint) out of range");
      }
    }
    // 2 x 3 row block s * P * R_cam, shared by every selected pair
    proj_ = camera_.scale * camera_.rotation.topRows<2>();
  }

 private:
  Eigen::Index flat(int axis, int n, int j) const {
    return (static_cast<Eigen::Index>(axis) * frames_ + n) * joints_ + j;
  }

  void applyImpl(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override {
    for (std::size_t k = 0; k < frame_joints_.size(); ++k) {
      const auto& [n, j] = frame_joints_[k];
      const Eigen::Vector3d p(v[flat(0, n, j)], v[flat(1, n, j)],
                              v[flat(2, n, j)]);
      out.segment<2>(2 * static_cast<Eigen::Index>(k)) = proj_ * p;
    }
  }
  void adjointImpl(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    for (std::size_t k = 0; k < frame_joints_.size(); ++k) {
      const auto& [n, j] = frame_joints_[k];
      const Eigen::Vector3d back =
          proj_.transpose() * u.segment<2>(2 * static_cast<Eigen::Index>(k));
      for (int c = 0; c < 3; ++c) out[flat(c, n, j)] += back[c];
    }
  }

  Camera camera_;
  std::vector<std::pair<int, int>> frame_joints_;
  int frames_;
  int joints_;
  Eigen::Matrix<double, 2, 3> proj_;
};

class LoopClosureOp final : public LinOp {
 public:
  LoopClosureOp(int frames, int joints)
      : LinOp(OpKind::FrameDifference, static_cast<Eigen::Index>(3) * joints,
              static_cast<Eigen::Index>(3) * frames * joints),
        frames_(frames),
        joints_(joints) {
    if (frames_ < 2) {
      throw ValidationError("loop closure: need at least 2 frames");
    }
  }

 private:
  Eigen::Index flat(int axis, int n, int j) const {
    return (static_cast<Eigen::Index>(axis) * frames_ + n) * joints_ + j;
  }

  void applyImpl(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override {
    for (int j = 0; j < joints_; ++j) {
      for (int c = 0; c < 3; ++c) {
        out[3 * static_cast<Eigen::Index>(j) + c] =
            v[flat(c, 0, j)] - v[flat(c, frames_ - 1, j)];
      }
    }
  }
  void adjointImpl(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    for (int j = 0; j < joints_; ++j) {
      for (int c = 0; c < 3; ++c) {
        const double w = u[3 * static_cast<Eigen::Index>(j) + c];
        out[flat(c, 0, j)] += w;
        out[flat(c, frames_ - 1, j)] -= w;
      }
    }
  }

  int frames_;
  int joints_;
};

class RelativeOffsetOp final : public LinOp {
 public:
  RelativeOffsetOp(int joint_a, int joint_b, std::vector<int> frames_sel,
                   int frames, int joints)
      : LinOp(OpKind::JointDifference,
              3 * static_cast<Eigen::Index>(frames_sel.size()),
              static_cast<Eigen::Index>(3) * frames * joints),
        joint_a_(joint_a),
        joint_b_(joint_b),
        frames_sel_(std::move(frames_sel)),
        frames_(frames),
        joints_(joints) {
    if (joint_a_ == joint_b_) {
      throw ValidationError("relative offset: joints must differ");
    }
    if (joint_a_ < 0 || joint_a_ >= joints_ || joint_b_ < 0 ||
        joint_b_ >= joints_) {
      throw ValidationError("relative offset: joint index out of range");
    }
    for (const int n : frames_sel_) {
      if (n < 0 || n >= frames_) {
        throw ValidationError("relative offset: frame index out of range");
      }
    }
  }

 private:
  Eigen::Index flat(int axis, int n, int j) const {
    return (static_cast<Eigen::Index>(axis) * frames_ + n) * joints_ + j;
  }

  void applyImpl(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override {
    for (std::size_t k = 0; k < frames_sel_.size(); ++k) {
      const int n = frames_sel_[k];
      for (int c = 0; c < 3; ++c) {
        out[3 * static_cast<Eigen::Index>(k) + c] =
            v[flat(c, n, joint_a_)] - v[flat(c, n, joint_b_)];
      }
    }
  }
  void adjointImpl(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    for (std::size_t k = 0; k < frames_sel_.size(); ++k) {
      const int n = frames_sel_[k];
      for (int c = 0; c < 3; ++c) {
        const double w = u[3 * static_cast<Eigen::Index>(k) + c];
        out[flat(c, n, joint_a_)] += w;
        out[flat(c, n, joint_b_)] -= w;
      }
    }
  }

  int joint_a_;
  int joint_b_;
  std::vector<int> frames_sel_;
  int frames_;
  int joints_;
};

class StackOp final : public LinOp {
 public:
  explicit StackOp(std::vector<LinOpPtr> parts)
      : LinOp(OpKind::RowStack, totalRows(parts), sharedCols(parts)),
        parts_(std::move(parts)) {}

 private:
  static Eigen::Index totalRows(const std::vector<LinOpPtr>& parts) {
    Eigen::Index m = 0;
    for (const auto& p : parts) m += p->rows();
    return m;
  }
  static Eigen::Index sharedCols(const std::vector<LinOpPtr>& parts) {
    if (parts.empty()) throw ValidationError("stack: no parts");
    const Eigen::Index d = parts.front()->cols();
    for (const auto& p : parts) {
      if (p->cols() != d) {
        throw DimensionError("stack: parts disagree on input dimension");
      }
    }
    return d;
  }

  void applyImpl(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override {
    Eigen::Index at = 0;
    for (const auto& p : parts_) {
      out.segment(at, p->rows()) = p->apply(v);
      at += p->rows();
    }
  }
  void adjointImpl(const Eigen::VectorXd& u, Eigen::VectorXd& out) const override {
    Eigen::Index at = 0;
    for (const auto& p : parts_) {
      out += p->adjoint(u.segment(at, p->rows()));
      at += p->rows();
    }
  }

  std::vector<LinOpPtr> parts_;
};

}  // namespace

Camera::Camera(double scale_in, const Eigen::Matrix3d& rotation_in)
    : scale(scale_in), rotation(rotation_in) {
  if (!(scale > 0.0)) throw ValidationError("camera: scale must be positive");
  const double ortho_err =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (ortho_err > 1e-8) {
    throw ValidationError("camera: invalid rotation (orthogonality violated "
                          "beyond 1e-8)");
  }
  if (rotation.determinant() < 0.0) {
    throw ValidationError("camera: rotation must have determinant +1");
  }
}

Camera Camera::fromEuler(double yaw_deg, double pitch_deg, double roll_deg,
                         double scale) {
  const double deg = M_PI / 180.0;
  const Eigen::Matrix3d yaw =
      Eigen::AngleAxisd(yaw_deg * deg, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d pitch =
      Eigen::AngleAxisd(pitch_deg * deg, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d roll =
      Eigen::AngleAxisd(roll_deg * deg, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return Camera(scale, yaw * pitch * roll);
}

LinOpPtr maskOp(std::vector<Eigen::Index> indices, Eigen::Index d) {
  return std::make_shared<MaskOp>(std::move(indices), d);
}

LinOpPtr maskOp(const std::vector<VecIndex>& indices, int frames, int joints) {
  std::vector<Eigen::Index> flat;
  flat.reserve(indices.size());
  for (const VecIndex& idx : indices) {
    idx.validate(frames, joints);
    flat.push_back(idx.flat(frames, joints));
  }
  return maskOp(std::move(flat),
                static_cast<Eigen::Index>(3) * frames * joints);
}

LinOpPtr orthographicOp(const Camera& camera,
                        std::vector<std::pair<int, int>> frame_joints,
                        int frames, int joints) {
  return std::make_shared<OrthographicOp>(camera, std::move(frame_joints),
                                          frames, joints);
}

LinOpPtr loopClosureOp(int frames, int joints) {
  return std::make_shared<LoopClosureOp>(frames, joints);
}

LinOpPtr relativeOffsetOp(int joint_a, int joint_b, std::vector<int> frames_sel,
                          int frames, int joints) {
  return std::make_shared<RelativeOffsetOp>(joint_a, joint_b,
                                            std::move(frames_sel), frames,
                                            joints);
}

LinOpPtr stackOps(std::vector<LinOpPtr> parts) {
  return std::make_shared<StackOp>(std::move(parts));
}

Eigen::MatrixXd materialize(const LinOp& op, Eigen::Index max_entries) {
  if (op.rows() * op.cols() > max_entries) {
    throw ValidationError("materialize: " + std::to_string(op.rows()) + " x " +
                          std::to_string(op.cols()) +
                          " exceeds the entry cap of " +
                          std::to_string(max_entries));
  }
  Eigen::MatrixXd dense(op.rows(), op.cols());
  Eigen::VectorXd basis = Eigen::VectorXd::Zero(op.cols());
  for (Eigen::Index k = 0; k < op.cols(); ++k) {
    basis[k] = 1.0;
    dense.col(k) = op.apply(basis);
    basis[k] = 0.0;
  }
  return dense;
}

ConstraintSystem::ConstraintSystem(LinOpPtr op_in, Eigen::VectorXd target_in,
                                   Eigen::VectorXd sigma_diag_in)
    : op(std::move(op_in)),
      target(std::move(target_in)),
      sigma_diag(std::move(sigma_diag_in)) {
  if (!op) throw ValidationError("constraint system: null operator");
  if (target.size() != op->rows() || sigma_diag.size() != op->rows()) {
    throw DimensionError("constraint system: target/sigma length must equal "
                         "the operator row count");
  }
  if ((sigma_diag.array() < 0.0).any()) {
    throw ValidationError("constraint system: negative variance");
  }
}

Eigen::Index ConstraintSystem::hardRowCount() const {
  return (sigma_diag.array() == 0.0).count();
}

ConstraintSystem ConstraintSystem::unconstrained(Eigen::Index d) {
  return ConstraintSystem(maskOp(std::vector<Eigen::Index>{}, d),
                          Eigen::VectorXd(0), Eigen::VectorXd(0));
}

ConstraintSystem stackSystems(const std::vector<ConstraintSystem>& systems) {
  if (systems.empty()) throw ValidationError("stack: no systems");
  std::vector<LinOpPtr> parts;
  Eigen::Index m = 0;
  for (const auto& sys : systems) {
    parts.push_back(sys.op);
    m += sys.rows();
  }
  Eigen::VectorXd target(m);
  Eigen::VectorXd sigma(m);
  Eigen::Index at = 0;
  for (const auto& sys : systems) {
    target.segment(at, sys.rows()) = sys.target;
    sigma.segment(at, sys.rows()) = sys.sigma_diag;
    at += sys.rows();
  }
  return ConstraintSystem(stackOps(std::move(parts)), std::move(target),
                          std::move(sigma));
}

}  // namespace projflow
