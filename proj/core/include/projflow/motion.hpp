#pragma once

#include <memory>

#include <Eigen/Core>

#include "projflow/skeleton.hpp"

namespace projflow {

/// Address of one scalar coordinate inside a motion sequence.
/// The canonical flat order is axis-slowest / joint-fastest:
///   flat = (axis * N + frame) * J + joint,
/// so that each contiguous J-block holds one (axis, frame) slice and
/// block-diagonal operators factor over joints.
struct VecIndex {
  int axis;   // 0=x, 1=y, 2=z
  int frame;  // [0, N)
  int joint;  // [0, J)

  Eigen::Index flat(int frames, int joints) const {
    return (static_cast<Eigen::Index>(axis) * frames + frame) * joints + joint;
  }

  static VecIndex fromFlat(Eigen::Index flat, int frames, int joints);

  /// Throws ValidationError when any component is out of range.
  void validate(int frames, int joints) const;

  bool operator==(const VecIndex&) const = default;
};

/// A motion sequence: N frames of J joints in world coordinates (meters).
/// Data is stored in the canonical flat order, so vectorize() is a copy.
/// Treat instances as immutable once shared between threads.
class MotionSeq {
 public:
  MotionSeq(SkeletonPtr skeleton, int frames, double fps = 20.0);
  MotionSeq(SkeletonPtr skeleton, int frames, Eigen::VectorXd canonical_data,
            double fps = 20.0);

  int frames() const { return frames_; }
  int joints() const { return skeleton_->jointCount(); }
  double fps() const { return fps_; }
  const SkeletonPtr& skeleton() const { return skeleton_; }

  Eigen::Index dim() const {
    return static_cast<Eigen::Index>(3) * frames_ * joints();
  }

  double at(int frame, int joint, int axis) const {
    return data_[VecIndex{axis, frame, joint}.flat(frames_, joints())];
  }
  double& at(int frame, int joint, int axis) {
    return data_[VecIndex{axis, frame, joint}.flat(frames_, joints())];
  }

  Eigen::Vector3d position(int frame, int joint) const {
    return {at(frame, joint, 0), at(frame, joint, 1), at(frame, joint, 2)};
  }
  void setPosition(int frame, int joint, const Eigen::Vector3d& p) {
    for (int c = 0; c < 3; ++c) at(frame, joint, c) = p[c];
  }

  /// Canonical flat view of the data (length 3*J*N).
  const Eigen::VectorXd& flat() const { return data_; }

  /// Throws ValidationError when any entry is non-finite.
  void checkFinite() const;

  bool approxEquals(const MotionSeq& other, double tol = 0.0) const;

 private:
  SkeletonPtr skeleton_;
  int frames_;
  double fps_;
  Eigen::VectorXd data_;
};

/// Copy of the canonical flat vector, length d = 3*J*N.
Eigen::VectorXd vectorize(const MotionSeq& motion);

/// Inverse of vectorize.  Throws DimensionError on a length mismatch.
MotionSeq devectorize(const Eigen::VectorXd& v, int frames,
                      SkeletonPtr skeleton, double fps = 20.0);

}  // namespace projflow
