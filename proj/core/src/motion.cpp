#include "projflow/motion.hpp"

#include <string>

#include "projflow/errors.hpp"

namespace projflow {

VecIndex VecIndex::fromFlat(Eigen::Index flat, int frames, int joints) {
  const int joint = static_cast<int>(flat % joints);
  const Eigen::Index rest = flat / joints;
  const int frame = static_cast<int>(rest % frames);
  const int axis = static_cast<int>(rest / frames);
  return {axis, frame, joint};
}

void VecIndex::validate(int frames, int joints) const {
  if (axis < 0 || axis > 2 || frame < 0 || frame >= frames || joint < 0 ||
      joint >= joints) {
    throw ValidationError("vec index out of range: axis=" +
                          std::to_string(axis) + " frame=" +
                          std::to_string(frame) + " joint=" +
                          std::to_string(joint));
  }
}

MotionSeq::MotionSeq(SkeletonPtr skeleton, int frames, double fps)
    : skeleton_(std::move(skeleton)), frames_(frames), fps_(fps) {
  if (!skeleton_) throw ValidationError("motion: null skeleton");
  if (frames_ < 1) throw ValidationError("motion: frame count must be positive");
  data_ = Eigen::VectorXd::Zero(dim());
}

MotionSeq::MotionSeq(SkeletonPtr skeleton, int frames,
                     Eigen::VectorXd canonical_data, double fps)
    : skeleton_(std::move(skeleton)),
      frames_(frames),
      fps_(fps),
      data_(std::move(canonical_data)) {
  if (!skeleton_) throw ValidationError("motion: null skeleton");
  if (frames_ < 1) throw ValidationError("motion: frame count must be positive");
  if (data_.size() != dim()) {
    throw DimensionError("motion: data length " + std::to_string(data_.size()) +
                         " does not match 3*J*N = " + std::to_string(dim()));
  }
}

void MotionSeq::checkFinite() const {
  if (!data_.allFinite()) {
    throw ValidationError("motion: non-finite entry");
  }
}

bool MotionSeq::approxEquals(const MotionSeq& other, double tol) const {
  if (frames_ != other.frames_ || joints() != other.joints()) return false;
  return (data_ - other.data_).cwiseAbs().maxCoeff() <= tol;
}

Eigen::VectorXd vectorize(const MotionSeq& motion) { return motion.flat(); }

MotionSeq devectorize(const Eigen::VectorXd& v, int frames, SkeletonPtr skeleton,
                      double fps) {
  if (!skeleton) throw ValidationError("devectorize: null skeleton");
  const Eigen::Index want =
      static_cast<Eigen::Index>(3) * frames * skeleton->jointCount();
  if (v.size() != want) {
    throw DimensionError("devectorize: vector length " +
                         std::to_string(v.size()) + ", expected " +
                         std::to_string(want));
  }
  return MotionSeq(std::move(skeleton), frames, v, fps);
}

}  // namespace projflow
