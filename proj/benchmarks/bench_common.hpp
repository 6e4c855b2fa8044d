#pragma once

#include <memory>

#include "projflow/motion_io.hpp"
#include "projflow/skeleton.hpp"

namespace projflow::bench {

inline SkeletonPtr humanml22() {
  static const SkeletonPtr skeleton = std::make_shared<Skeleton>(
      loadSkeleton(std::string(PROJFLOW_DATA_DIR) + "/skeleton_humanml22.json"));
  return skeleton;
}

}  // namespace projflow::bench
