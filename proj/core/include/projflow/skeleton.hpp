#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace projflow {

/// Skeletal topology: a connected undirected graph over joints.
/// Edges are stored normalized (smaller index first) and sorted; joint
/// names are optional.  Instances are immutable after construction and
/// safe to share across threads.
class Skeleton {
 public:
  /// Throws ValidationError on out-of-range endpoints, self-loops,
  /// duplicate edges, or a disconnected graph.
  Skeleton(int joint_count, std::vector<std::pair<int, int>> edges,
           std::vector<std::string> joint_names = {});

  int jointCount() const { return joint_count_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  /// Empty when the skeleton was built without names.
  const std::vector<std::string>& jointNames() const { return joint_names_; }

  /// Index of a named joint, or -1 when unknown/unnamed.
  int jointIndex(std::string_view name) const;

  int degree(int joint) const;

  /// Unnormalized graph Laplacian L = D - A, J x J.
  Eigen::MatrixXd laplacian() const;

  bool operator==(const Skeleton& other) const {
    return joint_count_ == other.joint_count_ && edges_ == other.edges_;
  }

  /// Path graph 0-1-2-...-(J-1); handy in tests.
  static Skeleton chain(int joint_count);

 private:
  int joint_count_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::string> joint_names_;
};

using SkeletonPtr = std::shared_ptr<const Skeleton>;

}  // namespace projflow
