#include "projflow/skeleton.hpp"

#include <algorithm>
#include <queue>

#include "projflow/errors.hpp"

namespace projflow {

Skeleton::Skeleton(int joint_count, std::vector<std::pair<int, int>> edges,
                   std::vector<std::string> joint_names)
    : joint_count_(joint_count),
      edges_(std::move(edges)),
      joint_names_(std::move(joint_names)) {
  if (joint_count_ < 1) {
    throw ValidationError("skeleton: joint count must be positive");
  }
  if (!joint_names_.empty() &&
      static_cast<int>(joint_names_.size()) != joint_count_) {
    throw ValidationError("skeleton: joint_names length must equal joint count");
  }
  for (auto& [a, b] : edges_) {
    if (a < 0 || a >= joint_count_ || b < 0 || b >= joint_count_) {
      throw ValidationError("skeleton: edge endpoint out of range");
    }
    if (a == b) throw ValidationError("skeleton: self-loop edge");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ValidationError("skeleton: duplicate edge");
  }

  // connectivity (BFS from joint 0); required so the Laplacian has a
  // single zero eigenvalue
  std::vector<char> seen(joint_count_, 0);
  std::vector<std::vector<int>> adj(joint_count_);
  for (const auto& [a, b] : edges_) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        q.push(v);
      }
    }
  }
  if (reached != joint_count_) {
    throw ValidationError("skeleton: joint graph is not connected");
  }
}

int Skeleton::jointIndex(std::string_view name) const {
  for (std::size_t i = 0; i < joint_names_.size(); ++i) {
    if (joint_names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Skeleton::degree(int joint) const {
  int deg = 0;
  for (const auto& [a, b] : edges_) {
    deg += (a == joint) + (b == joint);
  }
  return deg;
}

Eigen::MatrixXd Skeleton::laplacian() const {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(joint_count_, joint_count_);
  for (const auto& [a, b] : edges_) {
    lap(a, a) += 1.0;
    lap(b, b) += 1.0;
    lap(a, b) -= 1.0;
    lap(b, a) -= 1.0;
  }
  return lap;
}

Skeleton Skeleton::chain(int joint_count) {
  std::vector<std::pair<int, int>> edges;
  for (int j = 0; j + 1 < joint_count; ++j) edges.emplace_back(j, j + 1);
  return Skeleton(joint_count, std::move(edges));
}

}  // namespace projflow
