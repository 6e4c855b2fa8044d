#include "projflow/motion_io.hpp"

#include <fstream>
#include <iomanip>
#include <utility>
#include <vector>

#include <json.hpp>

#include "projflow/errors.hpp"

namespace projflow {

using nlohmann::json;

namespace {

json readJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return j;
}

void writeJsonFile(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

Skeleton skeletonFromJson(const json& j) {
  if (!j.is_object() || !j.contains("edges")) {
    throw ParseError("skeleton: expected object with \"joints\" and \"edges\"");
  }
  int count = 0;
  std::vector<std::string> names;
  if (j.contains("joints")) {
    const auto& joints = j.at("joints");
    if (joints.is_number_integer()) {
      count = joints.get<int>();
    } else if (joints.is_array()) {
      names = joints.get<std::vector<std::string>>();
      count = static_cast<int>(names.size());
    } else {
      throw ParseError("skeleton: \"joints\" must be a name list or a count");
    }
  } else {
    throw ParseError("skeleton: missing \"joints\"");
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) {
      throw ParseError("skeleton: each edge must be a pair [i, j]");
    }
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return Skeleton(count, std::move(edges), std::move(names));
}

json skeletonToJson(const Skeleton& skeleton) {
  json j;
  if (!skeleton.jointNames().empty()) {
    j["joints"] = skeleton.jointNames();
  } else {
    j["joints"] = skeleton.jointCount();
  }
  json edges = json::array();
  for (const auto& [a, b] : skeleton.edges()) edges.push_back({a, b});
  j["edges"] = std::move(edges);
  return j;
}

}  // namespace

Skeleton loadSkeleton(const std::filesystem::path& path) {
  return skeletonFromJson(readJsonFile(path));
}

void saveSkeleton(const Skeleton& skeleton, const std::filesystem::path& path) {
  writeJsonFile(skeletonToJson(skeleton), path);
}

MotionSeq loadMotion(const std::filesystem::path& path) {
  const json j = readJsonFile(path);
  if (!j.contains("frames")) throw ParseError("motion: missing \"frames\"");

  SkeletonPtr skeleton;
  const auto& sk = j.at("skeleton");
  if (sk.is_string()) {
    std::filesystem::path ref = sk.get<std::string>();
    if (ref.is_relative() && !std::filesystem::exists(ref)) {
      ref = path.parent_path() / ref;
    }
    skeleton = std::make_shared<Skeleton>(loadSkeleton(ref));
  } else {
    skeleton = std::make_shared<Skeleton>(skeletonFromJson(sk));
  }

  const auto& frames = j.at("frames");
  if (!frames.is_array() || frames.empty()) {
    throw ParseError("motion: \"frames\" must be a non-empty array");
  }
  const int n = static_cast<int>(frames.size());
  const int joints = skeleton->jointCount();
  MotionSeq motion(skeleton, n, j.value("fps", 20.0));
  for (int f = 0; f < n; ++f) {
    const auto& frame = frames[f];
    if (static_cast<int>(frame.size()) != joints) {
      throw ParseError("motion: frame " + std::to_string(f) + " has " +
                       std::to_string(frame.size()) + " joints, expected " +
                       std::to_string(joints));
    }
    for (int q = 0; q < joints; ++q) {
      const auto& p = frame[q];
      if (!p.is_array() || p.size() != 3) {
        throw ParseError("motion: joint positions must be [x, y, z]");
      }
      for (int c = 0; c < 3; ++c) motion.at(f, q, c) = p[c].get<double>();
    }
  }
  motion.checkFinite();
  return motion;
}

void saveMotion(const MotionSeq& motion, const std::filesystem::path& path,
                bool inline_skeleton, const std::string& skeleton_path) {
  json j;
  j["fps"] = motion.fps();
  if (inline_skeleton) {
    j["skeleton"] = skeletonToJson(*motion.skeleton());
  } else {
    j["skeleton"] = skeleton_path;
  }
  json frames = json::array();
  for (int f = 0; f < motion.frames(); ++f) {
    json frame = json::array();
    for (int q = 0; q < motion.joints(); ++q) {
      frame.push_back({motion.at(f, q, 0), motion.at(f, q, 1), motion.at(f, q, 2)});
    }
    frames.push_back(std::move(frame));
  }
  j["frames"] = std::move(frames);
  writeJsonFile(j, path);
}

void exportCsv(const MotionSeq& motion, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  const char* axis_names = "xyz";
  for (int q = 0; q < motion.joints(); ++q) {
    for (int c = 0; c < 3; ++c) {
      if (q || c) out << ',';
      out << 'j' << q << '_' << axis_names[c];
    }
  }
  out << '\n';
  out << std::setprecision(17);
  for (int f = 0; f < motion.frames(); ++f) {
    for (int q = 0; q < motion.joints(); ++q) {
      for (int c = 0; c < 3; ++c) {
        if (q || c) out << ',';
        out << motion.at(f, q, c);
      }
    }
    out << '\n';
  }
}

}  // namespace projflow
