#pragma once

#include <filesystem>
#include <string>

#include "projflow/motion.hpp"
#include "projflow/skeleton.hpp"

namespace projflow {

/// Skeleton file: {"joints": [names...] | count, "edges": [[i,j],...]}.
/// Throws ParseError on malformed input, ValidationError on a topology
/// that violates the Skeleton invariants.
Skeleton loadSkeleton(const std::filesystem::path& path);
void saveSkeleton(const Skeleton& skeleton, const std::filesystem::path& path);

/// Motion file: {"fps": f, "skeleton": <inline object|path string>,
/// "frames": [[[x,y,z] * J] * N]}.  Frames are stored frame-major in the
/// file regardless of the canonical in-memory flat order.  Numbers are
/// written with full round-trip precision.
MotionSeq loadMotion(const std::filesystem::path& path);
void saveMotion(const MotionSeq& motion, const std::filesystem::path& path,
                bool inline_skeleton = true,
                const std::string& skeleton_path = "");

/// CSV export: header then one row per frame, columns j0_x,j0_y,j0_z,...
void exportCsv(const MotionSeq& motion, const std::filesystem::path& path);

}  // namespace projflow
