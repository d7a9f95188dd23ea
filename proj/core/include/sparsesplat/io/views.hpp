#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sparsesplat/geometry.hpp"
#include "sparsesplat/image.hpp"
#include "sparsesplat/view_set.hpp"

namespace sparsesplat::io {

// One line of a pose file, as written: `id qw qx qy qz tx ty tz fx fy cx cy w h`.
struct PoseRecord {
  std::string id;
  double q[4] = {1.0, 0.0, 0.0, 0.0};  // w, x, y, z; not normalized
  double t[3] = {0.0, 0.0, 0.0};
  Intrinsics intrinsics;
  std::size_t line = 0;

  CameraView to_view() const;
};

// Blank lines and `#` comments are skipped. Throws ParseError.
std::vector<PoseRecord> parse_pose_records(std::string_view text);
std::vector<CameraView> parse_pose_file(std::string_view text);
std::string serialize_pose_file(const std::vector<CameraView>& views);
std::vector<CameraView> load_pose_file(const std::filesystem::path& path);
void save_pose_file(const std::filesystem::path& path, const std::vector<CameraView>& views);

// A view directory holds manifest.json, poses.txt and the per-view files the
// manifest names (paths relative to the directory):
//
//   {"provenance": "...", "views": [{"id": "v0", "image": "images/v0.png",
//     "depth": "depth/v0.pfm", "pointmap": ..., "confidence": ...}]}
//
// Images are PNG; depth and confidence maps are single-channel PFM.
// load_views throws ValidationError listing every problem found: missing or
// unreadable files, shape mismatches against the intrinsics, non-finite
// poses, and quaternions whose norm is off by more than 1e-3.
ViewSet load_views(const std::filesystem::path& dir, bool require_depth = false);
void save_views(const std::filesystem::path& dir, const ViewSet& views);

// Like load_views, but every view must carry a reference depth.
PseudoViewBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const std::filesystem::path& dir, const PseudoViewBundle& bundle);

}  // namespace sparsesplat::io
