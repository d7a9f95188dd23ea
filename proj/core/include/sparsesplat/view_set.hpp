#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparsesplat/geometry.hpp"
#include "sparsesplat/image.hpp"

namespace sparsesplat {

struct ViewData {
  CameraView camera;
  Image image;                     // H x W x 3
  std::optional<Image> depth;      // reference depth; +inf marks no data
  std::optional<Image> pointmap;   // rendered pointmap, H x W x 3
  std::optional<Image> confidence;
};

struct ViewSet {
  std::string provenance = "synthetic-oracle";
  std::vector<ViewData> views;

  std::vector<CameraView> cameras() const {
    std::vector<CameraView> out;
    out.reserve(views.size());
    for (const auto& v : views) out.push_back(v.camera);
    return out;
  }
};

// Pseudo views: a view set in which every view carries a reference depth.
using PseudoViewBundle = ViewSet;

}  // namespace sparsesplat
