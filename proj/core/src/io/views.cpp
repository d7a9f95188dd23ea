#include "sparsesplat/io/views.hpp"

#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "sparsesplat/error.hpp"
#include "sparsesplat/io/files.hpp"
#include "sparsesplat/io/image_io.hpp"

namespace sparsesplat::io {

namespace {

using nlohmann::json;

std::string number(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

bool parse_double(std::string_view s, double& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

}  // namespace

CameraView PoseRecord::to_view() const {
  intrinsics.validate();
  return {intrinsics, Pose(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), Eigen::Vector3d(t[0], t[1], t[2])), id};
}

std::vector<PoseRecord> parse_pose_records(std::string_view text) {
  std::vector<PoseRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t line_start = pos;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<std::pair<std::string_view, std::size_t>> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) tokens.emplace_back(line.substr(start, i - start), line_start + start);
    }
    if (tokens.empty()) continue;
    if (tokens.size() != 14) {
      throw ParseError("pose line " + std::to_string(line_no) + " has " + std::to_string(tokens.size()) +
                           " fields, expected 14",
                       line_start);
    }
    PoseRecord r;
    r.id = std::string(tokens[0].first);
    r.line = line_no;
    double v[11];
    for (int k = 0; k < 11; ++k) {
      if (!parse_double(tokens[k + 1].first, v[k])) {
        throw ParseError("bad number '" + std::string(tokens[k + 1].first) + "' in pose line " +
                             std::to_string(line_no),
                         tokens[k + 1].second);
      }
    }
    for (int k = 0; k < 4; ++k) r.q[k] = v[k];
    for (int k = 0; k < 3; ++k) r.t[k] = v[4 + k];
    r.intrinsics.fx = v[7];
    r.intrinsics.fy = v[8];
    r.intrinsics.cx = v[9];
    r.intrinsics.cy = v[10];
    if (!parse_int(tokens[12].first, r.intrinsics.width) || !parse_int(tokens[13].first, r.intrinsics.height)) {
      throw ParseError("bad image size in pose line " + std::to_string(line_no), tokens[12].second);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CameraView> parse_pose_file(std::string_view text) {
  std::vector<CameraView> views;
  for (const PoseRecord& r : parse_pose_records(text)) views.push_back(r.to_view());
  return views;
}

std::string serialize_pose_file(const std::vector<CameraView>& views) {
  std::string out = "# id qw qx qy qz tx ty tz fx fy cx cy w h\n";
  for (const CameraView& v : views) {
    if (v.id.empty() || v.id.find_first_of(" \t\r\n#") != std::string::npos) {
      throw InvalidArgument("view id '" + v.id + "' cannot be written to a pose file");
    }
    const auto& q = v.pose.rotation();
    const auto& t = v.pose.translation();
    const auto& k = v.intrinsics;
    out += v.id;
    for (double d : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z(), k.fx, k.fy, k.cx, k.cy}) out += " " + number(d);
    out += " " + std::to_string(k.width) + " " + std::to_string(k.height) + "\n";
  }
  return out;
}

std::vector<CameraView> load_pose_file(const std::filesystem::path& path) {
  try {
    return parse_pose_file(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.reason(), e.offset());
  }
}

void save_pose_file(const std::filesystem::path& path, const std::vector<CameraView>& views) {
  write_file(path, serialize_pose_file(views));
}

ViewSet load_views(const std::filesystem::path& dir, bool require_depth) {
  const auto manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": invalid JSON", e.byte);
  }

  std::vector<std::string> problems;
  ViewSet set;
  if (!manifest.is_object() || !manifest.contains("views") || !manifest["views"].is_array()) {
    throw ValidationError({manifest_path.string() + ": expected an object with a views array"});
  }
  set.provenance = manifest.value("provenance", std::string("unknown"));
  const std::string poses_name = manifest.value("poses", std::string("poses.txt"));

  std::vector<PoseRecord> records;
  if (!manifest["views"].empty()) {
    try {
      records = parse_pose_records(read_file(dir / poses_name));
    } catch (const Error& e) {
      throw ValidationError({std::string("poses: ") + e.what()});
    }
  }

  std::set<std::string> seen;
  for (const json& entry : manifest["views"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string()) {
      problems.push_back("manifest view entry without a string id");
      continue;
    }
    const std::string id = entry["id"].get<std::string>();
    const std::string where = "view " + id + ": ";
    if (!seen.insert(id).second) problems.push_back(where + "duplicate id");

    const PoseRecord* rec = nullptr;
    for (const auto& r : records) {
      if (r.id == id) rec = &r;
    }
    ViewData view;
    bool ok = true;
    if (!rec) {
      problems.push_back(where + "no entry in " + poses_name);
      ok = false;
    } else {
      const double qn = std::sqrt(rec->q[0] * rec->q[0] + rec->q[1] * rec->q[1] + rec->q[2] * rec->q[2] +
                                  rec->q[3] * rec->q[3]);
      bool finite = std::isfinite(qn);
      for (double t : rec->t) finite = finite && std::isfinite(t);
      if (!finite) {
        problems.push_back(where + "pose is not finite");
        ok = false;
      } else if (std::abs(qn - 1.0) > 1e-3) {
        problems.push_back(where + "quaternion norm " + number(qn) + " is not 1");
        ok = false;
      }
      try {
        if (ok) view.camera = rec->to_view();
      } catch (const Error& e) {
        problems.push_back(where + e.what());
        ok = false;
      }
    }
    const int w = rec ? rec->intrinsics.width : 0, h = rec ? rec->intrinsics.height : 0;

    auto load = [&](const char* key, bool required, bool is_png, int channels) -> std::optional<Image> {
      if (!entry.contains(key) || entry[key].is_null()) {
        if (required) problems.push_back(where + "missing " + key + " entry");
        return std::nullopt;
      }
      if (!entry[key].is_string()) {
        problems.push_back(where + key + " must be a path string");
        return std::nullopt;
      }
      const auto path = dir / entry[key].get<std::string>();
      if (!std::filesystem::exists(path)) {
        problems.push_back(where + key + " file " + path.string() + " does not exist");
        return std::nullopt;
      }
      try {
        Image img = is_png ? load_png(path) : load_pfm(path);
        if (img.channels() != channels) {
          problems.push_back(where + key + " has " + std::to_string(img.channels()) + " channels, expected " +
                             std::to_string(channels));
          return std::nullopt;
        }
        if (rec && (img.width() != w || img.height() != h)) {
          problems.push_back(where + key + " is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                             ", intrinsics say " + std::to_string(w) + "x" + std::to_string(h));
          return std::nullopt;
        }
        return img;
      } catch (const Error& e) {
        problems.push_back(where + key + ": " + e.what());
        return std::nullopt;
      }
    };
    auto image = load("image", true, true, 3);
    view.depth = load("depth", require_depth, false, 1);
    view.pointmap = load("pointmap", false, true, 3);
    view.confidence = load("confidence", false, false, 1);
    if (ok && image) {
      view.image = std::move(*image);
      set.views.push_back(std::move(view));
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return set;
}

void save_views(const std::filesystem::path& dir, const ViewSet& views) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["provenance"] = views.provenance;
  manifest["poses"] = "poses.txt";
  manifest["views"] = json::array();
  for (const ViewData& v : views.views) {
    const std::string& id = v.camera.id;
    json entry;
    entry["id"] = id;
    entry["image"] = "images/" + id + ".png";
    save_png(dir / "images" / (id + ".png"), v.image);
    if (v.depth) {
      entry["depth"] = "depth/" + id + ".pfm";
      save_pfm(dir / "depth" / (id + ".pfm"), *v.depth);
    }
    if (v.pointmap) {
      entry["pointmap"] = "pointmap/" + id + ".png";
      save_png(dir / "pointmap" / (id + ".png"), *v.pointmap);
    }
    if (v.confidence) {
      entry["confidence"] = "confidence/" + id + ".pfm";
      save_pfm(dir / "confidence" / (id + ".pfm"), *v.confidence);
    }
    manifest["views"].push_back(std::move(entry));
  }
  save_pose_file(dir / "poses.txt", views.cameras());
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

PseudoViewBundle load_bundle(const std::filesystem::path& dir) { return load_views(dir, true); }

void save_bundle(const std::filesystem::path& dir, const PseudoViewBundle& bundle) {
  for (const auto& v : bundle.views) {
    if (!v.depth) throw InvalidArgument("pseudo view " + v.camera.id + " has no reference depth");
  }
  save_views(dir, bundle);
}

}  // namespace sparsesplat::io
