#include "sparsesplat/io/ply.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparsesplat/error.hpp"
#include "sparsesplat/io/files.hpp"

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace sparsesplat::io {

namespace {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<Scalar> scalar_from_name(std::string_view name) {
  static const std::map<std::string_view, Scalar> names{
      {"char", Scalar::I8},    {"int8", Scalar::I8},     {"uchar", Scalar::U8},    {"uint8", Scalar::U8},
      {"short", Scalar::I16},  {"int16", Scalar::I16},   {"ushort", Scalar::U16},  {"uint16", Scalar::U16},
      {"int", Scalar::I32},    {"int32", Scalar::I32},   {"uint", Scalar::U32},    {"uint32", Scalar::U32},
      {"float", Scalar::F32},  {"float32", Scalar::F32}, {"double", Scalar::F64},  {"float64", Scalar::F64}};
  auto it = names.find(name);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8: case Scalar::U8: return 1;
    case Scalar::I16: case Scalar::U16: return 2;
    case Scalar::I32: case Scalar::U32: case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

bool is_integer(Scalar s) { return s != Scalar::F32 && s != Scalar::F64; }

struct Property {
  std::string name;
  Scalar type = Scalar::F32;
  bool is_list = false;
  Scalar count_type = Scalar::U8;
};

struct Element {
  std::string name;
  std::uint64_t count = 0;
  std::vector<Property> properties;

  int index_of(std::string_view prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop) return static_cast<int>(i);
    }
    return -1;
  }
};

struct Header {
  bool binary = false;
  std::vector<Element> elements;
  std::size_t data_offset = 0;
};

Header parse_header(std::string_view bytes) {
  Header h;
  std::size_t pos = 0;
  bool have_format = false;
  bool first = true;
  while (true) {
    if (pos >= bytes.size()) throw ParseError("PLY header has no end_header line", pos);
    const std::size_t line_start = pos;
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) throw ParseError("PLY header has no end_header line", bytes.size());
    std::string_view line = bytes.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;

    std::istringstream ls{std::string(line)};
    std::string keyword;
    ls >> keyword;
    if (first) {
      if (keyword != "ply") throw ParseError("missing PLY magic", line_start);
      first = false;
      continue;
    }
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        h.binary = false;
      } else if (fmt == "binary_little_endian") {
        h.binary = true;
      } else {
        throw ParseError("unsupported PLY format '" + fmt + "'", line_start);
      }
      have_format = true;
    } else if (keyword == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || !ls || count < 0) throw ParseError("malformed element line", line_start);
      e.count = static_cast<std::uint64_t>(count);
      h.elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (h.elements.empty()) throw ParseError("property declared before any element", line_start);
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        auto ct = scalar_from_name(count_type);
        auto it = scalar_from_name(item_type);
        if (!ct || !it || !is_integer(*ct) || p.name.empty()) throw ParseError("malformed list property", line_start);
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
      } else {
        ls >> p.name;
        auto t = scalar_from_name(type);
        if (!t || p.name.empty()) throw ParseError("unknown property type '" + type + "'", line_start);
        p.type = *t;
      }
      h.elements.back().properties.push_back(std::move(p));
    } else if (keyword == "end_header") {
      if (!have_format) throw ParseError("PLY header has no format line", line_start);
      h.data_offset = pos;
      return h;
    } else {
      throw ParseError("unexpected PLY header keyword '" + keyword + "'", line_start);
    }
  }
}

// Sequential reader over the payload that knows its byte position.
class Payload {
 public:
  Payload(std::string_view bytes, std::size_t start, bool binary) : bytes_(bytes), pos_(start), binary_(binary) {}

  double read(Scalar type) { return binary_ ? read_binary(type) : read_ascii(type); }
  std::size_t position() const { return pos_; }

 private:
  double read_binary(Scalar type) {
    const std::size_t n = scalar_size(type);
    if (pos_ + n > bytes_.size()) throw ParseError("PLY payload is truncated", bytes_.size());
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    switch (type) {
      case Scalar::I8: return static_cast<double>(static_cast<std::int8_t>(*p));
      case Scalar::U8: return static_cast<double>(static_cast<std::uint8_t>(*p));
      case Scalar::I16: return load<std::int16_t>(p);
      case Scalar::U16: return load<std::uint16_t>(p);
      case Scalar::I32: return load<std::int32_t>(p);
      case Scalar::U32: return load<std::uint32_t>(p);
      case Scalar::F32: return load<float>(p);
      case Scalar::F64: return load<double>(p);
    }
    return 0.0;
  }

  template <typename T>
  static double load(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  }

  double read_ascii(Scalar type) {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) throw ParseError("PLY payload is truncated", bytes_.size());
    const char* begin = bytes_.data() + pos_;
    const char* end = bytes_.data() + bytes_.size();
    double value = 0.0;
    const char* stop = nullptr;
    if (is_integer(type)) {
      long long iv = 0;
      auto r = std::from_chars(begin, end, iv);
      if (r.ec != std::errc()) throw ParseError("expected an integer in PLY payload", pos_);
      value = static_cast<double>(iv);
      stop = r.ptr;
    } else {
      auto r = std::from_chars(begin, end, value);
      if (r.ec != std::errc()) {
        // from_chars rejects inf/nan spellings some writers emit.
        const std::string token(begin, std::find_if(begin, end, [](char c) { return std::isspace(
                                                                   static_cast<unsigned char>(c)); }));
        if (token == "inf" || token == "+inf") value = INFINITY;
        else if (token == "-inf") value = -INFINITY;
        else if (token == "nan") value = NAN;
        else throw ParseError("expected a number in PLY payload", pos_);
        stop = begin + token.size();
      } else {
        stop = r.ptr;
      }
    }
    if (stop != end && !std::isspace(static_cast<unsigned char>(*stop))) {
      throw ParseError("malformed number in PLY payload", static_cast<std::size_t>(stop - bytes_.data()));
    }
    pos_ = static_cast<std::size_t>(stop - bytes_.data());
    return value;
  }

  std::string_view bytes_;
  std::size_t pos_;
  bool binary_;
};

constexpr std::array<const char*, 14> kGaussianProps{
    "x", "y", "z", "opacity_logit", "log_scale_x", "log_scale_y", "log_scale_z",
    "rot_w", "rot_x", "rot_y", "rot_z", "color_r", "color_g", "color_b"};

}  // namespace

PlyContent parse_ply(std::string_view bytes) {
  const Header h = parse_header(bytes);
  Payload payload(bytes, h.data_offset, h.binary);

  const Element* vertex = nullptr;
  std::vector<std::vector<double>> rows;
  for (const Element& e : h.elements) {
    const bool keep = e.name == "vertex" && !vertex;
    if (keep) {
      vertex = &e;
      rows.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(e.count, 1u << 24)));
    }
    for (std::uint64_t i = 0; i < e.count; ++i) {
      std::vector<double> row;
      if (keep) row.reserve(e.properties.size());
      for (const Property& p : e.properties) {
        if (p.is_list) {
          const double n = payload.read(p.count_type);
          if (!(n >= 0.0)) throw ParseError("negative PLY list length", payload.position());
          for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(n); ++k) payload.read(p.type);
          if (keep) row.push_back(0.0);
        } else {
          const double v = payload.read(p.type);
          if (keep) row.push_back(v);
        }
      }
      if (keep) rows.push_back(std::move(row));
    }
  }
  if (!vertex) throw ParseError("PLY file has no vertex element", h.data_offset);

  bool gaussian = true;
  for (const char* name : kGaussianProps) gaussian = gaussian && vertex->index_of(name) >= 0;
  if (gaussian) {
    std::array<int, kGaussianProps.size()> idx{};
    for (std::size_t k = 0; k < kGaussianProps.size(); ++k) idx[k] = vertex->index_of(kGaussianProps[k]);
    GaussianSet scene;
    scene.gaussians.reserve(rows.size());
    for (const auto& r : rows) {
      Gaussian g;
      g.mu = {r[idx[0]], r[idx[1]], r[idx[2]]};
      g.opacity_logit = r[idx[3]];
      g.log_scale = {r[idx[4]], r[idx[5]], r[idx[6]]};
      g.rot = Eigen::Quaterniond(r[idx[7]], r[idx[8]], r[idx[9]], r[idx[10]]);
      g.color = {r[idx[11]], r[idx[12]], r[idx[13]]};
      scene.gaussians.push_back(g);
    }
    return scene;
  }

  const int ix = vertex->index_of("x"), iy = vertex->index_of("y"), iz = vertex->index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x, y, z", h.data_offset);
  const int ir = vertex->index_of("red"), ig = vertex->index_of("green"), ib = vertex->index_of("blue");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;
  auto color_scale = [&](int i) { return is_integer(vertex->properties[i].type) ? 1.0 / 255.0 : 1.0; };
  PointCloud pc;
  pc.points.reserve(rows.size());
  pc.colors.reserve(rows.size());
  for (const auto& r : rows) {
    pc.points.emplace_back(r[ix], r[iy], r[iz]);
    if (has_color) {
      pc.colors.emplace_back(r[ir] * color_scale(ir), r[ig] * color_scale(ig), r[ib] * color_scale(ib));
    } else {
      pc.colors.emplace_back(0.5, 0.5, 0.5);
    }
  }
  return pc;
}

PlyContent load_ply(const std::filesystem::path& path) {
  try {
    return parse_ply(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.reason(), e.offset());
  }
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  PlyContent c = load_ply(path);
  if (auto* pc = std::get_if<PointCloud>(&c)) return std::move(*pc);
  // A Gaussian checkpoint still carries usable positions and colors.
  const auto& scene = std::get<GaussianSet>(c);
  PointCloud pc;
  for (const Gaussian& g : scene.gaussians) {
    pc.points.push_back(g.mu);
    pc.colors.push_back(g.color);
  }
  return pc;
}

GaussianSet load_gaussians(const std::filesystem::path& path) {
  PlyContent c = load_ply(path);
  if (auto* scene = std::get_if<GaussianSet>(&c)) return std::move(*scene);
  throw ParseError(path.string() + ": vertex element lacks Gaussian properties", 0);
}

namespace {

std::string header(PlyFormat format, std::size_t count, const std::vector<std::string>& props) {
  std::string h = "ply\nformat ";
  h += format == PlyFormat::Ascii ? "ascii 1.0\n" : "binary_little_endian 1.0\n";
  h += "element vertex " + std::to_string(count) + "\n";
  for (const auto& p : props) h += "property " + p + "\n";
  h += "end_header\n";
  return h;
}

void append_double(std::string& out, double v, PlyFormat format, bool last) {
  if (format == PlyFormat::Ascii) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, r.ptr);
    out += last ? '\n' : ' ';
  } else {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
  }
}

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(std::isfinite(c) ? c : 0.0, 0.0, 1.0) * 255.0));
}

}  // namespace

std::string serialize_point_cloud(const PointCloud& pc, PlyFormat format) {
  pc.validate();
  std::string out = header(format, pc.size(),
                           {"double x", "double y", "double z", "uchar red", "uchar green", "uchar blue"});
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) append_double(out, pc.points[i][k], format, false);
    for (int k = 0; k < 3; ++k) {
      const std::uint8_t b = to_byte(pc.colors[i][k]);
      if (format == PlyFormat::Ascii) {
        out += std::to_string(b);
        out += k == 2 ? '\n' : ' ';
      } else {
        out += static_cast<char>(b);
      }
    }
  }
  return out;
}

std::string serialize_gaussians(const GaussianSet& scene, PlyFormat format) {
  std::vector<std::string> props;
  for (const char* name : kGaussianProps) props.push_back(std::string("double ") + name);
  std::string out = header(format, scene.size(), props);
  for (const Gaussian& g : scene.gaussians) {
    const std::array<double, 14> v{g.mu.x(), g.mu.y(), g.mu.z(), g.opacity_logit,
                                   g.log_scale.x(), g.log_scale.y(), g.log_scale.z(),
                                   g.rot.w(), g.rot.x(), g.rot.y(), g.rot.z(),
                                   g.color.x(), g.color.y(), g.color.z()};
    for (std::size_t k = 0; k < v.size(); ++k) append_double(out, v[k], format, k + 1 == v.size());
  }
  return out;
}

void save_point_cloud(const std::filesystem::path& path, const PointCloud& pc, PlyFormat format) {
  write_file(path, serialize_point_cloud(pc, format));
}

void save_gaussians(const std::filesystem::path& path, const GaussianSet& scene, PlyFormat format) {
  write_file(path, serialize_gaussians(scene, format));
}

}  // namespace sparsesplat::io
