#include "sparsesplat/io/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "sparsesplat/error.hpp"
#include "sparsesplat/io/files.hpp"

namespace sparsesplat::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct BadValue {
  std::string what;
};

double to_double(std::string_view v) {
  v = trim(v);
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw BadValue{"expected a number"};
  return out;
}

template <typename Int>
Int to_int(std::string_view v) {
  v = trim(v);
  Int out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw BadValue{"expected an integer"};
  return out;
}

bool to_bool(std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw BadValue{"expected true or false"};
}

std::vector<double> to_list(std::string_view v) {
  std::vector<double> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(to_double(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string show(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string show(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + show(v[i]);
  return out;
}

struct Key {
  const char* name;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define SS_DOUBLE(key, field)                                                          \
  Key{key, [](TrainConfig& c, std::string_view v) { c.field = to_double(v); },          \
      [](const TrainConfig& c) { return show(c.field); }}
#define SS_INT(key, field, type)                                                       \
  Key{key, [](TrainConfig& c, std::string_view v) { c.field = to_int<type>(v); },       \
      [](const TrainConfig& c) { return std::to_string(c.field); }}
#define SS_BOOL(key, field)                                                            \
  Key{key, [](TrainConfig& c, std::string_view v) { c.field = to_bool(v); },            \
      [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define SS_LIST(key, field)                                                            \
  Key{key, [](TrainConfig& c, std::string_view v) { c.field = to_list(v); },            \
      [](const TrainConfig& c) { return show(c.field); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      SS_INT("total_iters", total_iters, long),
      Key{"optimizer",
          [](TrainConfig& c, std::string_view v) {
            v = trim(v);
            if (v == "adam") c.optimizer = Optimizer::Adam;
            else if (v == "momentum") c.optimizer = Optimizer::Momentum;
            else throw BadValue{"expected adam or momentum"};
          },
          [](const TrainConfig& c) { return std::string(c.optimizer == Optimizer::Adam ? "adam" : "momentum"); }},
      SS_DOUBLE("momentum", momentum),
      SS_DOUBLE("adam_beta1", adam_beta1),
      SS_DOUBLE("adam_beta2", adam_beta2),
      SS_DOUBLE("adam_epsilon", adam_epsilon),
      SS_DOUBLE("lr_mu", lr.mu),
      SS_DOUBLE("lr_mu_final", lr.mu_final),
      SS_DOUBLE("lr_rot", lr.rot),
      SS_DOUBLE("lr_log_scale", lr.log_scale),
      SS_DOUBLE("lr_opacity", lr.opacity),
      SS_DOUBLE("lr_color", lr.color),
      SS_DOUBLE("lambda1", loss.weights.lambda1),
      SS_DOUBLE("lambda2", loss.weights.lambda2),
      SS_DOUBLE("lambda3", loss.weights.lambda3),
      SS_BOOL("regularize_real_views", loss.regularize_real_views),
      SS_LIST("mlcr_level_weights", loss.mlcr.level_weights),
      SS_DOUBLE("mlcr_top_weight", loss.mlcr.top_weight),
      SS_DOUBLE("asmg_alpha", loss.schedule.alpha),
      SS_DOUBLE("asmg_beta", loss.schedule.beta),
      SS_LIST("asmg_scales", loss.schedule.scales),
      SS_LIST("asmg_scale_weights", loss.schedule.scale_weights),
      SS_DOUBLE("mask_threshold", loss.schedule.mask_threshold),
      SS_BOOL("densify", densify.enabled),
      SS_INT("densify_interval", densify.interval, long),
      SS_INT("densify_start", densify.start_iter, long),
      SS_DOUBLE("densify_stop_fraction", densify.stop_fraction),
      SS_DOUBLE("densify_grad_threshold", densify.grad_threshold),
      SS_DOUBLE("densify_split_fraction", densify.split_fraction),
      SS_DOUBLE("split_scale_divisor", densify.split_scale_divisor),
      SS_DOUBLE("prune_min_opacity", densify.min_opacity),
      SS_INT("max_gaussians", densify.max_count, std::size_t),
      SS_DOUBLE("near_plane", render.near_plane),
      SS_DOUBLE("dilation", render.dilation),
      SS_DOUBLE("alpha_max", render.alpha_max),
      SS_DOUBLE("cutoff_power", render.cutoff_power),
      SS_INT("tile_size", render.tile_size, int),
      SS_INT("real_weight", real_weight, int),
      SS_INT("pseudo_weight", pseudo_weight, int),
      SS_INT("eval_interval", eval_interval, long),
      SS_INT("seed", seed, std::uint64_t),
  };
  return table;
}

#undef SS_DOUBLE
#undef SS_INT
#undef SS_BOOL
#undef SS_LIST

}  // namespace

TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* entry = nullptr;
    for (const Key& k : keys()) {
      if (key == k.name) entry = &k;
    }
    if (!entry) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    try {
      entry->set(cfg, value);
    } catch (const BadValue& e) {
      throw ConfigError(where + key + ": " + e.what + ", got '" + std::string(value) + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const TrainConfig& cfg) {
  std::string out;
  for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : keys()) out.emplace_back(k.name);
  return out;
}

}  // namespace sparsesplat::io
