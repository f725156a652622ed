#include "endo/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <type_traits>
#include <variant>

namespace endo {

namespace {

// Seeds take the full 64-bit range without the double range check. A
// wrapper keeps them apart from size_t, which may be the same type.
struct SeedField {
  std::uint64_t* p;
};
using Ref = std::variant<double*, int*, std::size_t*, SeedField>;

struct Key {
  const char* name;
  Ref (*ref)(RunConfig&);
  double lo, hi;
  bool lo_open = false, hi_open = false;  // exclusive bounds
};

constexpr double kMaxCount = 1e7;
constexpr double kNoMax = std::numeric_limits<double>::infinity();

// clang-format off
const Key kKeys[] = {
  {"seed",                 [](RunConfig& c) -> Ref { return SeedField{&c.seed}; }, 0, kNoMax},
  {"n_synth",              [](RunConfig& c) -> Ref { return &c.n_synth; }, 1, kMaxCount},
  {"n_real",               [](RunConfig& c) -> Ref { return &c.n_real; }, 1, kMaxCount},
  {"heldout_pairs",        [](RunConfig& c) -> Ref { return &c.heldout_pairs; }, 1, kMaxCount},
  // rendering
  {"width",                [](RunConfig& c) -> Ref { return &c.data.view.width; }, 8, 1024},
  {"height",               [](RunConfig& c) -> Ref { return &c.data.view.height; }, 8, 1024},
  {"fov_degrees",          [](RunConfig& c) -> Ref { return &c.data.view.fov_degrees; }, 10, 170},
  {"max_jitter_degrees",   [](RunConfig& c) -> Ref { return &c.data.view.max_jitter_degrees; }, 0, 90},
  {"max_lateral_offset",   [](RunConfig& c) -> Ref { return &c.data.view.max_lateral_offset; }, 0, 0.9},
  {"light_intensity",      [](RunConfig& c) -> Ref { return &c.data.view.total_intensity; }, 0, 100, true},
  {"light_offset",         [](RunConfig& c) -> Ref { return &c.data.view.light_offset; }, 0, 0.5, true},
  {"max_distance",         [](RunConfig& c) -> Ref { return &c.data.render.max_distance; }, 0, 1e6, true},
  {"max_steps",            [](RunConfig& c) -> Ref { return &c.data.render.max_steps; }, 1, 1e6},
  {"tube_radius",          [](RunConfig& c) -> Ref { return &c.data.scene.radius; }, 0, 100, true},
  {"radius_variation",     [](RunConfig& c) -> Ref { return &c.data.scene.radius_variation; }, 0, 0.9},
  {"fold_amplitude",       [](RunConfig& c) -> Ref { return &c.data.scene.fold_amplitude; }, 0, 0.5},
  {"fold_frequency",       [](RunConfig& c) -> Ref { return &c.data.scene.fold_frequency; }, 0, 10},
  // pseudo-real texture
  {"texture_strength",     [](RunConfig& c) -> Ref { return &c.data.texture_strength; }, 0, 1},
  {"texture_fine_cell",    [](RunConfig& c) -> Ref { return &c.data.texture.fine_cell; }, 1, 64},
  {"texture_coarse_cell",  [](RunConfig& c) -> Ref { return &c.data.texture.coarse_cell; }, 1, 64},
  {"texture_noise_weight", [](RunConfig& c) -> Ref { return &c.data.texture.noise_weight; }, 0, 1},
  {"texture_streaks",      [](RunConfig& c) -> Ref { return &c.data.texture.streaks; }, 0, 1000},
  {"texture_streak_width", [](RunConfig& c) -> Ref { return &c.data.texture.streak_width; }, 0, 10, true},
  // superpixels and CRF
  {"p_target",             [](RunConfig& c) -> Ref { return &c.crf.slic.p_target; }, 2, 1e5},
  {"compactness",          [](RunConfig& c) -> Ref { return &c.crf.slic.compactness; }, 0, 100, true},
  {"slic_iterations",      [](RunConfig& c) -> Ref { return &c.crf.slic.iterations; }, 1, 100},
  {"gamma1",               [](RunConfig& c) -> Ref { return &c.crf.graph.gamma1; }, 0, 1e3},
  {"gamma2",               [](RunConfig& c) -> Ref { return &c.crf.graph.gamma2; }, 0, 1e3},
  {"histogram_bins",       [](RunConfig& c) -> Ref { return &c.crf.graph.histogram_bins; }, 2, 256},
  {"lambda_beta",          [](RunConfig& c) -> Ref { return &c.crf.lambda_beta; }, 0, 1e6},
  {"unary_conv1",          [](RunConfig& c) -> Ref { return &c.crf.net.conv1; }, 1, 512},
  {"unary_conv2",          [](RunConfig& c) -> Ref { return &c.crf.net.conv2; }, 1, 512},
  {"unary_conv3",          [](RunConfig& c) -> Ref { return &c.crf.net.conv3; }, 1, 512},
  {"unary_fc1",            [](RunConfig& c) -> Ref { return &c.crf.net.fc1; }, 1, 4096},
  {"unary_fc2",            [](RunConfig& c) -> Ref { return &c.crf.net.fc2; }, 1, 4096},
  // depth training
  {"learning_rate",        [](RunConfig& c) -> Ref { return &c.crf_train.sgd.learning_rate; }, 0, 1, true},
  {"momentum",             [](RunConfig& c) -> Ref { return &c.crf_train.sgd.momentum; }, 0, 1, false, true},
  {"weight_decay",         [](RunConfig& c) -> Ref { return &c.crf_train.sgd.weight_decay; }, 0, 1},
  {"lr_decay_factor",      [](RunConfig& c) -> Ref { return &c.crf_train.sgd.lr_decay_factor; }, 0, 1, true},
  {"lr_decay_every",       [](RunConfig& c) -> Ref { return &c.crf_train.sgd.lr_decay_every; }, 1, 1e6},
  {"epochs",               [](RunConfig& c) -> Ref { return &c.crf_train.epochs; }, 1, 1e4},
  // adaptation
  {"lambda",               [](RunConfig& c) -> Ref { return &c.da.lambda; }, 0, 1e9, true},
  {"buffer_capacity",      [](RunConfig& c) -> Ref { return &c.da.buffer_capacity; }, 1, 1e6},
  {"batch",                [](RunConfig& c) -> Ref { return &c.da.batch; }, 2, 1024},
  {"n_t",                  [](RunConfig& c) -> Ref { return &c.da.n_t; }, 1, 100},
  {"n_d",                  [](RunConfig& c) -> Ref { return &c.da.n_d; }, 1, 100},
  {"steps",                [](RunConfig& c) -> Ref { return &c.da.steps; }, 0, kMaxCount},
  {"pretrain_t",           [](RunConfig& c) -> Ref { return &c.da.pretrain_t; }, 0, kMaxCount},
  {"pretrain_d",           [](RunConfig& c) -> Ref { return &c.da.pretrain_d; }, 0, kMaxCount},
  {"lr_t",                 [](RunConfig& c) -> Ref { return &c.da.lr_t; }, 0, 1, true},
  {"lr_d",                 [](RunConfig& c) -> Ref { return &c.da.lr_d; }, 0, 1, true},
  {"da_momentum",          [](RunConfig& c) -> Ref { return &c.da.momentum; }, 0, 1, false, true},
  {"crop",                 [](RunConfig& c) -> Ref { return &c.da.crop; }, 0, 1024},
  {"t_channels",           [](RunConfig& c) -> Ref { return &c.da.transformer.channels; }, 1, 256},
  {"t_blocks",             [](RunConfig& c) -> Ref { return &c.da.transformer.blocks; }, 0, 64},
  {"t_sharpness",          [](RunConfig& c) -> Ref { return &c.da.transformer.sharpness; }, 0, 1e4, true},
  {"d_conv1",              [](RunConfig& c) -> Ref { return &c.da.discriminator.conv1; }, 1, 512},
  {"d_conv2",              [](RunConfig& c) -> Ref { return &c.da.discriminator.conv2; }, 1, 512},
  {"d_conv3",              [](RunConfig& c) -> Ref { return &c.da.discriminator.conv3; }, 1, 512},
  {"d_conv4",              [](RunConfig& c) -> Ref { return &c.da.discriminator.conv4; }, 1, 512},
};
// clang-format on

const Key& find_key(const std::string& name) {
  for (const auto& k : kKeys)
    if (name == k.name) return k;
  throw ConfigError(name, "unknown key");
}

std::string range_text(const Key& k) {
  std::ostringstream os;
  os << (k.lo_open ? "(" : "[") << k.lo << ", ";
  if (k.hi == kNoMax) {
    os << "inf)";
  } else {
    os << k.hi << (k.hi_open ? ")" : "]");
  }
  return os.str();
}

template <class T>
T parse_number(const Key& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key.name, "cannot parse '" + text + "'");
  return v;
}

void check_range(const Key& key, double v, const std::string& text) {
  const bool ok = (key.lo_open ? v > key.lo : v >= key.lo) && (key.hi_open ? v < key.hi : v <= key.hi);
  if (!ok) throw ConfigError(key.name, "value " + text + " outside " + range_text(key));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : kKeys) v.emplace_back(k.name);
    return v;
  }();
  return names;
}

void RunConfig::set(const std::string& key_name, const std::string& raw) {
  const Key& key = find_key(key_name);
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError(key.name, "empty value");
  std::visit(
      [&](auto field) {
        using T = std::remove_pointer_t<decltype(field)>;
        if constexpr (std::is_same_v<decltype(field), SeedField>) {
          *field.p = parse_number<std::uint64_t>(key, text);
        } else if constexpr (std::is_same_v<T, double>) {
          const double v = parse_number<double>(key, text);
          if (!std::isfinite(v)) throw ConfigError(key.name, "value must be finite");
          check_range(key, v, text);
          *field = v;
        } else {
          const long long v = parse_number<long long>(key, text);
          check_range(key, static_cast<double>(v), text);
          *field = static_cast<T>(v);
        }
      },
      key.ref(*this));
}

void RunConfig::validate() const {
  auto wrap = [](const char* key, auto&& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  };
  wrap("batch", [&] {
    if (da.batch % 2 != 0) throw std::invalid_argument("batch must be even");
  });
  wrap("crop", [&] {
    if (da.crop != 0 && (da.crop < 8 || da.crop > data.view.width || da.crop > data.view.height)) {
      throw std::invalid_argument("crop must be 0 or in [8, min(width, height)]");
    }
  });
  wrap("texture_coarse_cell", [&] {
    if (data.texture.coarse_cell < data.texture.fine_cell) {
      throw std::invalid_argument("coarse cell smaller than fine cell");
    }
  });
  wrap("p_target", [&] {
    if (static_cast<std::size_t>(crf.slic.p_target) > data.view.width * data.view.height) {
      throw std::invalid_argument("more superpixels than pixels");
    }
  });
  wrap("lambda", [&] { adaptation().validate(); });
  wrap("learning_rate", [&] { depth_training().validate(); });
  wrap("p_target", [&] { crf.validate(); });
  wrap("tube_radius", [&] { data.scene.validate(); });
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  RunConfig& self = const_cast<RunConfig&>(*this);  // read-only use of the accessors
  for (const auto& k : kKeys) {
    os << k.name << '=';
    std::visit(
        [&](auto field) {
          if constexpr (std::is_same_v<decltype(field), SeedField>) {
            os << *field.p;
          } else if constexpr (std::is_same_v<std::remove_pointer_t<decltype(field)>, double>) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", *field);
            os << buf;
          } else {
            os << *field;
          }
        },
        k.ref(self));
    os << '\n';
  }
  return os.str();
}

DatasetConfig RunConfig::synthetic_data() const {
  DatasetConfig d = data;
  d.textured = false;
  return d;
}

DatasetConfig RunConfig::pseudo_real_data() const {
  DatasetConfig d = data;
  d.textured = true;
  return d;
}

CrfTrainConfig RunConfig::depth_training() const {
  CrfTrainConfig c = crf_train;
  c.seed = seed;
  return c;
}

DaConfig RunConfig::adaptation() const {
  DaConfig c = da;
  c.seed = seed;
  c.transformer.width = data.view.width;
  c.transformer.height = data.view.height;
  return c;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(t, "line " + std::to_string(number) + " is not key=value");
    }
    base.set(trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace endo
