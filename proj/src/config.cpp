#include "spectrack/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "spectrack/csv.hpp"

namespace spectrack {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, value);
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

struct KeyDef {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
KeyDef number_key(const char* key, T ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_real(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

// Same as number_key but reaching into a nested struct.
template <class S, class T>
KeyDef nested_key(const char* key, S ExperimentConfig::*outer, T S::*member) {
  return {key, [outer, member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            (c.*outer).*member = parse_number<T>(k, v);
          },
          [outer, member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_real((c.*outer).*member);
            } else {
              return std::to_string((c.*outer).*member);
            }
          }};
}

template <class E>
KeyDef enum_key(const char* key, E ExperimentConfig::*member, std::vector<std::pair<std::string, E>> names) {
  return {key, [member, names](ExperimentConfig& c, const std::string& k, const std::string& v) {
            for (const auto& [n, e] : names) {
              if (n == v) {
                c.*member = e;
                return;
              }
            }
            bad_value(k, v);
          },
          [member, names](const ExperimentConfig& c) {
            for (const auto& [n, e] : names) {
              if (e == c.*member) return n;
            }
            return std::string("?");
          }};
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    t.push_back(number_key("width", &ExperimentConfig::width));
    t.push_back(number_key("height", &ExperimentConfig::height));
    t.push_back(number_key("num_gaussians", &ExperimentConfig::num_gaussians));
    t.push_back({"scene_file", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.scene_file = v; },
                 [](const ExperimentConfig& c) { return c.scene_file; }});
    t.push_back(number_key("control_points", &ExperimentConfig::control_points));

    t.push_back(nested_key("num_bands", &ExperimentConfig::anneal, &AnnealConfig::num_bands));
    t.push_back(nested_key("warmup", &ExperimentConfig::anneal, &AnnealConfig::warmup_frac));
    t.push_back({"banding",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v == "linear") {
                     c.anneal.mode = BandingMode::LinearFrequency;
                   } else if (v == "log") {
                     c.anneal.mode = BandingMode::LogIndex;
                   } else {
                     bad_value(k, v);
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.anneal.mode == BandingMode::LinearFrequency ? "linear" : "log");
                 }});
    t.push_back(number_key("phase_scale", &ExperimentConfig::phase_scale));
    t.push_back({"cutoff",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v == "none") {
                     c.cutoff = std::nullopt;
                   } else {
                     c.cutoff = parse_number<double>(k, v);
                   }
                 },
                 [](const ExperimentConfig& c) { return c.cutoff ? format_real(*c.cutoff) : std::string("none"); }});

    t.push_back(nested_key("lambda_image", &ExperimentConfig::losses, &LossWeights::lambda_image));
    t.push_back(nested_key("lambda_arap", &ExperimentConfig::losses, &LossWeights::lambda_arap));
    t.push_back(nested_key("lambda_spec_mask", &ExperimentConfig::losses, &LossWeights::lambda_spec_mask));
    t.push_back(nested_key("lambda_bce", &ExperimentConfig::losses, &LossWeights::lambda_bce));
    t.push_back(nested_key("add_pixel_loss", &ExperimentConfig::losses, &LossWeights::add_pixel_loss));
    t.push_back(nested_key("arap_start_iter", &ExperimentConfig::losses, &LossWeights::arap_start_iter));
    t.push_back({"spectral_metric",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v == "l1") {
                     c.losses.spectral_metric = SpectralMetric::L1;
                   } else if (v == "squared") {
                     c.losses.spectral_metric = SpectralMetric::Squared;
                   } else {
                     bad_value(k, v);
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.losses.spectral_metric == SpectralMetric::L1 ? "l1" : "squared");
                 }});

    t.push_back({"optimizer",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   if (v == "adam") {
                     c.optim.method = OptimMethod::Adam;
                   } else if (v == "gd") {
                     c.optim.method = OptimMethod::GradientDescent;
                   } else {
                     bad_value(k, v);
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.optim.method == OptimMethod::Adam ? "adam" : "gd");
                 }});
    t.push_back(nested_key("iterations", &ExperimentConfig::optim, &OptimConfig::total_iters));
    t.push_back(nested_key("deform_lr_init", &ExperimentConfig::optim, &OptimConfig::lr_init));
    t.push_back(nested_key("deform_lr_final", &ExperimentConfig::optim, &OptimConfig::lr_final));
    t.push_back(nested_key("beta1", &ExperimentConfig::optim, &OptimConfig::beta1));
    t.push_back(nested_key("beta2", &ExperimentConfig::optim, &OptimConfig::beta2));
    t.push_back(nested_key("epsilon", &ExperimentConfig::optim, &OptimConfig::epsilon));

    t.push_back(number_key("target_tx", &ExperimentConfig::target_tx));
    t.push_back(number_key("target_ty", &ExperimentConfig::target_ty));
    t.push_back(number_key("target_rotation_deg", &ExperimentConfig::target_rotation_deg));
    t.push_back(number_key("init_tx", &ExperimentConfig::init_tx));
    t.push_back(number_key("init_ty", &ExperimentConfig::init_ty));
    t.push_back(number_key("init_rotation_deg", &ExperimentConfig::init_rotation_deg));
    t.push_back({"log_steps",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   c.log_steps = parse_list<int>(k, v);
                 },
                 [](const ExperimentConfig& c) { return join(c.log_steps); }});

    t.push_back(number_key("shift_radius", &ExperimentConfig::shift_radius));
    t.push_back(number_key("shift_seed", &ExperimentConfig::shift_seed));
    t.push_back({"sweep_radii",
                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                   c.sweep_radii = parse_list<double>(k, v);
                 },
                 [](const ExperimentConfig& c) { return join(c.sweep_radii); }});

    t.push_back(number_key("theta_scale", &ExperimentConfig::theta_scale));
    t.push_back(number_key("pulse_sigma", &ExperimentConfig::pulse_sigma));
    t.push_back(number_key("theta0", &ExperimentConfig::theta0));
    t.push_back(number_key("target_theta", &ExperimentConfig::target_theta));
    t.push_back(number_key("static_band", &ExperimentConfig::static_band));

    t.push_back(number_key("theta_min", &ExperimentConfig::theta_min));
    t.push_back(number_key("theta_max", &ExperimentConfig::theta_max));
    t.push_back(number_key("samples", &ExperimentConfig::samples));
    t.push_back(enum_key<LandscapeLoss>("landscape_loss", &ExperimentConfig::landscape_loss,
                                        {{"pixel", LandscapeLoss::Pixel},
                                         {"static", LandscapeLoss::StaticBand},
                                         {"anneal_start", LandscapeLoss::AnnealStart},
                                         {"anneal_full", LandscapeLoss::AnnealFull}}));

    t.push_back(number_key("gradcheck_instances", &ExperimentConfig::gradcheck_instances));
    t.push_back(number_key("gradcheck_tolerance", &ExperimentConfig::gradcheck_tolerance));
    t.push_back(number_key("seed", &ExperimentConfig::seed));
    return t;
  }();
  return table;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Demo1D: return "demo1d";
    case ExperimentKind::Demo2D: return "demo2d";
    case ExperimentKind::Landscape: return "landscape";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::GradCheck: return "gradcheck";
    case ExperimentKind::SchedulePlot: return "schedule-plot";
  }
  return "?";
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  apply_preset(c, "desk");
  switch (kind) {
    case ExperimentKind::Demo1D:
    case ExperimentKind::Landscape:
      c.width = 200;
      c.height = 1;
      c.num_gaussians = 1;
      c.optim.lr_init = 1e-2;
      c.optim.lr_final = 1e-4;
      c.losses.add_pixel_loss = 1000;
      c.losses.spectral_metric = SpectralMetric::Squared;
      break;
    case ExperimentKind::Demo2D:
    case ExperimentKind::Sweep:
    case ExperimentKind::SchedulePlot:
      break;
    case ExperimentKind::GradCheck:
      c.width = 16;
      c.height = 12;
      c.num_gaussians = 4;
      c.anneal.num_bands = 3;
      c.control_points = 3;
      c.cutoff = std::nullopt;
      break;
  }
  if (kind == ExperimentKind::Sweep) {
    c.target_tx = c.target_ty = c.target_rotation_deg = 0.0;
  }
  return c;
}

void apply_preset(ExperimentConfig& c, const std::string& preset) {
  if (preset == "desk") {
    c.control_points = 16;
    c.optim.total_iters = 1500;
    c.losses.add_pixel_loss = 1000;
    c.losses.lambda_image = 1.0;
    c.losses.lambda_spec_mask = 0.3;
    c.losses.lambda_bce = 0.1;
    c.losses.lambda_arap = 1.0;
    c.losses.arap_start_iter = 1000;
    c.anneal.num_bands = 8;
    c.anneal.warmup_frac = 0.25;
    c.optim.lr_init = 1e-2;
    c.optim.lr_final = 1e-4;
  } else if (preset == "full") {
    c.control_points = 800;
    c.optim.total_iters = 10000;
    c.losses.add_pixel_loss = 7000;
    c.losses.lambda_image = 5000.0;
    c.losses.lambda_spec_mask = 0.3;
    c.losses.lambda_bce = 0.1;
    c.losses.lambda_arap = 1.0;
    c.losses.arap_start_iter = 1000;
    c.anneal.num_bands = 8;
    c.anneal.warmup_frac = 0.25;
    c.optim.lr_init = 1e-3;
    c.optim.lr_final = 5e-4;
  } else {
    throw ConfigError("invalid value '" + preset + "' for key 'preset'");
  }
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key == "preset") {
    apply_preset(config, value);
    return;
  }
  for (const auto& def : key_table()) {
    if (key == def.key) {
      def.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void load_config_text(ExperimentConfig& config, const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "preset"; });
  for (const auto& [k, v] : entries) set_config_value(config, k, v);
}

void load_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  load_config_text(config, buf.str());
}

void validate(const ExperimentConfig& c) {
  if (c.width < 1 || c.height < 1) throw ConfigError("width and height must be positive");
  if (c.num_gaussians < 1) throw ConfigError("num_gaussians must be positive");
  if (c.control_points < 1) throw ConfigError("control_points must be positive");
  if (c.losses.lambda_image < 0 || c.losses.lambda_arap < 0 || c.losses.lambda_spec_mask < 0 ||
      c.losses.lambda_bce < 0) {
    throw ConfigError("lambda weights must be non-negative");
  }
  if (c.losses.add_pixel_loss < 0 || c.losses.add_pixel_loss > c.optim.total_iters) {
    throw ConfigError("add_pixel_loss must lie in [0, iterations]");
  }
  if (!(c.phase_scale > 0.0)) throw ConfigError("phase_scale must be positive");
  if (c.cutoff && !(*c.cutoff > 0.0)) throw ConfigError("cutoff must be positive or none");
  validate(c.optim);
  AnnealConfig a = c.anneal;
  a.total_spectral_iters = std::max(1, c.losses.add_pixel_loss);
  validate(a);
  if (c.shift_radius < 0.0) throw ConfigError("shift_radius must be non-negative");
  for (double r : c.sweep_radii) {
    if (r < 0.0) throw ConfigError("sweep_radii must be non-negative");
  }
  if (!(c.theta_scale > 0.0) || !(c.pulse_sigma > 0.0)) throw ConfigError("theta_scale and pulse_sigma must be positive");
  if (c.samples < 2) throw ConfigError("samples must be at least 2");
  if (!(c.theta_max > c.theta_min)) throw ConfigError("theta_max must exceed theta_min");
  if (c.gradcheck_instances < 0) throw ConfigError("gradcheck_instances must be non-negative");
}

std::string dump_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& def : key_table()) out += std::string(def.key) + " = " + def.get(config) + "\n";
  return out;
}

}  // namespace spectrack
