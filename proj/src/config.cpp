#include "modfront/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "modfront/core.hpp"
#include "modfront/errors.hpp"

namespace modfront {

std::string format_double(double v) {
  char buf[64];
  // Integral values print as plain integers, everything else with the
  // shortest precision that round-trips.
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return std::string(buf);
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return std::string(buf);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

long long parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0') bad_value(key, value, "an integer");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (errno == ERANGE || end == value.c_str() || *end != '\0') bad_value(key, value, "a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, value, "a comma-separated number list");
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) bad_value(key, value, "a comma-separated number list");
  return out;
}

std::string format_double_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

template <typename Enum, std::size_t N>
std::string enum_to_string(Enum v, const EnumName<Enum> (&table)[N]) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename Enum, std::size_t N>
Enum enum_from_string(const std::string& key, const std::string& s,
                      const EnumName<Enum> (&table)[N]) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  std::string options;
  for (const auto& e : table) {
    if (!options.empty()) options += "|";
    options += e.name;
  }
  bad_value(key, s, "one of " + options);
}

constexpr EnumName<Window> kWindowNames[] = {{Window::none, "none"},
                                             {Window::hamming, "hamming"}};
constexpr EnumName<Rectifier> kRectifierNames[] = {{Rectifier::relu, "relu"},
                                                   {Rectifier::abs_squared, "abs_squared"},
                                                   {Rectifier::none, "none"}};
constexpr EnumName<ModVariant> kVariantNames[] = {{ModVariant::fir, "fir"},
                                                  {ModVariant::sinc, "sinc"}};
constexpr EnumName<Normalization> kNormNames[] = {{Normalization::instance, "instance"},
                                                  {Normalization::weight, "weight"},
                                                  {Normalization::none, "none"}};
constexpr EnumName<Carrier> kCarrierNames[] = {{Carrier::noise, "noise"},
                                               {Carrier::tone, "tone"}};

struct KeyEntry {
  const char* name;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

int checked_int(const std::string& key, const std::string& value, long long lo, long long hi) {
  const long long v = parse_int(key, value);
  if (v < lo || v > hi) {
    throw ConfigError("config key '" + key + "': " + value + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> keys = [] {
    std::vector<KeyEntry> r;
    auto add = [&r](const char* name, std::function<std::string(const Config&)> get,
                    std::function<void(Config&, const std::string&)> set) {
      r.push_back({name, std::move(get), std::move(set)});
    };

    add("sample_rate",
        [](const Config& c) { return std::to_string(c.pipe.sample_rate); },
        [](Config& c, const std::string& v) { c.pipe.sample_rate = checked_int("sample_rate", v, 1, 1 << 24); });
    add("num_tf_filters",
        [](const Config& c) { return std::to_string(c.pipe.num_tf_filters); },
        [](Config& c, const std::string& v) { c.pipe.num_tf_filters = checked_int("num_tf_filters", v, 1, 1 << 16); });
    add("tf_kernel_len",
        [](const Config& c) { return std::to_string(c.pipe.tf_kernel_len); },
        [](Config& c, const std::string& v) { c.pipe.tf_kernel_len = checked_int("tf_kernel_len", v, 2, 1 << 20); });
    add("tf_stride",
        [](const Config& c) { return std::to_string(c.pipe.tf_stride); },
        [](Config& c, const std::string& v) { c.pipe.tf_stride = checked_int("tf_stride", v, 1, 1 << 20); });
    add("tf_fmin_hz",
        [](const Config& c) { return format_double(c.pipe.tf_fmin_hz); },
        [](Config& c, const std::string& v) { c.pipe.tf_fmin_hz = parse_double("tf_fmin_hz", v); });
    add("tf_fmax_hz",
        [](const Config& c) { return format_double(c.pipe.tf_fmax_hz); },
        [](Config& c, const std::string& v) { c.pipe.tf_fmax_hz = parse_double("tf_fmax_hz", v); });
    add("window",
        [](const Config& c) { return enum_to_string(c.pipe.window, kWindowNames); },
        [](Config& c, const std::string& v) { c.pipe.window = enum_from_string("window", v, kWindowNames); });
    add("r1",
        [](const Config& c) { return enum_to_string(c.pipe.r1, kRectifierNames); },
        [](Config& c, const std::string& v) { c.pipe.r1 = enum_from_string("r1", v, kRectifierNames); });
    add("r2",
        [](const Config& c) { return enum_to_string(c.pipe.r2, kRectifierNames); },
        [](Config& c, const std::string& v) { c.pipe.r2 = enum_from_string("r2", v, kRectifierNames); });
    add("mod_variant",
        [](const Config& c) { return enum_to_string(c.pipe.mod_variant, kVariantNames); },
        [](Config& c, const std::string& v) { c.pipe.mod_variant = enum_from_string("mod_variant", v, kVariantNames); });
    add("max_pool",
        [](const Config& c) { return c.pipe.max_pool ? "true" : "false"; },
        [](Config& c, const std::string& v) { c.pipe.max_pool = parse_bool("max_pool", v); });
    add("num_mod_filters",
        [](const Config& c) { return std::to_string(c.pipe.num_mod_filters); },
        [](Config& c, const std::string& v) { c.pipe.num_mod_filters = checked_int("num_mod_filters", v, 1, 1 << 16); });
    add("mod_kernel_len",
        [](const Config& c) { return std::to_string(c.pipe.mod_kernel_len); },
        [](Config& c, const std::string& v) { c.pipe.mod_kernel_len = checked_int("mod_kernel_len", v, 2, 1 << 20); });
    add("mod_stride",
        [](const Config& c) { return std::to_string(c.pipe.mod_stride); },
        [](Config& c, const std::string& v) { c.pipe.mod_stride = checked_int("mod_stride", v, 1, 1 << 20); });
    add("mod_fmin_hz",
        [](const Config& c) { return format_double(c.pipe.mod_fmin_hz); },
        [](Config& c, const std::string& v) { c.pipe.mod_fmin_hz = parse_double("mod_fmin_hz", v); });
    add("mod_fmax_hz",
        [](const Config& c) { return format_double(c.pipe.mod_fmax_hz); },
        [](Config& c, const std::string& v) { c.pipe.mod_fmax_hz = parse_double("mod_fmax_hz", v); });
    add("pool_kernel_len",
        [](const Config& c) { return std::to_string(c.pipe.pool_kernel_len); },
        [](Config& c, const std::string& v) { c.pipe.pool_kernel_len = checked_int("pool_kernel_len", v, 1, 1 << 20); });
    add("pool_stride",
        [](const Config& c) { return std::to_string(c.pipe.pool_stride); },
        [](Config& c, const std::string& v) { c.pipe.pool_stride = checked_int("pool_stride", v, 1, 1 << 20); });
    add("normalization",
        [](const Config& c) { return enum_to_string(c.pipe.normalization, kNormNames); },
        [](Config& c, const std::string& v) { c.pipe.normalization = enum_from_string("normalization", v, kNormNames); });
    add("norm_epsilon",
        [](const Config& c) { return format_double(c.pipe.norm_epsilon); },
        [](Config& c, const std::string& v) { c.pipe.norm_epsilon = parse_double("norm_epsilon", v); });
    add("num_classes",
        [](const Config& c) { return std::to_string(c.pipe.num_classes); },
        [](Config& c, const std::string& v) { c.pipe.num_classes = checked_int("num_classes", v, 1, 1 << 16); });
    add("lr",
        [](const Config& c) { return format_double(c.lr); },
        [](Config& c, const std::string& v) { c.lr = parse_double("lr", v); });
    add("batch_size",
        [](const Config& c) { return std::to_string(c.batch_size); },
        [](Config& c, const std::string& v) { c.batch_size = checked_int("batch_size", v, 1, 1 << 20); });
    add("max_epochs",
        [](const Config& c) { return std::to_string(c.max_epochs); },
        [](Config& c, const std::string& v) { c.max_epochs = checked_int("max_epochs", v, 1, 1 << 20); });
    add("lr_patience",
        [](const Config& c) { return std::to_string(c.lr_patience); },
        [](Config& c, const std::string& v) { c.lr_patience = checked_int("lr_patience", v, 1, 1 << 16); });
    add("stop_patience",
        [](const Config& c) { return std::to_string(c.stop_patience); },
        [](Config& c, const std::string& v) { c.stop_patience = checked_int("stop_patience", v, 1, 1 << 16); });
    add("seed",
        [](const Config& c) { return std::to_string(c.seed); },
        [](Config& c, const std::string& v) {
          errno = 0;
          char* end = nullptr;
          const unsigned long long s = std::strtoull(v.c_str(), &end, 10);
          if (errno != 0 || end == v.c_str() || *end != '\0') bad_value("seed", v, "an unsigned integer");
          c.seed = s;
        });
    add("freeze_frontend",
        [](const Config& c) { return c.freeze_frontend ? "true" : "false"; },
        [](Config& c, const std::string& v) { c.freeze_frontend = parse_bool("freeze_frontend", v); });
    add("synth_rates_hz",
        [](const Config& c) { return format_double_list(c.synth_rates_hz); },
        [](Config& c, const std::string& v) { c.synth_rates_hz = parse_double_list("synth_rates_hz", v); });
    add("synth_per_class",
        [](const Config& c) { return std::to_string(c.synth_per_class); },
        [](Config& c, const std::string& v) { c.synth_per_class = checked_int("synth_per_class", v, 1, 1 << 24); });
    add("synth_duration_s",
        [](const Config& c) { return format_double(c.synth_duration_s); },
        [](Config& c, const std::string& v) { c.synth_duration_s = parse_double("synth_duration_s", v); });
    add("synth_carrier",
        [](const Config& c) { return enum_to_string(c.synth_carrier, kCarrierNames); },
        [](Config& c, const std::string& v) { c.synth_carrier = enum_from_string("synth_carrier", v, kCarrierNames); });
    add("synth_carrier_hz",
        [](const Config& c) { return format_double(c.synth_carrier_hz); },
        [](Config& c, const std::string& v) { c.synth_carrier_hz = parse_double("synth_carrier_hz", v); });
    add("analyze_window_s",
        [](const Config& c) { return format_double(c.analyze_window_s); },
        [](Config& c, const std::string& v) { c.analyze_window_s = parse_double("analyze_window_s", v); });
    add("analyze_hop_s",
        [](const Config& c) { return format_double(c.analyze_hop_s); },
        [](Config& c, const std::string& v) { c.analyze_hop_s = parse_double("analyze_hop_s", v); });
    return r;
  }();
  return keys;
}

const KeyEntry& find_key(const std::string& key) {
  for (const KeyEntry& e : registry()) {
    if (key == e.name) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void Config::validate() const {
  pipe.validate();
  if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("config: max_epochs must be >= 1");
  if (synth_rates_hz.empty()) throw ConfigError("config: synth_rates_hz must be non-empty");
  for (double r : synth_rates_hz) {
    if (!(r > 0.0)) throw ConfigError("config: synth_rates_hz entries must be positive");
  }
  if (!(synth_duration_s >= 1.0)) throw ConfigError("config: synth_duration_s must be >= 1");
  if (!(synth_carrier_hz > 0.0)) throw ConfigError("config: synth_carrier_hz must be positive");
  if (!(analyze_window_s > 0.0) || !(analyze_hop_s > 0.0)) {
    throw ConfigError("config: analyze window and hop must be positive");
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const KeyEntry& e : registry()) n.emplace_back(e.name);
    return n;
  }();
  return names;
}

std::string config_get(const Config& cfg, const std::string& key) {
  return find_key(key).get(cfg);
}

void config_set(Config& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, value);
}

std::string canonical_config(const Config& cfg) {
  std::string out;
  for (const KeyEntry& e : registry()) {
    out += e.name;
    out += '=';
    out += e.get(cfg);
    out += '\n';
  }
  return out;
}

std::uint64_t config_digest(const Config& cfg) { return fnv1a64(canonical_config(cfg)); }

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  Config cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value, got '" +
                        line + "'");
    }
    try {
      config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file '" + path + "'");
  for (const KeyEntry& e : registry()) {
    out << e.name << " = " << e.get(cfg) << "\n";
  }
  if (!out) throw IoError("short write to config file '" + path + "'");
}

}  // namespace modfront
