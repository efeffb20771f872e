#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lrp/cli.hpp"
#include "lrp/errors.hpp"

#ifndef LRP_VERSION
#define LRP_VERSION "unknown"
#endif

namespace lrp::cli {

namespace {

// YAML scalars carry no type; ints are tried first, then floats and bools.
Json yaml_to_json(const YAML::Node& node, const std::string& where) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      for (std::size_t i = 0; i < node.size(); ++i) {
        arr.push_back(yaml_to_json(node[i], where + "[" + std::to_string(i) + "]"));
      }
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (obj.contains(key)) throw ConfigError(where + key + ": duplicate key");
        obj[key] = yaml_to_json(kv.second, where + key + ".");
      }
      return obj;
    }
    case YAML::NodeType::Scalar: break;
  }
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ec == std::errc() && p == s.data() + s.size()) return i;
  double d = 0.0;
  if (YAML::convert<double>::decode(node, d)) return d;
  if (s == "true" || s == "false") return s == "true";
  if (s == "null" || s == "~") return nullptr;
  return s;
}

std::string field_error(const std::string& field, const std::string& what) { return field + ": " + what; }

double get_double(const Json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field_error(field, "expected a number"));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(field_error(field, "must be finite"));
  return d;
}

std::int64_t get_int(const Json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw ConfigError(field_error(field, "expected an integer"));
}

std::uint64_t get_seed(const Json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto i = get_int(v, field);
  if (i < 0) throw ConfigError(field_error(field, "must be non-negative"));
  return static_cast<std::uint64_t>(i);
}

bool get_bool(const Json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field_error(field, "expected true or false"));
  return v.get<bool>();
}

template <class T, class Get>
std::vector<T> get_list(const Json& v, const std::string& field, Get get) {
  std::vector<T> out;
  if (!v.is_array()) {
    out.push_back(get(v, field));  // a lone scalar is a one-element list
    return out;
  }
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::string fmt(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, p);
  // keep floats recognisable as floats
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <class T>
std::string yaml_list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s + "]";
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field_error(field, what));
}

void require_n_grid(const std::vector<std::int64_t>& grid, const std::string& field, std::size_t min_size,
                    bool powers_of_two) {
  require(grid.size() >= min_size, field, "needs at least " + std::to_string(min_size) + " values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] >= 1, field, "values must be >= 1");
    if (powers_of_two) require((grid[i] & (grid[i] - 1)) == 0 && grid[i] >= 2, field, "values must be powers of two >= 2");
    if (i) require(grid[i] > grid[i - 1], field, "values must increase");
  }
}

void require_positive_grid(const std::vector<double>& grid, const std::string& field, std::size_t min_size) {
  require(grid.size() >= min_size, field, "needs at least " + std::to_string(min_size) + " values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] > 0.0, field, "values must be positive");
    if (i) require(grid[i] > grid[i - 1], field, "values must increase");
  }
}

void require_lambda(const ExperimentConfig& c) {
  require(!c.lambda.empty(), "lambda", "needs at least one value");
  for (std::size_t i = 0; i < c.lambda.size(); ++i) {
    require(c.lambda[i] >= 1.0, "lambda", "values must be >= 1");
    if (i) require(c.lambda[i] > c.lambda[i - 1], "lambda", "values must increase");
  }
}

void require_delta_source(const ExperimentConfig& c) {
  if (c.delta) {
    require(*c.delta > 0.0 && *c.delta < 1.0, "delta", "must lie in (0, 1)");
  } else {
    require_n_grid(c.n, "n", 3, true);
    require(c.replicates >= 2, "replicates", "must be >= 2 when delta is estimated");
  }
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"sample", "resistance", "heatkernel", "exit",   "delta",
                                              "spectral", "tails",    "goodradius", "chainck", "full-pipeline"};
  return names;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["command"] = c.command;
  j["beta"] = c.beta;
  j["seed"] = c.seed;
  j["n"] = c.n;
  j["replicates"] = c.replicates;
  j["fast"] = c.fast;
  j["spectral_n"] = c.spectral_n;
  j["environments"] = c.environments;
  j["quenched"] = c.quenched;
  j["steps"] = c.steps;
  j["walkers"] = c.walkers;
  j["r"] = c.r;
  j["exit_replicates"] = c.exit_replicates;
  j["tail_r"] = c.tail_r;
  j["lambda"] = c.lambda;
  j["tail_replicates"] = c.tail_replicates;
  j["draws"] = c.draws;
  j["delta"] = c.delta ? Json(*c.delta) : Json(nullptr);
  j["volume_scale"] = c.volume_scale ? Json(*c.volume_scale) : Json(nullptr);
  j["long_edges"] = c.long_edges;
  j["leak_tolerance"] = c.leak_tolerance;
  j["max_discard_rate"] = c.max_discard_rate;
  j["consistency_tolerance"] = c.consistency_tolerance;
  j["window"] = {{"initial", c.window.initial_half_width},
                 {"max", c.window.max_half_width},
                 {"multiplier", c.window.multiplier}};
  j["out"] = c.out;
  return j;
}

ExperimentConfig from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a table of keys");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "command") {
      if (!v.is_string()) throw ConfigError("command: expected a string");
      c.command = v.get<std::string>();
    } else if (key == "beta") {
      c.beta = get_list<double>(v, key, get_double);
    } else if (key == "seed") {
      c.seed = get_seed(v, key);
    } else if (key == "n") {
      c.n = get_list<std::int64_t>(v, key, get_int);
    } else if (key == "replicates") {
      c.replicates = get_int(v, key);
    } else if (key == "fast") {
      c.fast = get_bool(v, key);
    } else if (key == "spectral_n") {
      c.spectral_n = get_list<std::int64_t>(v, key, get_int);
    } else if (key == "environments") {
      c.environments = get_int(v, key);
    } else if (key == "quenched") {
      c.quenched = get_int(v, key);
    } else if (key == "steps") {
      c.steps = get_int(v, key);
    } else if (key == "walkers") {
      c.walkers = get_int(v, key);
    } else if (key == "r") {
      c.r = get_list<double>(v, key, get_double);
    } else if (key == "exit_replicates") {
      c.exit_replicates = get_int(v, key);
    } else if (key == "tail_r") {
      c.tail_r = get_double(v, key);
    } else if (key == "lambda") {
      c.lambda = get_list<double>(v, key, get_double);
    } else if (key == "tail_replicates") {
      c.tail_replicates = get_int(v, key);
    } else if (key == "draws") {
      c.draws = get_int(v, key);
    } else if (key == "delta") {
      if (!v.is_null()) c.delta = get_double(v, key);
    } else if (key == "volume_scale") {
      if (!v.is_null()) c.volume_scale = get_double(v, key);
    } else if (key == "long_edges") {
      c.long_edges = get_bool(v, key);
    } else if (key == "leak_tolerance") {
      c.leak_tolerance = get_double(v, key);
    } else if (key == "max_discard_rate") {
      c.max_discard_rate = get_double(v, key);
    } else if (key == "consistency_tolerance") {
      c.consistency_tolerance = get_double(v, key);
    } else if (key == "window") {
      if (!v.is_object()) throw ConfigError("window: expected a table");
      for (const auto& [wk, wv] : v.items()) {
        const std::string f = "window." + wk;
        if (wk == "initial") {
          c.window.initial_half_width = get_int(wv, f);
        } else if (wk == "max") {
          c.window.max_half_width = get_int(wv, f);
        } else if (wk == "multiplier") {
          c.window.multiplier = get_double(wv, f);
        } else {
          throw ConfigError(f + ": unknown field");
        }
      }
    } else if (key == "out") {
      if (!v.is_string()) throw ConfigError("out: expected a string");
      c.out = v.get<std::string>();
    } else {
      throw ConfigError(key + ": unknown field");
    }
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, bool json) {
  Json j;
  if (json) {
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
  } else {
    try {
      j = yaml_to_json(YAML::Load(text), "");
    } catch (const YAML::Exception& e) {
      throw ConfigError(std::string("config: YAML parse error: ") + e.what());
    }
  }
  return from_json(j);
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.extension() == ".json");
}

std::string to_yaml(const ExperimentConfig& c) {
  std::ostringstream o;
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("null"); };
  o << "command: \"" << c.command << "\"\n"
    << "beta: " << yaml_list(c.beta) << "\n"
    << "seed: " << c.seed << "\n"
    << "n: " << yaml_list(c.n) << "\n"
    << "replicates: " << c.replicates << "\n"
    << "fast: " << (c.fast ? "true" : "false") << "\n"
    << "spectral_n: " << yaml_list(c.spectral_n) << "\n"
    << "environments: " << c.environments << "\n"
    << "quenched: " << c.quenched << "\n"
    << "steps: " << c.steps << "\n"
    << "walkers: " << c.walkers << "\n"
    << "r: " << yaml_list(c.r) << "\n"
    << "exit_replicates: " << c.exit_replicates << "\n"
    << "tail_r: " << fmt(c.tail_r) << "\n"
    << "lambda: " << yaml_list(c.lambda) << "\n"
    << "tail_replicates: " << c.tail_replicates << "\n"
    << "draws: " << c.draws << "\n"
    << "delta: " << opt(c.delta) << "\n"
    << "volume_scale: " << opt(c.volume_scale) << "\n"
    << "long_edges: " << (c.long_edges ? "true" : "false") << "\n"
    << "leak_tolerance: " << fmt(c.leak_tolerance) << "\n"
    << "max_discard_rate: " << fmt(c.max_discard_rate) << "\n"
    << "consistency_tolerance: " << fmt(c.consistency_tolerance) << "\n"
    << "window:\n"
    << "  initial: " << c.window.initial_half_width << "\n"
    << "  max: " << c.window.max_half_width << "\n"
    << "  multiplier: " << fmt(c.window.multiplier) << "\n"
    << "out: \"" << c.out << "\"\n";
  return o.str();
}

void validate(const ExperimentConfig& c, const std::string& command) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("command: unknown command '" + command + "' (expected one of " + list + ")");
  }
  require(c.command.empty() || c.command == command, "command",
          "config is for '" + c.command + "' but '" + command + "' was requested");
  require(!c.beta.empty(), "beta", "needs at least one value");
  std::set<double> seen;
  for (double b : c.beta) {
    require(b > 0.0, "beta", "values must be positive");
    require(seen.insert(b).second, "beta", "duplicate value");
  }
  require(c.window.initial_half_width >= 16, "window.initial", "must be >= 16");
  require(c.window.max_half_width >= c.window.initial_half_width, "window.max", "must be >= window.initial");
  require(c.window.max_half_width <= (Vertex{1} << 26), "window.max", "must be <= 2^26");
  require(c.window.multiplier >= 1.0, "window.multiplier", "must be >= 1");
  require(c.leak_tolerance >= 0.0 && c.leak_tolerance <= 1.0, "leak_tolerance", "must lie in [0, 1]");
  require(c.max_discard_rate >= 0.0 && c.max_discard_rate <= 1.0, "max_discard_rate", "must lie in [0, 1]");
  require(c.consistency_tolerance > 0.0, "consistency_tolerance", "must be positive");
  if (c.volume_scale) require(*c.volume_scale > 0.0, "volume_scale", "must be positive");

  if (command == "sample") {
    require(c.replicates >= 1, "replicates", "must be >= 1");
  } else if (command == "resistance" || command == "delta") {
    require_n_grid(c.n, "n", command == "delta" ? 3 : 1, true);
    require(c.replicates >= 2, "replicates", "must be >= 2");
  } else if (command == "heatkernel") {
    require(c.steps >= 1, "steps", "must be >= 1");
    require(c.environments >= 1, "environments", "must be >= 1");
  } else if (command == "spectral") {
    require_n_grid(c.spectral_n, "spectral_n", 3, false);
    require(c.environments >= 2 || c.quenched >= 1, "environments", "need >= 2 environments or quenched >= 1");
    require(c.environments == 0 || c.environments >= 2, "environments", "must be 0 or >= 2");
    require(c.quenched >= 0, "quenched", "must be >= 0");
  } else if (command == "exit") {
    require_positive_grid(c.r, "r", 3);
    require(c.exit_replicates >= 2, "exit_replicates", "must be >= 2");
  } else if (command == "tails" || command == "goodradius") {
    require(c.tail_r > 0.0, "tail_r", "must be positive");
    require_lambda(c);
    require(c.tail_replicates >= 1, "tail_replicates", "must be >= 1");
    require_delta_source(c);
    if (!c.r.empty()) require_positive_grid(c.r, "r", 2);
  } else if (command == "chainck") {
    require_n_grid(c.n, "n", 1, false);
    require(c.draws >= 1, "draws", "must be >= 1");
  } else if (command == "full-pipeline") {
    require_n_grid(c.n, "n", 3, true);
    require(c.replicates >= 2, "replicates", "must be >= 2");
    require_n_grid(c.spectral_n, "spectral_n", 3, false);
    require(c.environments >= 2, "environments", "must be >= 2");
    require(c.quenched >= 0, "quenched", "must be >= 0");
    if (!c.r.empty()) {
      require_positive_grid(c.r, "r", 3);
      require(c.exit_replicates >= 2, "exit_replicates", "must be >= 2");
    }
    if (c.tail_r > 0.0) {
      require_lambda(c);
      require(c.tail_replicates >= 1, "tail_replicates", "must be >= 1");
    }
  }
}

std::string canonical_text(const ExperimentConfig& cfg) {
  Json j = to_json(cfg);
  j.erase("out");
  return j.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string artifact_version() { return LRP_VERSION; }

}  // namespace lrp::cli
