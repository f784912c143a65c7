#pragma once

// Flat key = value run configuration.
//
//   # comment
//   model = planar
//   zeta = 0.01
//   x0 = [1, -1]
//   u0_segments = -0.5:[0]; -0.25:[0.05]
//
// Unspecified keys keep their defaults. Vectors accept "[a, b]" or "a, b".
// u0_segments lists "t_start:value" pairs separated by ';' and must start at
// -(r + tau); an empty list means u0 = 0 on the whole window.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "absorb/core.hpp"
#include "absorb/planar.hpp"
#include "absorb/simulator.hpp"

namespace absorb {

struct RunConfig {
  std::string model = "planar";
  double zeta = 0.01;
  double b = 1.5;
  double c = 0.5;
  double r = 0.25;
  double tau = 0.25;
  double T_s = 0.01;
  double T_H = 0.05;
  int N = 64;
  double horizon = 40.0;
  double dt_max = 1e-3;
  double record_dt = 0.05;
  std::uint64_t seed = 0;
  std::vector<double> x0 = {1.0, -1.0};
  std::vector<double> z0 = {0.0, 0.0};
  std::vector<std::pair<double, std::vector<double>>> u0_segments;
  double min_frac = 0.5;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config: key '" + std::string(key) +
                      "' expects a number, got '" + std::string(text) + "'");
  }
  return v;
}

template <class Int>
Int parse_integer(std::string_view key, std::string_view text) {
  text = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config: key '" + std::string(key) +
                      "' expects an integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<double> parse_vector(std::string_view key,
                                        std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') {
      throw ConfigError("config: key '" + std::string(key) + "' has unbalanced '['");
    }
    text = trim(text.substr(1, text.size() - 2));
  }
  std::vector<double> out;
  if (text.empty()) return out;
  std::string buf(text);
  std::replace(buf.begin(), buf.end(), ',', ' ');
  std::istringstream is(buf);
  std::string tok;
  while (is >> tok) out.push_back(parse_double(key, tok));
  return out;
}

inline std::vector<std::pair<double, std::vector<double>>> parse_segments(
    std::string_view key, std::string_view text) {
  std::vector<std::pair<double, std::vector<double>>> out;
  text = trim(text);
  while (!text.empty()) {
    const auto semi = text.find(';');
    const std::string_view item = trim(text.substr(0, semi));
    text = semi == std::string_view::npos ? std::string_view{} : trim(text.substr(semi + 1));
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("config: key '" + std::string(key) +
                        "' expects t_start:value pairs");
    }
    out.emplace_back(parse_double(key, item.substr(0, colon)),
                     parse_vector(key, item.substr(colon + 1)));
  }
  return out;
}

}  // namespace detail

/// Sets one key from its textual value.
inline void set_config_value(RunConfig& cfg, std::string_view key,
                             std::string_view value) {
  key = detail::trim(key);
  value = detail::trim(value);
  if (key == "model") {
    cfg.model = std::string(value);
  } else if (key == "zeta") {
    cfg.zeta = detail::parse_double(key, value);
  } else if (key == "b") {
    cfg.b = detail::parse_double(key, value);
  } else if (key == "c") {
    cfg.c = detail::parse_double(key, value);
  } else if (key == "r") {
    cfg.r = detail::parse_double(key, value);
  } else if (key == "tau") {
    cfg.tau = detail::parse_double(key, value);
  } else if (key == "T_s") {
    cfg.T_s = detail::parse_double(key, value);
  } else if (key == "T_H") {
    cfg.T_H = detail::parse_double(key, value);
  } else if (key == "N") {
    cfg.N = detail::parse_integer<int>(key, value);
  } else if (key == "horizon") {
    cfg.horizon = detail::parse_double(key, value);
  } else if (key == "dt_max") {
    cfg.dt_max = detail::parse_double(key, value);
  } else if (key == "record_dt") {
    cfg.record_dt = detail::parse_double(key, value);
  } else if (key == "seed") {
    cfg.seed = detail::parse_integer<std::uint64_t>(key, value);
  } else if (key == "x0") {
    cfg.x0 = detail::parse_vector(key, value);
  } else if (key == "z0") {
    cfg.z0 = detail::parse_vector(key, value);
  } else if (key == "u0_segments") {
    cfg.u0_segments = detail::parse_segments(key, value);
  } else if (key == "min_frac") {
    cfg.min_frac = detail::parse_double(key, value);
  } else {
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
  }
}

/// Applies a "key=value" override.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) +
                      "' is not of the form key=value");
  }
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

inline void validate(const RunConfig& cfg) {
  SimConfig sim;
  sim.T_H = cfg.T_H;
  sim.N = cfg.N;
  sim.horizon = cfg.horizon;
  sim.dt_max = cfg.dt_max;
  sim.record_dt = cfg.record_dt;
  validate(sim);
  if (!(cfg.T_s > 0.0)) throw ConfigError("config: T_s must be > 0");
  if (!(cfg.r >= 0.0) || !(cfg.tau >= 0.0)) {
    throw ConfigError("config: r and tau must be >= 0");
  }
  if (!(cfg.min_frac > 0.0 && cfg.min_frac <= 1.0)) {
    throw ConfigError("config: min_frac must lie in (0, 1]");
  }
}

inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      body = body.substr(0, hash);
    }
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    set_config_value(cfg, body.substr(0, eq), body.substr(eq + 1));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Building run inputs from a configuration
// ---------------------------------------------------------------------------

inline planar::Example make_model(const RunConfig& cfg) {
  if (cfg.model != "planar") {
    throw ConfigError("config: unknown model '" + cfg.model + "'");
  }
  planar::Example ex = planar::build_example(cfg.zeta, cfg.b, cfg.c);
  ex.plant.r = cfg.r;
  ex.plant.tau = cfg.tau;
  return ex;
}

inline SimConfig make_sim_config(const RunConfig& cfg) {
  SimConfig sim;
  sim.T_H = cfg.T_H;
  sim.N = cfg.N;
  sim.horizon = cfg.horizon;
  sim.dt_max = cfg.dt_max;
  sim.seed = cfg.seed;
  sim.record_dt = cfg.record_dt;
  validate(sim);
  return sim;
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Initial input history on [-(r + tau), 0) from the configured segments.
inline InputHistory make_u0_history(const RunConfig& cfg,
                                    const PlantModel& plant) {
  const double window = plant.delay_window();
  if (cfg.u0_segments.empty()) {
    return InputHistory(-window, 0.0, Vector::Zero(plant.m));
  }
  if (window == 0.0) {
    throw ConfigError("config: u0_segments given but r + tau = 0");
  }
  std::vector<InputSegment> segs;
  for (const auto& [t, value] : cfg.u0_segments) {
    if (static_cast<int>(value.size()) != plant.m) {
      throw ConfigError("config: u0_segments value has wrong dimension");
    }
    segs.push_back({t, to_vector(value)});
  }
  if (segs.front().t_start != -window) {
    throw ConfigError("config: u0_segments must start at -(r + tau)");
  }
  return InputHistory::from_segments(std::move(segs), 0.0);
}

inline InitialData make_initial_data(const RunConfig& cfg,
                                     const PlantModel& plant) {
  if (static_cast<int>(cfg.x0.size()) != plant.n ||
      static_cast<int>(cfg.z0.size()) != plant.n) {
    throw ConfigError("config: x0 and z0 must have dimension " +
                      std::to_string(plant.n));
  }
  const Vector x0 = to_vector(cfg.x0);
  InitialData init =
      InitialData::constant(plant, x0, to_vector(cfg.z0), Vector::Zero(plant.m));
  init.u0_history = make_u0_history(cfg, plant);
  validate(init, plant);
  return init;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& [t, v] : cfg.u0_segments) segs.push_back({{"t_start", t}, {"value", v}});
  return {{"model", cfg.model},   {"zeta", cfg.zeta},
          {"b", cfg.b},           {"c", cfg.c},
          {"r", cfg.r},           {"tau", cfg.tau},
          {"T_s", cfg.T_s},       {"T_H", cfg.T_H},
          {"N", cfg.N},           {"horizon", cfg.horizon},
          {"dt_max", cfg.dt_max}, {"record_dt", cfg.record_dt},
          {"seed", cfg.seed},     {"x0", cfg.x0},
          {"z0", cfg.z0},         {"u0_segments", segs},
          {"min_frac", cfg.min_frac}};
}

}  // namespace absorb
