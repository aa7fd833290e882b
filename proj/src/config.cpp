#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nhqlif/io.hpp"

namespace nhqlif {

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{"experiment", "t1", "t2",   "gamma",   "cells",
                                             "j0",         "d",  "dt",   "tmax",    "epsilon",
                                             "out"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const Setting& s) {
  double v = 0.0;
  const char* begin = s.value.data();
  const char* end = begin + s.value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(s.origin + ": cannot parse '" + s.value + "' as a number for " + s.key);
  }
  return v;
}

int to_int(const Setting& s) {
  int v = 0;
  const char* begin = s.value.data();
  const char* end = begin + s.value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(s.origin + ": cannot parse '" + s.value + "' as an integer for " + s.key);
  }
  return v;
}

std::string render_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Violation {
  std::vector<std::string> keys;  // settings that may be responsible, most likely first
  std::string message;
};

std::optional<Violation> find_violation(const RunConfig& c) {
  const auto& p = c.params;
  if (!(p.t1 > 0.0)) return Violation{{"t1"}, "t1 must be positive"};
  if (!(p.t2 > 0.0)) return Violation{{"t2"}, "t2 must be positive"};
  if (!(std::abs(p.gamma) < p.t1)) {
    return Violation{{"gamma", "t1"}, "|gamma| must be strictly below t1 = " + render_double(p.t1)};
  }
  if (p.n_cells < 2) return Violation{{"cells"}, "need at least two unit cells"};
  const int n = p.sites();
  if (c.j0 < 0 || c.j0 >= n) {
    return Violation{{"j0", "cells"}, "j0 must lie in [0, " + std::to_string(n) + ")"};
  }
  if (c.d <= 0) return Violation{{"d"}, "d must be positive"};
  if (c.d % 2 != 0) return Violation{{"d"}, "d must be even (same-sublattice geometry)"};
  if (c.j0 - c.d < 0 || c.j0 + c.d >= n) {
    return Violation{{"d", "j0", "cells"}, "observation sites j0 +/- d fall outside the chain"};
  }
  if (!(c.dt > 0.0)) return Violation{{"dt"}, "dt must be positive"};
  if (!(c.t_max >= c.dt)) return Violation{{"tmax"}, "tmax must be at least dt"};
  if (!(c.epsilon > 0.0)) return Violation{{"epsilon"}, "epsilon must be positive"};
  if (c.out_dir.empty()) return Violation{{"out"}, "output directory must not be empty"};

  switch (c.experiment) {
    case Experiment::lightcone:
      if (c.j0 + 16 >= n) {
        return Violation{{"j0", "cells", "experiment"},
                         "light-cone distances up to 16 need j0 + 16 < L"};
      }
      break;
    case Experiment::sublattice:
      if (c.j0 + 1 + c.d + 1 >= n || c.j0 - c.d - 1 < 0) {
        return Violation{{"d", "j0", "cells", "experiment"},
                         "sublattice placements j0 +/- (d + 1) fall outside the chain"};
      }
      break;
    default:
      break;
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::scissors: return "scissors";
    case Experiment::gamma_scan: return "gamma-scan";
    case Experiment::xi_scan: return "xi-scan";
    case Experiment::sublattice: return "sublattice";
    case Experiment::lightcone: return "lightcone";
    case Experiment::oscillation: return "oscillation";
    case Experiment::tables: return "tables";
    case Experiment::spectrum: return "spectrum";
  }
  return "scissors";
}

std::optional<Experiment> parse_experiment(const std::string& name) {
  for (auto e : {Experiment::scissors, Experiment::gamma_scan, Experiment::xi_scan,
                 Experiment::sublattice, Experiment::lightcone, Experiment::oscillation,
                 Experiment::tables, Experiment::spectrum}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

ExperimentSetup RunConfig::setup(unsigned jobs) const {
  ExperimentSetup s;
  s.params = params;
  s.j0 = j0;
  s.d = d;
  s.dt = dt;
  s.t_max = t_max;
  s.epsilon = epsilon;
  s.jobs = jobs;
  return s;
}

std::vector<Setting> parse_config_text(const std::string& text, const std::string& source) {
  std::vector<Setting> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string origin = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected 'key = value'");
    Setting s{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin};
    if (s.key.empty()) throw ConfigError(origin + ": missing key");
    if (s.value.empty()) throw ConfigError(origin + ": missing value for " + s.key);
    out.push_back(std::move(s));
  }
  return out;
}

RunConfig apply_settings(RunConfig c, const std::vector<Setting>& settings) {
  std::map<std::string, std::string> origin_of;
  for (const auto& s : settings) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), s.key) == keys.end()) {
      throw ConfigError(s.origin + ": unknown key '" + s.key + "'");
    }
    origin_of[s.key] = s.origin;
    if (s.key == "experiment") {
      const auto e = parse_experiment(s.value);
      if (!e) throw ConfigError(s.origin + ": unknown experiment '" + s.value + "'");
      c.experiment = *e;
    } else if (s.key == "t1") {
      c.params.t1 = to_double(s);
    } else if (s.key == "t2") {
      c.params.t2 = to_double(s);
    } else if (s.key == "gamma") {
      c.params.gamma = to_double(s);
    } else if (s.key == "cells") {
      c.params.n_cells = to_int(s);
    } else if (s.key == "j0") {
      c.j0 = to_int(s);
    } else if (s.key == "d") {
      c.d = to_int(s);
    } else if (s.key == "dt") {
      c.dt = to_double(s);
    } else if (s.key == "tmax") {
      c.t_max = to_double(s);
    } else if (s.key == "epsilon") {
      c.epsilon = to_double(s);
    } else if (s.key == "out") {
      c.out_dir = s.value;
    }
  }
  if (const auto v = find_violation(c)) {
    std::string where = "defaults";
    for (const auto& key : v->keys) {
      if (const auto it = origin_of.find(key); it != origin_of.end()) {
        where = it->second;
        break;
      }
    }
    throw ConfigError(where + ": " + v->message);
  }
  return c;
}

void validate(const RunConfig& config) {
  if (const auto v = find_violation(config)) {
    throw ConfigError(v->keys.front() + ": " + v->message);
  }
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<Setting>& overrides) {
  std::vector<Setting> settings;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError(file->string() + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    settings = parse_config_text(buf.str(), file->string());
  }
  settings.insert(settings.end(), overrides.begin(), overrides.end());
  return apply_settings(RunConfig{}, settings);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  return {
      {"experiment", to_string(c.experiment)},
      {"t1", render_double(c.params.t1)},
      {"t2", render_double(c.params.t2)},
      {"gamma", render_double(c.params.gamma)},
      {"cells", std::to_string(c.params.n_cells)},
      {"j0", std::to_string(c.j0)},
      {"d", std::to_string(c.d)},
      {"dt", render_double(c.dt)},
      {"tmax", render_double(c.t_max)},
      {"epsilon", render_double(c.epsilon)},
      {"out", c.out_dir},
  };
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + " = " + value + "\n";
  return out;
}

}  // namespace nhqlif
