#ifndef MLELAB_CONFIG_HPP
#define MLELAB_CONFIG_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mlelab/csv.hpp"
#include "mlelab/errors.hpp"
#include "mlelab/simharness.hpp"

namespace mlelab {

/// Flat `key = value` experiment file with `#` comments. Unknown keys are
/// hard errors so typos cannot silently change an experiment.
struct ExperimentConfig {
  TrialConfig trial;
  std::string output_path;
};

inline ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty key or value");
    if (kv.count(key))
      throw ParseError(path + ": duplicate key '" + key + "'");
    kv[key] = value;
  }

  static const std::vector<std::string> known = {
      "design.kind", "design.n",       "design.d",     "design.eps",  "design.fraction",
      "design.magnitude", "design.rcap", "design.w",   "design.gamma", "model.kind",
      "model.b",     "model.alpha",    "model.theta",  "estimators",  "trials",
      "delta",       "seed",           "output.path"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const auto& k : known)
      if (k == key) ok = true;
    if (!ok) throw ParseError(path + ": unknown key '" + key + "'");
  }

  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(path + ": missing required key '" + key + "'");
    return it->second;
  };
  auto get_or = [&](const std::string& key, const std::string& fallback) -> std::string {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  auto as_double = [&](const std::string& key, const std::string& v) {
    return parse_double(v, "config key " + key);
  };
  auto as_size = [&](const std::string& key, const std::string& v) -> std::size_t {
    const double d = as_double(key, v);
    if (d < 0.0 || d != std::floor(d))
      throw ParseError(path + ": key '" + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(d);
  };

  ExperimentConfig cfg;
  DesignSpec& ds = cfg.trial.design;
  const std::string kind = get("design.kind");
  if (kind == "gaussian") {
    ds.kind = DesignKind::gaussian;
  } else if (kind == "skewed_1d") {
    ds.kind = DesignKind::skewed_1d;
  } else if (kind == "heavy_norm") {
    ds.kind = DesignKind::heavy_norm;
  } else {
    throw ParseError(path + ": design.kind must be gaussian | skewed_1d | heavy_norm");
  }
  ds.n = as_size("design.n", get("design.n"));
  ds.d = as_size("design.d", get_or("design.d", "1"));
  ds.eps = as_double("design.eps", get_or("design.eps", "0.25"));
  ds.fraction = as_double("design.fraction", get_or("design.fraction", "0.05"));
  ds.magnitude = as_double("design.magnitude", get_or("design.magnitude", "10"));
  ds.r_cap = as_double("design.rcap", get_or("design.rcap", "1e9"));
  ds.radius = as_double("design.w", get_or("design.w", "10"));
  ds.margin = as_double("design.gamma", get_or("design.gamma", "0.5"));

  cfg.trial.seed = as_size("seed", get("seed"));
  ds.seed = split_seed(cfg.trial.seed, 0xD351);

  // theta*: explicit comma list, or the default feasible direction
  // (w/2) * 1/sqrt(d).
  ParamVector theta(ds.d, 0.0);
  if (kv.count("model.theta")) {
    std::stringstream ss(get("model.theta"));
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ','))
      vals.push_back(as_double("model.theta", detail::trim(cell)));
    if (vals.size() != ds.d)
      throw ParseError(path + ": model.theta needs exactly design.d values");
    theta = vals;
  } else {
    const double coord = 0.5 * ds.radius / std::sqrt(static_cast<double>(ds.d));
    for (double& v : theta) v = coord;
  }

  const std::string model_kind = get("model.kind");
  if (model_kind == "poisson") {
    cfg.trial.model = ResponseModel::poisson(theta);
  } else if (model_kind == "pareto") {
    cfg.trial.model =
        ResponseModel::pareto(theta, as_double("model.b", get_or("model.b", "4.5")));
  } else {
    throw ParseError(path + ": model.kind must be poisson | pareto");
  }

  {
    std::stringstream ss(get("estimators"));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string name = detail::trim(cell);
      if (!name.empty()) cfg.trial.estimators.push_back(name);
    }
    if (cfg.trial.estimators.empty()) throw ParseError(path + ": estimators list is empty");
  }

  cfg.trial.trials = as_size("trials", get("trials"));
  cfg.trial.delta = as_double("delta", get_or("delta", "0.05"));
  cfg.output_path = get("output.path");
  return cfg;
}

}  // namespace mlelab

#endif  // MLELAB_CONFIG_HPP
