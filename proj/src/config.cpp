#include "mdc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mdc/checkpoint.hpp"
#include "mdc/csv.hpp"
#include "mdc/error.hpp"

namespace mdc::cli {

namespace {

void allow_keys(const Json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

// JSON literals parsed from text are unsigned, values built in code may be signed.
bool is_count(const Json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

std::string path_of(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

void read(const Json& o, const char* key, std::size_t& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!is_count(v)) throw ConfigError(path_of(where, key) + ": expected a non-negative integer");
  out = v.get<std::size_t>();
}

void read(const Json& o, const char* key, std::int64_t& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!v.is_number_integer()) throw ConfigError(path_of(where, key) + ": expected an integer");
  out = v.get<std::int64_t>();
}

void read(const Json& o, const char* key, double& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!v.is_number()) throw ConfigError(path_of(where, key) + ": expected a number");
  out = v.get<double>();
}

void read(const Json& o, const char* key, std::string& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!v.is_string()) throw ConfigError(path_of(where, key) + ": expected a string");
  out = v.get<std::string>();
}

void read(const Json& o, const char* key, std::vector<double>& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!v.is_array()) throw ConfigError(path_of(where, key) + ": expected an array of numbers");
  out.clear();
  for (const Json& e : v) {
    if (!e.is_number()) throw ConfigError(path_of(where, key) + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
}

void read(const Json& o, const char* key, std::vector<std::size_t>& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!v.is_array()) throw ConfigError(path_of(where, key) + ": expected an array of integers");
  out.clear();
  for (const Json& e : v) {
    if (!is_count(e)) throw ConfigError(path_of(where, key) + ": expected an array of non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
}

void read(const Json& o, const char* key, std::vector<std::string>& out, const std::string& where) {
  if (!o.contains(key)) return;
  const Json& v = o.at(key);
  if (!v.is_array()) throw ConfigError(path_of(where, key) + ": expected an array of strings");
  out.clear();
  for (const Json& e : v) {
    if (!e.is_string()) throw ConfigError(path_of(where, key) + ": expected an array of strings");
    out.push_back(e.get<std::string>());
  }
}

void read_coupling(const Json& o, const char* key, jdan::Coupling& out, const std::string& where) {
  std::string s;
  read(o, key, s, where);
  if (!s.empty()) out = jdan::coupling_from_string(s);
}

std::vector<double> equicorrelated(const std::vector<double>& sd, double rho) {
  const std::size_t n = sd.size();
  std::vector<double> cov(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cov[i * n + j] = sd[i] * sd[j] * (i == j ? 1.0 : rho);
  return cov;
}

}  // namespace

Json synth_config_to_json(const synth::SynthConfig& c) {
  Json regimes = Json::array();
  for (const auto& r : c.regimes) regimes.push_back({{"mean", r.mean}, {"loading", r.loading}, {"cov", r.cov}});
  return Json{{"n_gates", c.n_gates},
              {"ar_coef", c.ar_coef},
              {"ar_noise", c.ar_noise},
              {"switch_prob", c.switch_prob},
              {"regimes", std::move(regimes)},
              {"capacity", c.capacity},
              {"capacity_ripple", c.capacity_ripple},
              {"ripple_period", c.ripple_period},
              {"latent_obs_noise", c.latent_obs_noise},
              {"regime_obs_noise", c.regime_obs_noise},
              {"n_noise_features", c.n_noise_features},
              {"interval_minutes", c.interval_minutes},
              {"start_time", c.start_time}};
}

synth::SynthConfig synth_config_from_json(const Json& j) {
  const std::string w = "data.synth";
  allow_keys(j,
             {"n_gates", "ar_coef", "ar_noise", "switch_prob", "regimes", "capacity", "capacity_ripple", "ripple_period",
              "latent_obs_noise", "regime_obs_noise", "n_noise_features", "interval_minutes", "start_time"},
             w);
  std::size_t n = 3;
  read(j, "n_gates", n, w);
  synth::SynthConfig c = n >= 1 && n <= 3 ? synth::default_config(n) : synth::SynthConfig{};
  c.n_gates = n;
  read(j, "ar_coef", c.ar_coef, w);
  if (j.contains("ar_coef") && !j.contains("ar_noise") && std::abs(c.ar_coef) < 1.0)
    c.ar_noise = std::sqrt(1.0 - c.ar_coef * c.ar_coef);
  read(j, "ar_noise", c.ar_noise, w);
  read(j, "switch_prob", c.switch_prob, w);
  read(j, "capacity", c.capacity, w);
  read(j, "capacity_ripple", c.capacity_ripple, w);
  read(j, "ripple_period", c.ripple_period, w);
  read(j, "latent_obs_noise", c.latent_obs_noise, w);
  read(j, "regime_obs_noise", c.regime_obs_noise, w);
  read(j, "n_noise_features", c.n_noise_features, w);
  read(j, "interval_minutes", c.interval_minutes, w);
  read(j, "start_time", c.start_time, w);
  if (j.contains("regimes")) {
    const Json& rs = j.at("regimes");
    if (!rs.is_array() || rs.size() != 2) throw ConfigError(w + ".regimes: expected two regimes (calm, strong)");
    for (std::size_t r = 0; r < 2; ++r) {
      const std::string wr = w + ".regimes[" + std::to_string(r) + "]";
      allow_keys(rs[r], {"mean", "loading", "cov", "std", "correlation"}, wr);
      read(rs[r], "mean", c.regimes[r].mean, wr);
      read(rs[r], "loading", c.regimes[r].loading, wr);
      if (rs[r].contains("cov")) {
        if (rs[r].contains("std") || rs[r].contains("correlation"))
          throw ConfigError(wr + ": give either cov or std/correlation");
        read(rs[r], "cov", c.regimes[r].cov, wr);
      } else if (rs[r].contains("std")) {
        std::vector<double> sd;
        double rho = 0.0;
        read(rs[r], "std", sd, wr);
        read(rs[r], "correlation", rho, wr);
        c.regimes[r].cov = equicorrelated(sd, rho);
      }
    }
  }
  return c;
}

Json RunConfig::to_json() const {
  Json data_j{{"length", data.length}, {"delta_minutes", data.delta_minutes}, {"tau_steps", data.tau_steps}};
  if (!data.csv.empty()) data_j["csv"] = data.csv;
  if (data.synth) data_j["synth"] = synth_config_to_json(*data.synth);
  if (data.delta_steps) data_j["delta_steps"] = *data.delta_steps;
  return Json{
      {"seed", seed},
      {"output_dir", output_dir},
      {"jobs", jobs},
      {"data", std::move(data_j)},
      {"arch",
       {{"nfn_blocks", arch.nfn_blocks},
        {"nfn_width", arch.nfn_width},
        {"jdan_blocks", arch.jdan_blocks},
        {"jdan_width", arch.jdan_width},
        {"components", arch.components},
        {"coupling", jdan::to_string(arch.coupling)}}},
      {"train",
       {{"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"patience", train.patience},
        {"max_epochs", train.max_epochs},
        {"density_floor", train.density_floor},
        {"clip_norm", train.clip_norm}}},
      {"grid",
       {{"nfn_blocks", grid.space.nfn_blocks},
        {"jdan_blocks", grid.space.jdan_blocks},
        {"nfn_width", grid.space.nfn_width},
        {"jdan_width", grid.space.jdan_width},
        {"delta_minutes", grid.delta_minutes}}},
      {"thresholds", thresholds},
      {"evaluate", {{"baselines", evaluate.baselines}, {"thetas", evaluate.thetas}, {"route", evaluate.route}}},
      {"forecast",
       {{"quantiles", forecast.quantiles},
        {"grid_points", forecast.grid_points},
        {"grid_margin", forecast.grid_margin},
        {"max_windows", forecast.max_windows}}},
      {"index", {{"window", index.window}, {"mc", index.mc}}}};
}

void RunConfig::validate() const {
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (data.csv.empty() && !data.synth) throw ConfigError("data: give either csv or synth");
  if (!data.csv.empty() && data.synth) throw ConfigError("data: csv and synth are mutually exclusive");
  if (data.synth) {
    data.synth->validate();
    if (data.length == 0) throw ConfigError("data.length must be positive");
  }
  if (data.tau_steps == 0) throw ConfigError("data.tau_steps must be positive");
  if (data.delta_steps && *data.delta_steps == 0) throw ConfigError("data.delta_steps must be positive");
  if (!(data.delta_minutes >= 0.0)) throw ConfigError("data.delta_minutes must be non-negative");
  if (arch.nfn_width == 0 || arch.jdan_width == 0 || arch.components == 0)
    throw ConfigError("arch widths and component count must be positive");
  if (arch.coupling == jdan::Coupling::kPaperLiteral && arch.components != 1)
    throw ConfigError("paper-literal coupling uses exactly one component");
  train.validate();
  if (grid.space.nfn_blocks.empty() || grid.space.jdan_blocks.empty() || grid.space.nfn_width.empty() ||
      grid.space.jdan_width.empty() || grid.delta_minutes.empty())
    throw ConfigError("grid axes must be nonempty");
  for (double g : thresholds)
    if (std::isnan(g)) throw ConfigError("thresholds must be numbers");
  for (const auto& b : evaluate.baselines)
    if (b != "mkde" && b != "clayton" && b != "frank" && b != "oracle")
      throw ConfigError("evaluate.baselines: unknown baseline '" + b + "'");
  if (evaluate.route != "pit" && evaluate.route != "quantile")
    throw ConfigError("evaluate.route must be 'pit' or 'quantile'");
  for (double q : forecast.quantiles)
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("forecast.quantiles must lie in (0, 1)");
  if (forecast.grid_points < 2) throw ConfigError("forecast.grid_points must be at least 2");
}

RunConfig run_config_from_json(const Json& j) {
  allow_keys(j, {"seed", "output_dir", "jobs", "data", "arch", "train", "grid", "thresholds", "evaluate", "forecast", "index"},
             "config");
  RunConfig c;
  read(j, "seed", c.seed, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "jobs", c.jobs, "");
  if (j.contains("data")) {
    const Json& d = j.at("data");
    allow_keys(d, {"csv", "synth", "length", "delta_minutes", "delta_steps", "tau_steps"}, "data");
    read(d, "csv", c.data.csv, "data");
    if (d.contains("synth")) c.data.synth = synth_config_from_json(d.at("synth"));
    read(d, "length", c.data.length, "data");
    read(d, "delta_minutes", c.data.delta_minutes, "data");
    if (d.contains("delta_steps")) {
      std::size_t s = 0;
      read(d, "delta_steps", s, "data");
      c.data.delta_steps = s;
    }
    read(d, "tau_steps", c.data.tau_steps, "data");
  } else {
    c.data.synth = synth::default_config(3);
  }
  if (j.contains("arch")) {
    const Json& a = j.at("arch");
    allow_keys(a, {"nfn_blocks", "nfn_width", "jdan_blocks", "jdan_width", "components", "coupling"}, "arch");
    read(a, "nfn_blocks", c.arch.nfn_blocks, "arch");
    read(a, "nfn_width", c.arch.nfn_width, "arch");
    read(a, "jdan_blocks", c.arch.jdan_blocks, "arch");
    read(a, "jdan_width", c.arch.jdan_width, "arch");
    read(a, "components", c.arch.components, "arch");
    read_coupling(a, "coupling", c.arch.coupling, "arch");
    if (c.arch.coupling == jdan::Coupling::kPaperLiteral && !a.contains("components")) c.arch.components = 1;
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    allow_keys(t, {"batch_size", "learning_rate", "patience", "max_epochs", "density_floor", "clip_norm"}, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "patience", c.train.patience, "train");
    read(t, "max_epochs", c.train.max_epochs, "train");
    read(t, "density_floor", c.train.density_floor, "train");
    read(t, "clip_norm", c.train.clip_norm, "train");
  }
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    allow_keys(g, {"nfn_blocks", "jdan_blocks", "nfn_width", "jdan_width", "delta_minutes"}, "grid");
    read(g, "nfn_blocks", c.grid.space.nfn_blocks, "grid");
    read(g, "jdan_blocks", c.grid.space.jdan_blocks, "grid");
    read(g, "nfn_width", c.grid.space.nfn_width, "grid");
    read(g, "jdan_width", c.grid.space.jdan_width, "grid");
    read(g, "delta_minutes", c.grid.delta_minutes, "grid");
  }
  read(j, "thresholds", c.thresholds, "");
  if (j.contains("evaluate")) {
    const Json& e = j.at("evaluate");
    allow_keys(e, {"baselines", "thetas", "route"}, "evaluate");
    read(e, "baselines", c.evaluate.baselines, "evaluate");
    read(e, "thetas", c.evaluate.thetas, "evaluate");
    read(e, "route", c.evaluate.route, "evaluate");
  }
  if (j.contains("forecast")) {
    const Json& f = j.at("forecast");
    allow_keys(f, {"quantiles", "grid_points", "grid_margin", "max_windows"}, "forecast");
    read(f, "quantiles", c.forecast.quantiles, "forecast");
    read(f, "grid_points", c.forecast.grid_points, "forecast");
    read(f, "grid_margin", c.forecast.grid_margin, "forecast");
    read(f, "max_windows", c.forecast.max_windows, "forecast");
  }
  if (j.contains("index")) {
    const Json& x = j.at("index");
    allow_keys(x, {"window", "mc"}, "index");
    read(x, "window", c.index.window, "index");
    read(x, "mc", c.index.mc, "index");
  }
  if (c.data.synth) c.data.synth->tau = c.data.tau_steps;
  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

nfn::NfnArch make_arch(const ArchConfig& a, std::size_t n_gates, std::size_t n_features, std::size_t delta) {
  nfn::NfnArch arch;
  arch.n_blocks = a.nfn_blocks;
  arch.width = a.nfn_width;
  arch.n_features = n_features;
  arch.window = delta;
  arch.jdan.n_vars = n_gates;
  arch.jdan.n_blocks = a.jdan_blocks;
  arch.jdan.width = a.jdan_width;
  arch.jdan.coupling = a.coupling;
  arch.jdan.n_components = a.coupling == jdan::Coupling::kPaperLiteral ? 1 : a.components;
  arch.validate();
  return arch;
}

}  // namespace mdc::cli
