#include "mdc/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mdc/analytics.hpp"
#include "mdc/baselines.hpp"
#include "mdc/checkpoint.hpp"
#include "mdc/csv.hpp"
#include "mdc/error.hpp"

namespace mdc::cli {

namespace fs = std::filesystem;

namespace {

struct Dataset {
  pipeline::FlowgateSeries series;
  pipeline::DatasetSplit split;
  std::size_t delta = 1;
  std::size_t tau = 1;
  Json manifest;
};

fs::path out_path(const RunConfig& cfg, const char* name) { return fs::path(cfg.output_dir) / name; }

std::size_t delta_steps(const RunConfig& cfg, std::int64_t interval) {
  return cfg.data.delta_steps ? *cfg.data.delta_steps : pipeline::minutes_to_steps(cfg.data.delta_minutes, interval);
}

Json range_json(pipeline::IndexRange r) { return Json::array({r.begin, r.end}); }

Json make_manifest(const RunConfig& cfg, const pipeline::FlowgateSeries& s, const pipeline::DatasetSplit& split,
                   std::size_t delta) {
  return Json{{"series", files::kSeries},
              {"synthetic", cfg.data.synth.has_value()},
              {"n_gates", s.n_gates},
              {"n_features", s.n_features},
              {"interval_minutes", s.interval_minutes},
              {"length", s.length()},
              {"delta_steps", delta},
              {"tau_steps", cfg.data.tau_steps},
              {"seed", cfg.seed},
              {"n_windows", split.ranges.test.end},
              {"splits",
               {{"train", range_json(split.ranges.train)},
                {"validation", range_json(split.ranges.validation)},
                {"test", range_json(split.ranges.test)}}},
              {"normalization", {{"mean", split.feature_mean}, {"std", split.feature_std}}}};
}

Dataset load_dataset(const RunConfig& cfg) {
  const fs::path mpath = out_path(cfg, files::kManifest);
  if (!fs::exists(mpath)) throw ConfigError("dataset manifest " + mpath.string() + " not found; run 'mdc generate' first");
  Dataset d;
  d.manifest = read_json_file(mpath);
  d.series = csv::read_series(fs::path(cfg.output_dir) / d.manifest.at("series").get<std::string>());
  d.delta = d.manifest.at("delta_steps").get<std::size_t>();
  d.tau = d.manifest.at("tau_steps").get<std::size_t>();
  d.split = pipeline::split_and_normalize(pipeline::build_windows(d.series, d.delta, d.tau));
  const Json& norm = d.manifest.at("normalization");
  if (norm.at("mean").get<std::vector<double>>() != d.split.feature_mean ||
      norm.at("std").get<std::vector<double>>() != d.split.feature_std)
    throw ConfigError("series no longer matches the normalization statistics in the manifest");
  return d;
}

void check_arch(const nfn::Nfn& model, const Dataset& d) {
  const auto& a = model.arch();
  if (a.n_features != d.series.n_features || a.window != d.delta || a.jdan.n_vars != d.series.n_gates)
    throw ConfigError("checkpoint architecture (features " + std::to_string(a.n_features) + ", window " +
                      std::to_string(a.window) + ", flowgates " + std::to_string(a.jdan.n_vars) +
                      ") does not match the dataset (features " + std::to_string(d.series.n_features) + ", window " +
                      std::to_string(d.delta) + ", flowgates " + std::to_string(d.series.n_gates) + ")");
}

// Config stored in checkpoints: where and how many workers ran is left out so
// the file depends only on data, architecture and training settings.
Json checkpoint_config(const RunConfig& cfg) {
  Json j = cfg.to_json();
  j.erase("output_dir");
  j.erase("jobs");
  return j;
}

std::string params_digest(const jdan::JdanParams& p) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the raw bits
  for (double v : p.flat()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.train.seed = *o.seed;
  }
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.coupling) {
    cfg.arch.coupling = *o.coupling;
    if (*o.coupling == jdan::Coupling::kPaperLiteral) cfg.arch.components = 1;
  }
  if (o.mc) cfg.index.mc = *o.mc;
  cfg.validate();
}

Json strip_timing(Json j) {
  if (j.is_object()) {
    j.erase("seconds");
    j.erase("timing");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

Json cmd_generate(const RunConfig& cfg) {
  pipeline::FlowgateSeries series;
  Json oracle = nullptr;
  if (cfg.data.synth) {
    synth::SynthConfig sc = *cfg.data.synth;
    sc.seed = cfg.seed;
    sc.tau = cfg.data.tau_steps;
    synth::SynthData data = synth::generate(sc, cfg.data.length);
    series = std::move(data.series);
    oracle = Json{{"synth", synth_config_to_json(sc)},
                  {"seed", sc.seed},
                  {"tau_steps", sc.tau},
                  {"latent", data.latent},
                  {"regime", data.regime}};
  } else {
    series = csv::read_series(cfg.data.csv);
  }
  const std::size_t delta = delta_steps(cfg, series.interval_minutes);
  pipeline::DatasetSplit split = pipeline::split_and_normalize(pipeline::build_windows(series, delta, cfg.data.tau_steps));
  csv::write_series(out_path(cfg, files::kSeries), series);
  const Json manifest = make_manifest(cfg, series, split, delta);
  write_json_file(out_path(cfg, files::kManifest), manifest);
  if (!oracle.is_null()) write_json_file(out_path(cfg, files::kOracle), oracle);
  return Json{{"command", "generate"},
              {"series", out_path(cfg, files::kSeries).string()},
              {"manifest", out_path(cfg, files::kManifest).string()},
              {"rows", series.length()},
              {"columns", 1 + 2 * series.n_gates + series.n_features},
              {"windows", split.ranges.test.end}};
}

Json cmd_train(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  nfn::NfnArch arch = make_arch(cfg.arch, d.series.n_gates, d.series.n_features, d.delta);
  trainer::set_target_scaling(arch.jdan, d.split.train);
  trainer::FitResult fr = trainer::fit(nfn::Nfn(arch, cfg.seed), d.split.train, d.split.validation, cfg.train);
  fr.report.checkpoint = files::kCheckpoint;
  save_checkpoint(out_path(cfg, files::kCheckpoint), fr.best, checkpoint_config(cfg));
  write_json_file(out_path(cfg, files::kTrainReport), fr.report.to_json());
  if (fr.report.stop_reason == "diverged")
    throw NumericError("training diverged at epoch " + std::to_string(fr.report.stop_epoch) +
                       "; best checkpoint so far saved to " + out_path(cfg, files::kCheckpoint).string());
  return Json{{"command", "train"},
              {"checkpoint", out_path(cfg, files::kCheckpoint).string()},
              {"best_epoch", fr.report.best_epoch},
              {"best_val_ll", fr.report.best_val_ll},
              {"stop_epoch", fr.report.stop_epoch},
              {"stop_reason", fr.report.stop_reason}};
}

Json cmd_forecast(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  const Checkpoint ck = load_checkpoint(out_path(cfg, files::kCheckpoint));
  check_arch(ck.model, d);
  const std::size_t n = d.series.n_gates;
  std::vector<double> lo(n, INFINITY), hi(n, -INFINITY);
  for (const auto& w : d.split.train)
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], w.target[i]);
      hi[i] = std::max(hi[i], w.target[i]);
    }
  std::ostringstream curves;
  csv::write_row(curves, {"window", "anchor_time", "dimension", "x", "conditional_pdf"});
  Json windows = Json::array();
  const std::size_t count = std::min(cfg.forecast.max_windows, d.split.test.size());
  const std::size_t g = cfg.forecast.grid_points;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& w = d.split.test[k];
    const jdan::ForecastDistribution dist = ck.model.distribution(w.x);
    Json dims = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      Json dim{{"dimension", i + 1}, {"observed", w.target[i]}};
      try {
        const jdan::ConditionalSlice slice = dist.conditional(i, w.target);
        std::vector<double> xs(g), pdf(g);
        const double a = lo[i] - cfg.forecast.grid_margin, b = hi[i] + cfg.forecast.grid_margin;
        for (std::size_t p = 0; p < g; ++p) {
          xs[p] = a + (b - a) * static_cast<double>(p) / static_cast<double>(g - 1);
          pdf[p] = slice.pdf(xs[p]);
          csv::write_row(curves, {std::to_string(d.split.ranges.test.begin + k), w.anchor_time, std::to_string(i + 1),
                                  csv::format_double(xs[p]), csv::format_double(pdf[p])});
        }
        Json qs = Json::object();
        for (double q : cfg.forecast.quantiles) {
          std::ostringstream key;
          key << q;
          qs[key.str()] = analytics::quantile(dist, i, w.target, q);
        }
        dim["grid"] = xs;
        dim["conditional_pdf"] = pdf;
        dim["quantiles"] = std::move(qs);
      } catch (const NumericError& e) {
        dim["error"] = e.what();
      }
      dims.push_back(std::move(dim));
    }
    windows.push_back({{"window", d.split.ranges.test.begin + k},
                       {"anchor_time", w.anchor_time},
                       {"params_digest", params_digest(dist.params())},
                       {"mixture_weights", dist.mixture_weights()},
                       {"dimensions", std::move(dims)}});
  }
  write_json_file(out_path(cfg, files::kForecast), Json{{"windows", std::move(windows)}});
  write_text(out_path(cfg, files::kForecastCsv), curves.str());
  return Json{{"command", "forecast"}, {"windows", count}, {"forecast", out_path(cfg, files::kForecast).string()}};
}

Json cmd_evaluate(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  const Checkpoint ck = load_checkpoint(out_path(cfg, files::kCheckpoint));
  check_arch(ck.model, d);
  evaluation::ReliabilityOptions ro;
  ro.route = cfg.evaluate.route == "quantile" ? evaluation::ReliabilityRoute::kQuantile : evaluation::ReliabilityRoute::kPit;
  ro.jobs = cfg.jobs;

  Json models = Json::array();
  Json table = Json::array();
  std::ostringstream plot;
  bool header_done = false;
  auto record = [&](const std::string& label, const std::function<evaluation::ReliabilityReport()>& run) {
    try {
      evaluation::ReliabilityReport r = run();
      Json j = r.to_json();
      j["model"] = label;
      models.push_back(j);
      for (std::size_t i = 0; i < r.dims.size(); ++i)
        table.push_back({{"model", label}, {"dimension", i + 1}, {"bbar_percent", 100.0 * r.dims[i].bbar}});
      std::ostringstream one;
      r.model = label;
      r.write_csv(one);
      std::string text = one.str();
      if (header_done) text = text.substr(text.find('\n') + 1);
      header_done = true;
      plot << text;
    } catch (const std::exception& e) {
      models.push_back({{"model", label}, {"error", e.what()}});
    }
  };

  record("jdan-nfn", [&] { return evaluation::reliability(evaluation::JdanModel(ck.model), d.split.test, ro); });

  const auto& bl = cfg.evaluate.baselines;
  auto wants = [&](const char* b) { return std::find(bl.begin(), bl.end(), b) != bl.end(); };
  if (wants("mkde"))
    record("mkde", [&] {
      return evaluation::reliability(evaluation::MkdeConditionalModel(evaluation::mkde_from_windows(d.split.train)),
                                     d.split.test, ro);
    });
  if (wants("clayton") || wants("frank")) {
    std::vector<trainer::FitResult> marginals;
    std::string marginal_error;
    try {
      marginals = evaluation::marginal_models(d.split.train, d.split.validation, ck.model.arch(), cfg.train);
    } catch (const std::exception& e) {
      marginal_error = e.what();
    }
    std::vector<const nfn::Nfn*> mp;
    for (const auto& m : marginals) mp.push_back(&m.best);
    for (const char* fam : {"clayton", "frank"}) {
      if (!wants(fam)) continue;
      for (double th : cfg.evaluate.thetas) {
        std::ostringstream label;
        label << fam << "(theta=" << th << ")";
        record(label.str(), [&] {
          if (!marginal_error.empty()) throw std::runtime_error("marginal models failed: " + marginal_error);
          evaluation::CopulaSpec spec{evaluation::copula_family_from_string(fam), th};
          return evaluation::reliability(evaluation::CopulaModel(spec, mp), d.split.test, ro);
        });
      }
    }
  }
  if (wants("oracle"))
    record("oracle", [&] {
      const fs::path op = out_path(cfg, files::kOracle);
      if (!fs::exists(op)) throw std::runtime_error("no ground-truth oracle for this dataset");
      const Json oj = read_json_file(op);
      synth::SynthConfig sc = synth_config_from_json(oj.at("synth"));
      sc.seed = oj.at("seed").get<std::uint64_t>();
      sc.tau = oj.at("tau_steps").get<std::size_t>();
      const synth::Oracle oracle(sc, oj.at("latent").get<std::vector<double>>(), oj.at("regime").get<std::vector<int>>());
      return evaluation::reliability(evaluation::OracleModel(oracle), d.split.test, ro);
    });

  write_json_file(out_path(cfg, files::kEvaluation),
                  Json{{"route", cfg.evaluate.route}, {"n_test", d.split.test.size()}, {"models", models}, {"table", table}});
  write_text(out_path(cfg, files::kReliabilityCsv), plot.str());
  return Json{{"command", "evaluate"}, {"table", table}};
}

Json cmd_index(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  const Checkpoint ck = load_checkpoint(out_path(cfg, files::kCheckpoint));
  check_arch(ck.model, d);
  if (cfg.thresholds.size() != d.series.n_gates)
    throw ConfigError("thresholds: expected " + std::to_string(d.series.n_gates) + " values, got " +
                      std::to_string(cfg.thresholds.size()));
  if (cfg.index.window >= d.split.test.size()) throw ConfigError("index.window is beyond the test split");
  const auto& w = d.split.test[cfg.index.window];
  const jdan::ForecastDistribution dist = ck.model.distribution(w.x);
  const analytics::SecurityThresholds th{cfg.thresholds};
  const analytics::OmegaResult r = analytics::omega(dist, th);
  Json j = r.to_json();
  j["thresholds"] = cfg.thresholds;
  j["lower_bounds"] = th.lower_bounds();
  j["window"] = d.split.ranges.test.begin + cfg.index.window;
  j["anchor_time"] = w.anchor_time;
  j["reference_seconds"] = 0.0492;
  if (cfg.index.mc > 0) {
    const double p = analytics::secure_scenario_proportion(dist, th, cfg.index.mc, cfg.seed);
    j["mc"] = {{"samples", cfg.index.mc}, {"proportion_percent", p}, {"abs_diff", std::abs(r.omega - p / 100.0)}};
  }
  write_json_file(out_path(cfg, files::kIndex), j);
  return Json{{"command", "index"}, {"omega", r.omega}, {"index", out_path(cfg, files::kIndex).string()}};
}

Json cmd_grid_search(const RunConfig& cfg) {
  const fs::path mpath = out_path(cfg, files::kManifest);
  if (!fs::exists(mpath)) throw ConfigError("dataset manifest " + mpath.string() + " not found; run 'mdc generate' first");
  const Json manifest = read_json_file(mpath);
  const pipeline::FlowgateSeries series =
      csv::read_series(fs::path(cfg.output_dir) / manifest.at("series").get<std::string>());
  trainer::GridSpace space = cfg.grid.space;
  space.delta.clear();
  for (double m : cfg.grid.delta_minutes) space.delta.push_back(pipeline::minutes_to_steps(m, series.interval_minutes));
  trainer::GridData data{&series, manifest.at("tau_steps").get<std::size_t>(), cfg.arch.components, cfg.arch.coupling};
  trainer::GridResult gr = trainer::grid_search(space, data, cfg.train, cfg.jobs);
  gr.best_report.checkpoint = files::kGridCheckpoint;
  save_checkpoint(out_path(cfg, files::kGridCheckpoint), *gr.best_model, checkpoint_config(cfg));
  write_json_file(out_path(cfg, files::kGrid), gr.to_json());
  return Json{{"command", "grid-search"},
              {"rows", gr.table.size()},
              {"best", gr.best().point.to_json()},
              {"best_val_ll", gr.best().val_ll}};
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    Json summary;
    if (command == "generate")
      summary = cmd_generate(cfg);
    else if (command == "train")
      summary = cmd_train(cfg);
    else if (command == "forecast")
      summary = cmd_forecast(cfg);
    else if (command == "evaluate")
      summary = cmd_evaluate(cfg);
    else if (command == "index")
      summary = cmd_index(cfg);
    else if (command == "grid-search")
      summary = cmd_grid_search(cfg);
    else
      throw ConfigError("unknown command '" + command + "'");
    out << summary.dump(2) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mdc::cli
