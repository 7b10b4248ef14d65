// Acceptance gate: one PASS/FAIL line per criterion. Tolerances are pinned
// below and must not be loosened to make a run green.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mdc/analytics.hpp"
#include "mdc/baselines.hpp"
#include "mdc/checkpoint.hpp"
#include "mdc/commands.hpp"
#include "mdc/config.hpp"
#include "mdc/jdan.hpp"
#include "mdc/monotone_checks.hpp"
#include "mdc/ops.hpp"
#include "mdc/synth.hpp"
#include "mdc/trainer.hpp"

namespace fs = std::filesystem;
using namespace mdc;

namespace {

// criterion 1
constexpr double kGradRelTol = 1e-4;
constexpr double kGradRelFloor = 1e-6;  // denominator floor for near-zero gradients
constexpr double kGradFdStep = 1e-5;
constexpr double kGradSeconds = 1.0;
// criterion 2
constexpr std::size_t kAxiomCasesPerDim = 10000;
constexpr double kLimitTol = 1e-8;
constexpr double kMonotoneSlack = 1e-14;
constexpr double kMixedRelTol = 1e-3;
constexpr double kMixedRelFloor = 1e-4;
// criterion 3
constexpr double kNormLo = 0.97, kNormHi = 1.01;
constexpr double kNormSeconds = 30.0;
// criterion 4
constexpr std::size_t kOmegaWindows = 20;
constexpr std::size_t kOmegaSamples = 100000;
constexpr double kOmegaTol = 0.005;
constexpr double kOmegaSeconds = 0.1;
// criterion 5
constexpr double kJdanBbarMax = 0.05;
constexpr double kOracleBbarMax = 0.015;
constexpr double kTrainSeconds = 15 * 60.0;
// criterion 6
constexpr double kFirstPartialMin = -1e-10;
constexpr double kNegativeNetFraction = 0.5;
// criterion 7
constexpr double kFactorizationTol = 1e-9;
constexpr double kMixtureFitMax = 0.02;
constexpr double kLiteralFitMin = 0.05;
// criterion 8
constexpr double kGridSeconds = 30 * 60.0;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome gradient_check() {
  const auto t0 = Clock::now();
  nfn::NfnArch arch;
  arch.n_blocks = 1;
  arch.width = 4;
  arch.n_features = 3;
  arch.window = 3;
  arch.jdan.n_vars = 2;
  arch.jdan.n_components = 2;
  arch.jdan.n_blocks = 1;
  arch.jdan.width = 4;
  arch.jdan.location = {0.5, 0.4};
  arch.jdan.scale = {0.2, 0.25};
  nfn::Nfn model(arch, 101);

  Rng rng(5);
  std::vector<pipeline::SampleWindow> batch(4);
  for (auto& w : batch) {
    w.x = ad::Tensor::matrix(arch.window, arch.n_features);
    for (double& v : w.x.data()) v = rng.normal();
    w.target = {rng.normal(0.5, 0.2), rng.normal(0.4, 0.25)};
  }
  std::vector<const pipeline::SampleWindow*> ptrs;
  for (const auto& w : batch) ptrs.push_back(&w);

  // Train-mode batch norm: the output depends on batch statistics only, so
  // the running-statistic side effect does not perturb the loss.
  auto loss_value = [&] {
    ad::Graph g(false);
    return trainer::mle_loss_graph(g, model, ptrs, nfn::BnMode::kTrain).value().item();
  };
  ad::Graph g;
  std::vector<ad::Var> leaves;
  const ad::Var loss = trainer::mle_loss_graph(g, model, ptrs, nfn::BnMode::kTrain, jdan::kDensityFloor, &leaves);
  g.backward(loss);

  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  auto& params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const ad::Tensor analytic = g.grad(leaves[p]);
    ad::Tensor& t = *params[p].tensor;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double orig = t[k];
      const double h = kGradFdStep * std::max(1.0, std::abs(orig));
      t[k] = orig + h;
      const double up = loss_value();
      t[k] = orig - h;
      const double down = loss_value();
      t[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[k];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), kGradRelFloor});
      if (rel > worst) {
        worst = rel;
        worst_name = params[p].name + "[" + std::to_string(k) + "]";
      }
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst <= kGradRelTol && secs < kGradSeconds;
  return {ok, fmt("%zu parameters, max rel err %.2e at %s (tol %.0e), %.2f s (limit %.0f s)", checked, worst,
                  worst_name.c_str(), kGradRelTol, secs, kGradSeconds)};
}

// ---------------------------------------------------------------- 2

// Mixed partial of the joint CDF over all coordinates by nested central
// differences with one Richardson step.
double fd_mixed_partial(const jdan::ForecastDistribution& d, std::vector<double> x, double h) {
  const std::size_t n = x.size();
  auto stencil = [&](double step) {
    double total = 0.0;
    std::vector<double> p(n);
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      int sign = 1;
      for (std::size_t i = 0; i < n; ++i) {
        const bool minus = (mask >> i) & 1U;
        p[i] = x[i] + (minus ? -step : step);
        if (minus) sign = -sign;
      }
      total += sign * d.joint_cdf(p);
    }
    return total / std::pow(2.0 * step, static_cast<double>(n));
  };
  const double coarse = stencil(h), fine = stencil(h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

Outcome cdf_axioms() {
  const double inf = std::numeric_limits<double>::infinity();
  std::size_t cases = 0, range_bad = 0, mono_bad = 0, limit_bad = 0, neg_density = 0, mixed_bad = 0;
  double worst_limit = 0.0, worst_mixed = 0.0;
  Rng rng(31337);
  for (std::size_t n = 1; n <= 3; ++n) {
    const std::size_t per_param = 10;
    for (std::size_t c = 0; c < kAxiomCasesPerDim / per_param; ++c) {
      jdan::JdanArch arch;
      arch.n_vars = n;
      arch.coupling = c % 4 == 3 ? jdan::Coupling::kPaperLiteral : jdan::Coupling::kMixture;
      arch.n_components = arch.coupling == jdan::Coupling::kMixture ? 1 + rng.index(3) : 1;
      arch.n_blocks = rng.index(3);
      arch.width = 2 + rng.index(5);
      const jdan::ForecastDistribution d(arch, jdan::random_params(arch, rng));

      std::vector<double> hi(n, inf);
      worst_limit = std::max(worst_limit, std::abs(d.joint_cdf(hi) - 1.0));
      if (std::abs(d.joint_cdf(hi) - 1.0) > kLimitTol) ++limit_bad;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> lo(n);
        for (double& v : lo) v = rng.normal();
        lo[i] = -inf;
        const double f = d.joint_cdf(lo);
        worst_limit = std::max(worst_limit, std::abs(f));
        if (std::abs(f) > kLimitTol) ++limit_bad;
      }

      for (std::size_t k = 0; k < per_param; ++k, ++cases) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        const double f = d.joint_cdf(x);
        if (!(f >= 0.0 && f <= 1.0)) ++range_bad;
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double> y = x;
          y[i] += rng.uniform(0.0, 0.5);
          if (d.joint_cdf(y) < f - kMonotoneSlack) ++mono_bad;
        }
        const double dens = d.joint_density(x);
        if (!(dens >= 0.0)) ++neg_density;
        const double fd = fd_mixed_partial(d, x, n == 3 ? 2e-2 : 2e-3);
        const double rel = std::abs(dens - fd) / std::max(std::abs(dens), kMixedRelFloor);
        worst_mixed = std::max(worst_mixed, rel);
        if (rel > kMixedRelTol) ++mixed_bad;
      }
    }
  }
  const bool ok = range_bad + mono_bad + limit_bad + neg_density + mixed_bad == 0;
  return {ok, fmt("%zu cases: range %zu, monotone %zu, limits %zu (max |err| %.1e), density<0 %zu, "
                  "mixed-partial %zu (max rel %.1e, tol %.0e)",
                  cases, range_bad, mono_bad, limit_bad, worst_limit, neg_density, mixed_bad, worst_mixed, kMixedRelTol)};
}

// ---------------------------------------------------------------- 3

Outcome normalization() {
  const auto t0 = Clock::now();
  jdan::JdanArch arch;  // default M, N_J, W_J
  arch.n_vars = 2;
  arch.location = {0.5, 0.5};
  arch.scale = {0.2, 0.2};
  Rng rng(77);
  const jdan::ForecastDistribution d(arch, jdan::random_params(arch, rng));
  // composite Simpson on [-0.5, 1.5]^2
  const std::size_t m = 200;
  const double a = -0.5, b = 1.5, h = (b - a) / static_cast<double>(m);
  auto w = [&](std::size_t k) { return k == 0 || k == m ? 1.0 : (k % 2 ? 4.0 : 2.0); };
  double total = 0.0;
  std::vector<double> x(2);
  for (std::size_t i = 0; i <= m; ++i) {
    x[0] = a + h * static_cast<double>(i);
    for (std::size_t j = 0; j <= m; ++j) {
      x[1] = a + h * static_cast<double>(j);
      total += w(i) * w(j) * d.joint_density(x);
    }
  }
  total *= h * h / 9.0;
  const double secs = seconds_since(t0);
  const bool ok = total >= kNormLo && total <= kNormHi && secs < kNormSeconds;
  return {ok, fmt("integral %.6f (range [%.2f, %.2f]), %.1f s (limit %.0f s)", total, kNormLo, kNormHi, secs,
                  kNormSeconds)};
}

// ---------------------------------------------------------------- 4

Outcome omega_consistency() {
  synth::SynthConfig sc = synth::default_config(3);
  sc.seed = 41;
  const std::size_t delta = 4;
  const synth::SynthData data = synth::generate(sc, 3000);
  const auto split = pipeline::split_and_normalize(pipeline::build_windows(data.series, delta, 1));
  cli::ArchConfig ac;
  ac.nfn_blocks = 1;
  ac.nfn_width = 16;
  ac.jdan_blocks = 1;
  ac.jdan_width = 8;
  ac.components = 4;
  nfn::NfnArch arch = cli::make_arch(ac, 3, sc.n_features(), delta);
  trainer::set_target_scaling(arch.jdan, split.train);
  trainer::TrainConfig tc;
  tc.max_epochs = 15;
  tc.seed = 3;
  const auto fr = trainer::fit(nfn::Nfn(arch, 3), split.train, split.validation, tc);

  const analytics::SecurityThresholds th = analytics::default_thresholds();
  double worst = 0.0, slowest = 0.0, omega_min = 1.0, omega_max = 0.0;
  const std::size_t stride = split.test.size() / kOmegaWindows;
  for (std::size_t k = 0; k < kOmegaWindows; ++k) {
    const jdan::ForecastDistribution d = fr.best.distribution(split.test[k * stride].x);
    const auto t0 = Clock::now();
    const analytics::OmegaResult r = analytics::omega(d, th);
    slowest = std::max(slowest, seconds_since(t0));
    const double p = analytics::secure_scenario_proportion(d, th, kOmegaSamples, 1000 + k) / 100.0;
    worst = std::max(worst, std::abs(r.omega - p));
    omega_min = std::min(omega_min, r.omega);
    omega_max = std::max(omega_max, r.omega);
  }
  const bool ok = worst <= kOmegaTol && slowest < kOmegaSeconds;
  return {ok, fmt("%zu windows, Omega in [%.3f, %.3f], max |Omega - MC| %.4f (tol %.3f), slowest Omega %.2e s "
                  "(limit %.1f s)",
                  kOmegaWindows, omega_min, omega_max, worst, kOmegaTol, slowest, kOmegaSeconds)};
}

// ---------------------------------------------------------------- 5

Outcome synthetic_reliability() {
  synth::SynthConfig sc = synth::default_config(2);
  sc.seed = 7;
  const std::size_t delta = 4;
  const synth::SynthData data = synth::generate(sc, 10000 + delta);  // 10000 windows: 4000/2000/4000
  const auto split = pipeline::split_and_normalize(pipeline::build_windows(data.series, delta, 1));
  cli::ArchConfig ac;
  ac.nfn_blocks = 1;
  ac.nfn_width = 32;
  ac.jdan_blocks = 1;
  ac.jdan_width = 16;
  ac.components = 8;
  nfn::NfnArch arch = cli::make_arch(ac, 2, sc.n_features(), delta);
  trainer::set_target_scaling(arch.jdan, split.train);
  trainer::TrainConfig tc;
  tc.max_epochs = 80;
  tc.patience = 40;
  tc.learning_rate = 3e-3;
  tc.seed = 1;
  const auto t0 = Clock::now();
  const auto fr = trainer::fit(nfn::Nfn(arch, 1), split.train, split.validation, tc);
  const double train_secs = seconds_since(t0);

  evaluation::ReliabilityOptions ro;
  const auto jd = evaluation::reliability(evaluation::JdanModel(fr.best), split.test, ro);
  const synth::Oracle oracle(sc, data);
  const auto orc = evaluation::reliability(evaluation::OracleModel(oracle), split.test, ro);
  std::vector<evaluation::ReliabilityReport> baselines;
  baselines.push_back(evaluation::reliability(
      evaluation::MkdeConditionalModel(evaluation::mkde_from_windows(split.train)), split.test, ro));
  const auto marginals = evaluation::marginal_models(split.train, split.validation, fr.best.arch(), tc);
  std::vector<const nfn::Nfn*> mp;
  for (const auto& m : marginals) mp.push_back(&m.best);
  for (auto fam : {evaluation::CopulaFamily::kClayton, evaluation::CopulaFamily::kFrank})
    for (double theta : {0.5, 1.0, 1.5}) {
      const evaluation::CopulaModel cm({fam, theta}, mp);
      auto r = evaluation::reliability(cm, split.test, ro);
      r.model = cm.name();
      baselines.push_back(std::move(r));
    }

  bool ok = train_secs <= kTrainSeconds;
  std::ostringstream os;
  os << "b-bar % per dimension: jdan-nfn";
  for (std::size_t i = 0; i < 2; ++i) {
    os << ' ' << fmt("%.2f", 100 * jd.dims[i].bbar);
    ok = ok && jd.dims[i].bbar <= kJdanBbarMax;
  }
  os << "; oracle";
  for (std::size_t i = 0; i < 2; ++i) {
    os << ' ' << fmt("%.2f", 100 * orc.dims[i].bbar);
    ok = ok && orc.dims[i].bbar <= kOracleBbarMax;
  }
  std::vector<std::string> beaten_by;
  for (const auto& b : baselines) {
    os << "; " << b.model;
    for (std::size_t i = 0; i < 2; ++i) {
      os << ' ' << fmt("%.2f", 100 * b.dims[i].bbar);
      if (!(jd.dims[i].bbar < b.dims[i].bbar)) beaten_by.push_back(b.model + " dim " + std::to_string(i + 1));
    }
  }
  ok = ok && beaten_by.empty();
  os << fmt("; training %.0f s (limit %.0f s)", train_secs, kTrainSeconds);
  if (!beaten_by.empty()) {
    os << "; jdan-nfn not strictly lowest against:";
    for (const auto& s : beaten_by) os << ' ' << s << ',';
  }
  return {ok, os.str()};
}

// ---------------------------------------------------------------- 6

Outcome miso_counterexample() {
  const evaluation::MisoDemoReport r = evaluation::miso_counterexample_demo();
  const bool ok = r.min_first_partial >= kFirstPartialMin && r.fraction_negative >= kNegativeNetFraction &&
                  r.jdan_negative_points == 0;
  return {ok, fmt("min first partial %.2e (>= %.0e), %zu/%zu generic nets with mixed partial < -1e-4, "
                  "min generic mixed %.2e; JDAN nets %zu with %zu points below -1e-8 (min %.2e)",
                  r.min_first_partial, kFirstPartialMin, r.nets_with_negative_mixed, r.nets, r.min_mixed_generic,
                  r.jdan_nets, r.jdan_negative_points, r.min_mixed_jdan)};
}

// ---------------------------------------------------------------- 7

Outcome coupling_evidence() {
  const auto target = evaluation::correlated_mixture_target();
  evaluation::FitTestOptions mix;
  const auto fm = evaluation::coupling_fit_test(target, mix);
  evaluation::FitTestOptions lit = mix;
  lit.coupling = jdan::Coupling::kPaperLiteral;
  lit.components = 1;
  const auto fl = evaluation::coupling_fit_test(target, lit);

  // factorization residual of the fitted paper-literal density
  const jdan::ForecastDistribution d(fl.arch, fl.params);
  double residual = 0.0;
  std::vector<double> x(2);
  for (std::size_t i = 0; i <= 40; ++i)
    for (std::size_t j = 0; j <= 40; ++j) {
      x = {-0.5 + 2.0 * static_cast<double>(i) / 40.0, -0.5 + 2.0 * static_cast<double>(j) / 40.0};
      residual = std::max(residual, std::abs(d.joint_density(x) - d.marginal_pdf(0, x[0]) * d.marginal_pdf(1, x[1])));
    }
  const bool ok = residual < kFactorizationTol && fm.max_error <= kMixtureFitMax && fl.max_error > kLiteralFitMin;
  return {ok, fmt("paper-literal factorization residual %.1e (< %.0e); max CDF grid error: mixture %.4f (<= %.2f), "
                  "paper-literal %.4f (> %.2f)",
                  residual, kFactorizationTol, fm.max_error, kMixtureFitMax, fl.max_error, kLiteralFitMin)};
}

// ---------------------------------------------------------------- 8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome grid_and_early_stop() {
  const auto t0 = Clock::now();
  const fs::path root = fs::current_path() / "acceptance_grid";
  fs::remove_all(root);
  cli::RunConfig cfg;
  cfg.seed = 19;
  cfg.train.seed = 19;
  cfg.data.synth = synth::default_config(3);
  cfg.data.length = 2000;
  cfg.data.delta_minutes = 45;
  cfg.arch.components = 2;
  cfg.train.max_epochs = 60;
  cfg.train.patience = 3;
  cfg.grid.space.nfn_blocks = {1};
  cfg.grid.space.nfn_width = {8};
  cfg.grid.space.jdan_blocks = {1, 2};
  cfg.grid.space.jdan_width = {4, 8};
  cfg.grid.delta_minutes = {45};

  std::vector<fs::path> dirs;
  for (std::size_t run = 0; run < 2; ++run) {
    cli::RunConfig c = cfg;
    c.output_dir = (root / ("run" + std::to_string(run))).string();
    c.jobs = run == 0 ? 1 : 2;  // scheduling must not change the result
    c.validate();
    cli::cmd_generate(c);
    cli::cmd_grid_search(c);
    dirs.emplace_back(c.output_dir);
  }
  const double secs = seconds_since(t0);

  const Json a = read_json_file(dirs[0] / cli::files::kGrid);
  const Json b = read_json_file(dirs[1] / cli::files::kGrid);
  const bool same_table = cli::strip_timing(a).dump() == cli::strip_timing(b).dump();
  const bool same_ckpt = slurp(dirs[0] / cli::files::kGridCheckpoint) == slurp(dirs[1] / cli::files::kGridCheckpoint);
  const bool same_data = slurp(dirs[0] / cli::files::kSeries) == slurp(dirs[1] / cli::files::kSeries);

  const Json& table = a.at("table");
  bool sorted = true, early = false;
  double best = -std::numeric_limits<double>::infinity();
  for (const Json& row : table) best = std::max(best, row.at("val_ll").get<double>());
  for (std::size_t k = 1; k < table.size(); ++k)
    sorted = sorted && table[k - 1].at("val_ll").get<double>() >= table[k].at("val_ll").get<double>();
  for (const Json& row : table) early = early || row.at("stop_reason").get<std::string>() == "early-stop";
  const bool best_ok = table.front().at("val_ll").get<double>() == best;

  const bool ok = table.size() == 4 && same_table && same_ckpt && same_data && sorted && best_ok && early &&
                  secs <= kGridSeconds;
  return {ok, fmt("%zu rows, reruns identical (table %s, checkpoint %s, data %s), sorted %s, best row is max %s, "
                  "early stop seen %s, %.0f s (limit %.0f s)",
                  table.size(), same_table ? "yes" : "no", same_ckpt ? "yes" : "no", same_data ? "yes" : "no",
                  sorted ? "yes" : "no", best_ok ? "yes" : "no", early ? "yes" : "no", secs, kGridSeconds)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_check},
      {2, "CDF axioms", cdf_axioms},
      {3, "density normalization", normalization},
      {4, "Omega vs Monte-Carlo", omega_consistency},
      {5, "synthetic reliability ordering", synthetic_reliability},
      {6, "monotone MISO counterexample", miso_counterexample},
      {7, "coupling evidence", coupling_evidence},
      {8, "early stopping and grid search", grid_and_early_stop},
  };
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
