#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdc/checkpoint.hpp"
#include "mdc/commands.hpp"
#include "mdc/csv.hpp"
#include "mdc/error.hpp"

using namespace mdc;
using namespace mdc::cli;
namespace fs = std::filesystem;

namespace {

Json tiny_config(const fs::path& out) {
  return Json{{"seed", 7},
              {"output_dir", out.string()},
              {"data", {{"synth", {{"n_gates", 3}}}, {"length", 400}, {"delta_minutes", 30}}},
              {"arch", {{"nfn_blocks", 1}, {"nfn_width", 4}, {"jdan_blocks", 1}, {"jdan_width", 3}, {"components", 2}}},
              {"train", {{"max_epochs", 2}}},
              {"evaluate", {{"baselines", Json::array({"mkde", "oracle"})}}},
              {"forecast", {{"max_windows", 2}, {"grid_points", 20}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mdc-unit-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
  const RunConfig d = run_config_from_json(Json::object());
  CHECK(d.arch.nfn_blocks == 8);
  CHECK(d.arch.jdan_blocks == 4);
  CHECK(d.arch.nfn_width == 64);
  CHECK(d.arch.jdan_width == 64);
  CHECK(d.train.batch_size == 32);
  CHECK(d.train.learning_rate == 1e-3);
  CHECK(d.thresholds == std::vector<double>{0.7, 0.65, 0.6});
  CHECK(d.evaluate.thetas == std::vector<double>{0.5, 1.0, 1.5});
  CHECK(d.data.synth.has_value());
  CHECK_THROWS_AS(run_config_from_json(Json{{"sead", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"arch", {{"width", 3}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"seed", "seven"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"seed", -1}}), ConfigError);
  const RunConfig lit = run_config_from_json(Json{{"arch", {{"coupling", "paper-literal"}}}});
  CHECK(lit.arch.components == 1);
}

TEST_CASE("overrides replace seed, jobs and coupling") {
  RunConfig c = run_config_from_json(Json::object());
  Overrides o;
  o.seed = 99;
  o.jobs = 3;
  o.coupling = jdan::Coupling::kPaperLiteral;
  apply_overrides(c, o);
  CHECK(c.seed == 99);
  CHECK(c.train.seed == 99);
  CHECK(c.jobs == 3);
  CHECK(c.arch.components == 1);
}

TEST_CASE("strip_timing removes timing keys at any depth") {
  const Json j{{"a", 1}, {"seconds", 2.0}, {"b", {{"timing", {{"seconds", 1}}}, {"c", Json::array({{{"seconds", 3}}})}}}};
  CHECK(strip_timing(j) == Json{{"a", 1}, {"b", {{"c", Json::array({Json::object()})}}}});
}

TEST_CASE("commands before generate report a config error") {
  const fs::path out = scratch("missing");
  const RunConfig c = run_config_from_json(tiny_config(out));
  std::ostringstream o, e;
  CHECK(run_command("train", c, o, e) == 2);
  CHECK(e.str().find("manifest") != std::string::npos);
  CHECK(run_command("bogus", c, o, e) == 2);
}

TEST_CASE("generate is byte-reproducible and has the documented schema") {
  const fs::path a = scratch("gen-a"), b = scratch("gen-b");
  cmd_generate(run_config_from_json(tiny_config(a)));
  cmd_generate(run_config_from_json(tiny_config(b)));
  CHECK(slurp(a / files::kSeries) == slurp(b / files::kSeries));
  CHECK(slurp(a / files::kManifest) == slurp(b / files::kManifest));
  const auto rows = csv::parse(slurp(a / files::kSeries));
  CHECK(rows.front().size() == 1 + 2 * 3 + 5);
  CHECK(rows.size() == 401);
  const Json m = read_json_file(a / files::kManifest);
  CHECK(m.at("delta_steps") == 2);
  Json bad = tiny_config(a);
  bad["data"]["length"] = 0;
  CHECK_THROWS(cmd_generate(run_config_from_json(bad)));
}

TEST_CASE("end-to-end commands on a tiny run") {
  const fs::path out = scratch("e2e");
  const RunConfig c = run_config_from_json(tiny_config(out));
  std::ostringstream o, e;
  REQUIRE(run_command("generate", c, o, e) == 0);
  REQUIRE(run_command("train", c, o, e) == 0);
  const Checkpoint ck = load_checkpoint(out / files::kCheckpoint);
  CHECK(ck.run_config.at("seed") == 7);

  REQUIRE(run_command("forecast", c, o, e) == 0);
  const Json f = read_json_file(out / files::kForecast);
  REQUIRE(f.at("windows").size() == 2);
  const Json& dim = f.at("windows")[0].at("dimensions")[0];
  CHECK(dim.at("grid").size() == 20);
  for (double p : dim.at("conditional_pdf")) CHECK(p >= 0.0);
  CHECK(dim.at("quantiles").size() == 3);

  REQUIRE(run_command("evaluate", c, o, e) == 0);
  const Json ev = read_json_file(out / files::kEvaluation);
  CHECK(ev.at("table").size() == 3 * 3);  // jdan-nfn, mkde, oracle x 3 dimensions

  REQUIRE(run_command("index", c, o, e) == 0);
  const Json ix = read_json_file(out / files::kIndex);
  CHECK(ix.at("omega").get<double>() >= 0.0);
  CHECK(ix.at("omega").get<double>() <= 1.0);
  CHECK(ix.at("corners").size() == 8);

  RunConfig wrong = c;
  wrong.thresholds = {0.5};
  CHECK(run_command("index", wrong, o, e) == 2);

  // a rerun reproduces the reports
  const std::string before = strip_timing(read_json_file(out / files::kTrainReport)).dump();
  REQUIRE(run_command("train", c, o, e) == 0);
  CHECK(strip_timing(read_json_file(out / files::kTrainReport)).dump() == before);
}

TEST_CASE("forecast rejects a checkpoint trained on other data") {
  const fs::path out = scratch("mismatch");
  Json j = tiny_config(out);
  const RunConfig c = run_config_from_json(j);
  cmd_generate(c);
  cmd_train(c);
  j["data"]["delta_minutes"] = 60;
  const RunConfig other = run_config_from_json(j);
  cmd_generate(other);
  std::ostringstream o, e;
  CHECK(run_command("forecast", other, o, e) == 2);
  CHECK(e.str().find("does not match") != std::string::npos);
}
