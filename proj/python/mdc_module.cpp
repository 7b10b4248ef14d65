#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mdc/analytics.hpp"
#include "mdc/checkpoint.hpp"
#include "mdc/commands.hpp"
#include "mdc/copula.hpp"
#include "mdc/error.hpp"
#include "mdc/jdan.hpp"
#include "mdc/synth.hpp"

namespace py = pybind11;
using namespace mdc;

namespace {

jdan::JdanArch make_jdan_arch(std::size_t n_vars, std::size_t n_components, std::size_t n_blocks, std::size_t width,
                              const std::string& coupling, std::vector<double> location, std::vector<double> scale) {
  jdan::JdanArch a;
  a.n_vars = n_vars;
  a.n_components = n_components;
  a.n_blocks = n_blocks;
  a.width = width;
  a.coupling = jdan::coupling_from_string(coupling);
  a.location = std::move(location);
  a.scale = std::move(scale);
  a.validate();
  return a;
}

ad::Tensor window_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("window needs at least one row");
  ad::Tensor t = ad::Tensor::matrix(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw std::invalid_argument("window rows must have equal length");
    for (std::size_t c = 0; c < t.cols(); ++c) t.at(r, c) = rows[r][c];
  }
  return t;
}

}  // namespace

PYBIND11_MODULE(_mdc, m) {
  m.doc() = "JDAN-NFN multivariate security-margin forecasting";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<jdan::JdanArch>(m, "JdanArch")
      .def(py::init(&make_jdan_arch), py::arg("n_vars"), py::arg("n_components") = 4, py::arg("n_blocks") = 4,
           py::arg("width") = 64, py::arg("coupling") = "mixture", py::arg("location") = std::vector<double>{},
           py::arg("scale") = std::vector<double>{})
      .def_readonly("n_vars", &jdan::JdanArch::n_vars)
      .def_readonly("n_components", &jdan::JdanArch::n_components)
      .def_readonly("n_blocks", &jdan::JdanArch::n_blocks)
      .def_readonly("width", &jdan::JdanArch::width)
      .def_property_readonly("coupling", [](const jdan::JdanArch& a) { return jdan::to_string(a.coupling); })
      .def_property_readonly("param_count", &jdan::JdanArch::param_count);

  py::class_<jdan::ForecastDistribution>(m, "Distribution")
      .def(py::init([](const jdan::JdanArch& a, const std::vector<double>& flat) {
             return jdan::ForecastDistribution(a, jdan::JdanParams::from_flat(a, flat));
           }),
           py::arg("arch"), py::arg("params"))
      .def_static(
          "random",
          [](const jdan::JdanArch& a, std::uint64_t seed) {
            Rng rng(seed);
            return jdan::ForecastDistribution(a, jdan::random_params(a, rng));
          },
          py::arg("arch"), py::arg("seed") = 0)
      .def_property_readonly("dims", &jdan::ForecastDistribution::dims)
      .def_property_readonly("mixture_weights", &jdan::ForecastDistribution::mixture_weights)
      .def_property_readonly("params", [](const jdan::ForecastDistribution& d) { return d.params().flat(); })
      .def("joint_cdf", [](const jdan::ForecastDistribution& d, const std::vector<double>& x) { return d.joint_cdf(x); })
      .def("joint_density",
           [](const jdan::ForecastDistribution& d, const std::vector<double>& x) { return d.joint_density(x); })
      .def("marginal_cdf", &jdan::ForecastDistribution::marginal_cdf, py::arg("var"), py::arg("x"))
      .def("marginal_pdf", &jdan::ForecastDistribution::marginal_pdf, py::arg("var"), py::arg("x"))
      .def(
          "conditional_cdf",
          [](const jdan::ForecastDistribution& d, std::size_t i, const std::vector<double>& x) {
            return d.conditional_cdf(i, x);
          },
          py::arg("var"), py::arg("sm"))
      .def(
          "conditional_pdf",
          [](const jdan::ForecastDistribution& d, std::size_t i, const std::vector<double>& x) {
            return d.conditional_pdf(i, x);
          },
          py::arg("var"), py::arg("sm"))
      .def(
          "quantile",
          [](const jdan::ForecastDistribution& d, std::size_t i, const std::vector<double>& x, double a) {
            return analytics::quantile(d, i, x, a);
          },
          py::arg("var"), py::arg("sm"), py::arg("alpha"))
      .def(
          "sample",
          [](const jdan::ForecastDistribution& d, std::size_t n, std::uint64_t seed) {
            const std::vector<double> flat = analytics::sample(d, n, seed);
            std::vector<std::vector<double>> rows(n);
            for (std::size_t k = 0; k < n; ++k)
              rows[k].assign(flat.begin() + static_cast<std::ptrdiff_t>(k * d.dims()),
                             flat.begin() + static_cast<std::ptrdiff_t>((k + 1) * d.dims()));
            return rows;
          },
          py::arg("n"), py::arg("seed") = 0)
      .def(
          "omega",
          [](const jdan::ForecastDistribution& d, const std::vector<double>& gamma) {
            return analytics::omega(d, analytics::SecurityThresholds{gamma}).omega;
          },
          py::arg("gamma"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"))
      .def_property_readonly("run_config", [](const Checkpoint& c) { return c.run_config.dump(); })
      .def_property_readonly("parameter_count", [](const Checkpoint& c) { return c.model.parameter_count(); })
      .def(
          "distribution",
          [](const Checkpoint& c, const std::vector<std::vector<double>>& window) {
            return c.model.distribution(window_tensor(window));
          },
          py::arg("window"), "Forecast distribution for one normalized window (rows = lag steps).");

  m.def(
      "run",
      [](const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> jobs) {
        cli::RunConfig cfg = cli::load_run_config(config_path);
        cli::Overrides o;
        o.seed = seed;
        o.jobs = jobs;
        cli::apply_overrides(cfg, o);
        std::ostringstream out, err;
        const int code = cli::run_command(command, cfg, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("command"), py::arg("config"), py::arg("seed") = py::none(), py::arg("jobs") = py::none(),
      "Runs one CLI command in-process; returns (exit_code, stdout, stderr).");

  m.def(
      "copula_cdf",
      [](const std::vector<double>& u, const std::string& family, double theta) {
        return evaluation::copula_cdf(u, {evaluation::copula_family_from_string(family), theta});
      },
      py::arg("u"), py::arg("family"), py::arg("theta"));

  m.def(
      "synth_margins",
      [](std::size_t n_gates, std::size_t length, std::uint64_t seed) {
        synth::SynthConfig c = synth::default_config(n_gates);
        c.seed = seed;
        const synth::SynthData d = synth::generate(c, length);
        return pipeline::compute_margins(d.series);
      },
      py::arg("n_gates"), py::arg("length"), py::arg("seed") = 7, "Row-major length x n_gates synthetic margins.");
}
