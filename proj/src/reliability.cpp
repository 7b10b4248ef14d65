#include "mdc/reliability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mdc/analytics.hpp"
#include "mdc/csv.hpp"
#include "mdc/error.hpp"

namespace mdc::evaluation {

double BoundConditional::quantile(std::size_t i, std::span<const double> sm, double alpha) const {
  std::vector<double> x(sm.begin(), sm.end());
  return analytics::invert_cdf(
      [&](double v) {
        x[i] = v;
        return cdf(i, x);
      },
      alpha);
}

std::vector<double> alpha_grid() {
  std::vector<double> a(kAlphaCount);
  for (std::size_t j = 0; j < kAlphaCount; ++j) a[j] = static_cast<double>(j + 1) / 100.0;
  return a;
}

Json ReliabilityReport::to_json() const {
  Json dims_j = Json::array();
  for (std::size_t i = 0; i < dims.size(); ++i)
    dims_j.push_back({{"dimension", i + 1},
                      {"b", dims[i].b},
                      {"bbar", dims[i].bbar},
                      {"n_samples", dims[i].n_samples},
                      {"n_failures", dims[i].n_failures}});
  return Json{{"model", model}, {"alpha", alpha}, {"dimensions", std::move(dims_j)}};
}

void ReliabilityReport::write_csv(std::ostream& out) const {
  csv::write_row(out, {"model", "dimension", "alpha", "b"});
  for (std::size_t i = 0; i < dims.size(); ++i)
    for (std::size_t j = 0; j < alpha.size(); ++j)
      csv::write_row(out, {model, std::to_string(i + 1), csv::format_double(alpha[j]), csv::format_double(dims[i].b[j])});
}

ReliabilityReport reliability(const ConditionalModel& model, const std::vector<pipeline::SampleWindow>& test,
                              const ReliabilityOptions& options) {
  if (test.empty()) throw std::invalid_argument("reliability needs a nonempty test split");
  const std::size_t n = model.dims();
  for (const auto& w : test)
    if (w.target.size() != n) throw ShapeError("test target length does not match model dimension");
  const std::vector<double> alpha = alpha_grid();
  const std::size_t n_alpha = alpha.size();

  // covered[i][j]: samples with H(q^alpha_j - y_i) = 1
  std::vector<std::vector<std::size_t>> covered(n, std::vector<std::size_t>(n_alpha, 0));
  std::vector<std::size_t> ok(n, 0), failed(n, 0);
  std::string first_error;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    std::vector<std::vector<std::size_t>> cov(n, std::vector<std::size_t>(n_alpha, 0));
    std::vector<std::size_t> good(n, 0), bad(n, 0);
    std::string err;
    for (std::size_t k = next++; k < test.size(); k = next++) {
      const auto& w = test[k];
      std::unique_ptr<BoundConditional> bc;
      try {
        bc = model.bind(w);
      } catch (const NumericError& e) {
        for (std::size_t i = 0; i < n; ++i) ++bad[i];
        if (err.empty()) err = e.what();
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) {
        try {
          if (options.route == ReliabilityRoute::kPit) {
            const double u = bc->cdf(i, w.target);
            if (!std::isfinite(u)) throw NumericError("non-finite conditional CDF");
            for (std::size_t j = 0; j < n_alpha; ++j) cov[i][j] += u <= alpha[j] ? 1 : 0;
          } else {
            std::vector<std::size_t> hits(n_alpha, 0);
            for (std::size_t j = 0; j < n_alpha; ++j)
              hits[j] = static_cast<std::size_t>(unit_step(bc->quantile(i, w.target, alpha[j]) - w.target[i]));
            for (std::size_t j = 0; j < n_alpha; ++j) cov[i][j] += hits[j];
          }
          ++good[i];
        } catch (const NumericError& e) {
          ++bad[i];
          if (err.empty()) err = e.what();
        }
      }
    }
    std::lock_guard lock(mu);
    for (std::size_t i = 0; i < n; ++i) {
      ok[i] += good[i];
      failed[i] += bad[i];
      for (std::size_t j = 0; j < n_alpha; ++j) covered[i][j] += cov[i][j];
    }
    if (first_error.empty()) first_error = err;
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.jobs, test.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ReliabilityReport r;
  r.model = model.name();
  r.alpha = alpha;
  r.dims.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<double>(failed[i]) > options.max_failure_fraction * static_cast<double>(test.size()))
      throw NumericError(model.name() + ": conditional quantile failed for " + std::to_string(failed[i]) + " of " +
                         std::to_string(test.size()) + " samples in dimension " + std::to_string(i + 1) +
                         " (first error: " + first_error + ")");
    if (ok[i] == 0) throw NumericError(model.name() + ": no usable samples in dimension " + std::to_string(i + 1));
    auto& d = r.dims[i];
    d.n_samples = ok[i];
    d.n_failures = failed[i];
    d.b.resize(n_alpha);
    double s = 0.0;
    for (std::size_t j = 0; j < n_alpha; ++j) {
      d.b[j] = alpha[j] - static_cast<double>(covered[i][j]) / static_cast<double>(ok[i]);
      s += std::abs(d.b[j]);
    }
    d.bbar = s / static_cast<double>(n_alpha);
  }
  return r;
}

}  // namespace mdc::evaluation
