#include "mdc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mdc/analytics.hpp"
#include "mdc/error.hpp"
#include "mdc/random.hpp"

namespace mdc::evaluation {

namespace {

class JdanBound : public BoundConditional {
 public:
  explicit JdanBound(jdan::ForecastDistribution d) : dist_(std::move(d)) {}
  double cdf(std::size_t i, std::span<const double> sm) const override { return dist_.conditional_cdf(i, sm); }
  double quantile(std::size_t i, std::span<const double> sm, double alpha) const override {
    return analytics::quantile(dist_, i, sm, alpha);
  }

 private:
  jdan::ForecastDistribution dist_;
};

class MvnBound : public BoundConditional {
 public:
  explicit MvnBound(Mvn mvn) : mvn_(std::move(mvn)) {}
  double cdf(std::size_t i, std::span<const double> sm) const override {
    return mvn_.conditional_cdf(i, std::vector<double>(sm.begin(), sm.end()));
  }
  double quantile(std::size_t i, std::span<const double> sm, double alpha) const override {
    return mvn_.conditional_quantile(i, std::vector<double>(sm.begin(), sm.end()), alpha);
  }

 private:
  Mvn mvn_;
};

class MkdeBound : public BoundConditional {
 public:
  explicit MkdeBound(const MkdeModel& m) : m_(m) {}
  double cdf(std::size_t i, std::span<const double> sm) const override { return m_.conditional_cdf(i, sm); }

 private:
  const MkdeModel& m_;
};

class CopulaBound : public BoundConditional {
 public:
  CopulaBound(CopulaSpec spec, std::vector<jdan::ForecastDistribution> marginals)
      : spec_(spec), marginals_(std::move(marginals)) {}

  double cdf(std::size_t i, std::span<const double> sm) const override {
    constexpr double kEdge = 1e-12;
    std::vector<double> u(sm.size());
    for (std::size_t k = 0; k < sm.size(); ++k) {
      const double v = marginals_[k].marginal_cdf(0, sm[k]);
      // conditioning coordinates must stay inside (0, 1) for the generator derivatives
      u[k] = k == i ? v : std::clamp(v, kEdge, 1.0 - kEdge);
    }
    return copula_conditional_cdf(i, u, spec_);
  }

 private:
  CopulaSpec spec_;
  std::vector<jdan::ForecastDistribution> marginals_;
};

}  // namespace

std::unique_ptr<BoundConditional> JdanModel::bind(const pipeline::SampleWindow& w) const {
  return std::make_unique<JdanBound>(model_.distribution(w.x));
}

std::unique_ptr<BoundConditional> OracleModel::bind(const pipeline::SampleWindow& w) const {
  return std::make_unique<MvnBound>(oracle_.target_distribution(w.anchor));
}

std::unique_ptr<BoundConditional> MkdeConditionalModel::bind(const pipeline::SampleWindow&) const {
  return std::make_unique<MkdeBound>(model_);
}

CopulaModel::CopulaModel(CopulaSpec spec, std::vector<const nfn::Nfn*> marginals)
    : spec_(spec), marginals_(std::move(marginals)) {
  if (marginals_.empty()) throw std::invalid_argument("copula model needs marginal forecasters");
  spec_.validate(marginals_.size());
  for (const nfn::Nfn* m : marginals_)
    if (!m || m->arch().jdan.n_vars != 1) throw std::invalid_argument("copula marginals must be univariate networks");
}

std::string CopulaModel::name() const {
  std::ostringstream os;
  os << to_string(spec_.family) << "(theta=" << spec_.theta << ")";
  return os.str();
}

std::unique_ptr<BoundConditional> CopulaModel::bind(const pipeline::SampleWindow& w) const {
  std::vector<jdan::ForecastDistribution> dists;
  dists.reserve(marginals_.size());
  for (const nfn::Nfn* m : marginals_) dists.push_back(m->distribution(w.x));
  return std::make_unique<CopulaBound>(spec_, std::move(dists));
}

std::vector<pipeline::SampleWindow> select_target(const std::vector<pipeline::SampleWindow>& windows, std::size_t i) {
  std::vector<pipeline::SampleWindow> out = windows;
  for (auto& w : out) w.target = {w.target.at(i)};
  return out;
}

std::vector<trainer::FitResult> marginal_models(const std::vector<pipeline::SampleWindow>& train,
                                                const std::vector<pipeline::SampleWindow>& validation,
                                                nfn::NfnArch arch, const trainer::TrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("marginal_models needs training windows");
  const std::size_t n = train.front().target.size();
  std::vector<trainer::FitResult> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto tr = select_target(train, i);
    const auto va = select_target(validation, i);
    nfn::NfnArch a = arch;
    a.jdan.n_vars = 1;
    trainer::set_target_scaling(a.jdan, tr);
    trainer::TrainConfig c = cfg;
    c.seed = mix_seed(cfg.seed, 1000 + i);
    out.push_back(trainer::fit(nfn::Nfn(a, c.seed), tr, va, c));
  }
  return out;
}

MkdeModel mkde_from_windows(const std::vector<pipeline::SampleWindow>& train) {
  std::vector<std::vector<double>> targets;
  targets.reserve(train.size());
  for (const auto& w : train) targets.push_back(w.target);
  return mkde_fit(targets);
}

}  // namespace mdc::evaluation
