#pragma once

#include <memory>
#include <vector>

#include "mdc/copula.hpp"
#include "mdc/mkde.hpp"
#include "mdc/nfn.hpp"
#include "mdc/reliability.hpp"
#include "mdc/synth.hpp"
#include "mdc/trainer.hpp"

namespace mdc::evaluation {

// The trained forecast network; conditionals come from each window's JDAN.
class JdanModel : public ConditionalModel {
 public:
  explicit JdanModel(const nfn::Nfn& model, std::string name = "jdan-nfn") : model_(model), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::size_t dims() const override { return model_.arch().jdan.n_vars; }
  std::unique_ptr<BoundConditional> bind(const pipeline::SampleWindow& w) const override;

 private:
  const nfn::Nfn& model_;
  std::string name_;
};

// Exact Gaussian conditionals of the synthetic generator.
class OracleModel : public ConditionalModel {
 public:
  explicit OracleModel(const synth::Oracle& oracle) : oracle_(oracle) {}
  std::string name() const override { return "oracle"; }
  std::size_t dims() const override { return oracle_.config().n_gates; }
  std::unique_ptr<BoundConditional> bind(const pipeline::SampleWindow& w) const override;

 private:
  const synth::Oracle& oracle_;
};

class MkdeConditionalModel : public ConditionalModel {
 public:
  explicit MkdeConditionalModel(MkdeModel model) : model_(std::move(model)) {}
  std::string name() const override { return "mkde"; }
  std::size_t dims() const override { return model_.dims; }
  std::unique_ptr<BoundConditional> bind(const pipeline::SampleWindow& w) const override;
  const MkdeModel& model() const { return model_; }

 private:
  MkdeModel model_;
};

// Archimedean copula over per-variable forecast marginals (one N=1 network
// per variable).
class CopulaModel : public ConditionalModel {
 public:
  CopulaModel(CopulaSpec spec, std::vector<const nfn::Nfn*> marginals);
  std::string name() const override;
  std::size_t dims() const override { return marginals_.size(); }
  std::unique_ptr<BoundConditional> bind(const pipeline::SampleWindow& w) const override;

 private:
  CopulaSpec spec_;
  std::vector<const nfn::Nfn*> marginals_;
};

// Copies of windows keeping only target variable i.
std::vector<pipeline::SampleWindow> select_target(const std::vector<pipeline::SampleWindow>& windows, std::size_t i);

// Trains one univariate (N=1) network per target variable. `arch` supplies
// everything but n_vars and the target scaling.
std::vector<trainer::FitResult> marginal_models(const std::vector<pipeline::SampleWindow>& train,
                                                const std::vector<pipeline::SampleWindow>& validation,
                                                nfn::NfnArch arch, const trainer::TrainConfig& cfg);

MkdeModel mkde_from_windows(const std::vector<pipeline::SampleWindow>& train);

}  // namespace mdc::evaluation
