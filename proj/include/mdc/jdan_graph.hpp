#pragma once

#include "mdc/jdan.hpp"
#include "mdc/ops.hpp"

// JDAN evaluated on the autodiff tape so the likelihood can be
// differentiated with respect to the emitted weights and biases.
namespace mdc::jdan {

// Rows are either the batch size (per-sample parameters emitted by the
// forecast network) or 1 (one parameter set shared by every row).
struct GraphParams {
  ad::Var weights;  // rows x arch.weight_count(), all entries > 0
  ad::Var biases;   // rows x arch.bias_count()
  ad::Var logits;   // rows x n_components (mixture mode only)
};

struct UnitGraph {
  ad::Var cdf;  // B x 1 normalized unit CDF
  ad::Var pdf;  // B x 1 derivative with respect to the raw margin
};

UnitGraph unit_graph(const JdanArch& arch, const GraphParams& params, std::size_t component, std::size_t var,
                     ad::Var margins);

// B x 1 column of ln(max(joint density, floor)) at raw margins (B x N).
ad::Var log_density_graph(const JdanArch& arch, const GraphParams& params, const ad::Tensor& margins,
                          double floor = kDensityFloor);

// B x 1 column of joint CDF values at raw margins (B x N).
ad::Var joint_cdf_graph(const JdanArch& arch, const GraphParams& params, const ad::Tensor& margins);

}  // namespace mdc::jdan
