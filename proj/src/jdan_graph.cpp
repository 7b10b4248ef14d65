#include "mdc/jdan_graph.hpp"

#include "mdc/error.hpp"

namespace mdc::jdan {

namespace {

using ad::Var;

struct Block {
  Var wa, wb, ba, bb;
};

Var run_blocks_value(const std::vector<Block>& blocks, Var a, std::size_t w) {
  for (const Block& b : blocks) {
    Var z1 = ad::sigmoid(ad::batched_matvec(b.wa, a, w, w) + b.ba);
    Var z2 = ad::sigmoid(ad::batched_matvec(b.wb, z1, w, w) + b.bb);
    a = a + z2;
  }
  return a;
}

void check_params(const JdanArch& arch, const GraphParams& p) {
  if (p.weights.cols() != arch.weight_count() || p.biases.cols() != arch.bias_count())
    throw ShapeError("jdan graph parameters do not match architecture");
  if (arch.coupling == Coupling::kMixture && (!p.logits.valid() || p.logits.cols() != arch.n_components))
    throw ShapeError("mixture coupling requires one logit per component");
}

}  // namespace

UnitGraph unit_graph(const JdanArch& arch, const GraphParams& params, std::size_t component, std::size_t var,
                     Var margins) {
  ad::Graph& g = *margins.graph;
  const UnitShape us = arch.unit_shape();
  const std::size_t w = us.width;
  const std::size_t k = arch.unit_index(component, var);
  const std::size_t wc = us.weight_count(), bc = us.bias_count();
  const std::size_t rows = params.weights.rows();

  Var wu = ad::slice_cols(params.weights, k * wc, wc);
  Var bu = ad::slice_cols(params.biases, k * bc, bc);
  Var w_in = ad::slice_cols(wu, 0, w);
  Var b_in = ad::slice_cols(bu, 0, w);
  Var w_out = ad::slice_cols(wu, wc - w, w);
  Var b_out = ad::slice_cols(bu, bc - 1, 1);
  std::vector<Block> blocks;
  for (std::size_t blk = 0; blk < us.n_blocks; ++blk) {
    const std::size_t wo = w + 2 * blk * w * w;
    const std::size_t bo = w + 2 * blk * w;
    blocks.push_back({ad::slice_cols(wu, wo, w * w), ad::slice_cols(wu, wo + w * w, w * w),
                      ad::slice_cols(bu, bo, w), ad::slice_cols(bu, bo + w, w)});
  }

  Var x = ad::slice_cols(margins, var, 1);
  if (arch.loc(var) != 0.0 || arch.scl(var) != 1.0) x = ad::scale(ad::add_scalar(x, -arch.loc(var)), 1.0 / arch.scl(var));

  Var a = ad::sigmoid(x * w_in + b_in);
  Var da = ad::sigmoid_slope(a) * w_in;
  for (const Block& b : blocks) {
    Var z1 = ad::sigmoid(ad::batched_matvec(b.wa, a, w, w) + b.ba);
    Var dz1 = ad::sigmoid_slope(z1) * ad::batched_matvec(b.wa, da, w, w);
    Var z2 = ad::sigmoid(ad::batched_matvec(b.wb, z1, w, w) + b.bb);
    Var dz2 = ad::sigmoid_slope(z2) * ad::batched_matvec(b.wb, dz1, w, w);
    a = a + z2;
    da = da + dz2;
  }
  Var value = ad::sum_cols(a * w_out) + b_out;
  Var slope = ad::sum_cols(da * w_out);

  Var upper_a = run_blocks_value(blocks, g.constant(ad::Tensor::matrix(rows, w, 1.0)), w);
  Var lower_a = run_blocks_value(blocks, g.constant(ad::Tensor::matrix(rows, w, 0.0)), w);
  Var upper = ad::sum_cols(upper_a * w_out) + b_out;
  Var lower = ad::sum_cols(lower_a * w_out) + b_out;
  Var gap = upper - lower;
  UnitGraph out;
  out.cdf = (value - lower) / gap;
  out.pdf = slope / gap;
  if (arch.scl(var) != 1.0) out.pdf = ad::scale(out.pdf, 1.0 / arch.scl(var));
  return out;
}

Var log_density_graph(const JdanArch& arch, const GraphParams& params, const ad::Tensor& margins, double floor) {
  arch.validate();
  check_params(arch, params);
  if (margins.cols() != arch.n_vars) throw ShapeError("margin matrix must have one column per variable");
  ad::Graph& g = *params.weights.graph;
  Var x = g.constant(margins);
  Var density;
  if (arch.coupling == Coupling::kMixture) {
    Var pi = ad::softmax_rows(params.logits);
    for (std::size_t m = 0; m < arch.n_components; ++m) {
      Var term = ad::slice_cols(pi, m, 1);
      for (std::size_t i = 0; i < arch.n_vars; ++i) term = term * unit_graph(arch, params, m, i, x).pdf;
      density = density.valid() ? density + term : term;
    }
  } else {
    for (std::size_t i = 0; i < arch.n_vars; ++i) {
      UnitGraph u = unit_graph(arch, params, 0, i, x);
      Var f = ad::scale(u.cdf * u.pdf, 2.0);
      density = density.valid() ? density * f : f;
    }
  }
  if (density.rows() != margins.rows()) density = ad::broadcast_to(density, margins.rows(), 1);
  return ad::log(ad::clamp_min(density, floor));
}

Var joint_cdf_graph(const JdanArch& arch, const GraphParams& params, const ad::Tensor& margins) {
  arch.validate();
  check_params(arch, params);
  if (margins.cols() != arch.n_vars) throw ShapeError("margin matrix must have one column per variable");
  ad::Graph& g = *params.weights.graph;
  Var x = g.constant(margins);
  Var cdf;
  if (arch.coupling == Coupling::kMixture) {
    Var pi = ad::softmax_rows(params.logits);
    for (std::size_t m = 0; m < arch.n_components; ++m) {
      Var term = ad::slice_cols(pi, m, 1);
      for (std::size_t i = 0; i < arch.n_vars; ++i) term = term * unit_graph(arch, params, m, i, x).cdf;
      cdf = cdf.valid() ? cdf + term : term;
    }
  } else {
    for (std::size_t i = 0; i < arch.n_vars; ++i) {
      Var c = unit_graph(arch, params, 0, i, x).cdf;
      cdf = cdf.valid() ? cdf * c : c;
    }
    cdf = cdf * cdf;
  }
  if (cdf.rows() != margins.rows()) cdf = ad::broadcast_to(cdf, margins.rows(), 1);
  return cdf;
}

}  // namespace mdc::jdan
