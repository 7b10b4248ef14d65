#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdc/tensor.hpp"

namespace mdc::ad {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are shaped like the parameters
// they track; the step counter increases by one per step().
class Adam {
 public:
  Adam(std::span<const Tensor* const> params, AdamOptions options = {});

  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

  std::int64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t step_ = 0;
};

// Rescales grads in place so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor* const> grads, double max_norm);

}  // namespace mdc::ad
