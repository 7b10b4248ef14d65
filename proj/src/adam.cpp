#include "mdc/adam.hpp"

#include <cmath>
#include <string>

#include "mdc/error.hpp"

namespace mdc::ad {

Adam::Adam(std::span<const Tensor* const> params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.emplace_back(p->shape(), 0.0);
    v_.emplace_back(p->shape(), 0.0);
  }
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameter tensors");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(m_[k]) || !grads[k]->same_shape(m_[k]))
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(k));
    if (!grads[k]->all_finite()) throw NumericError("adam: non-finite gradient for parameter " + std::to_string(k));
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t q = 0; q < p.size(); ++q) {
      m[q] = b1 * m[q] + (1.0 - b1) * g[q];
      v[q] = b2 * v[q] + (1.0 - b2) * g[q] * g[q];
      const double mhat = m[q] / c1;
      const double vhat = v[q] / c2;
      p[q] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

double clip_global_norm(std::span<Tensor* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads)
    for (double v : g->values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor* g : grads)
      for (double& v : g->values()) v *= s;
  }
  return norm;
}

}  // namespace mdc::ad
