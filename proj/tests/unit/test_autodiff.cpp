#include <doctest.h>

#include <cmath>
#include <functional>

#include "mdc/adam.hpp"
#include "mdc/ops.hpp"
#include "mdc/random.hpp"

using namespace mdc;
using namespace mdc::ad;

namespace {

using Fn = std::function<Var(Graph&, Var)>;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Weighted sum of the op output so every output entry contributes.
double max_grad_error(const Fn& f, Tensor x) {
  Graph g;
  const Var xv = g.parameter(x);
  const Var y = f(g, xv);
  const Tensor w = random_matrix(y.rows(), y.cols(), 99);
  const Var loss = sum(mul(y, g.constant(w)));
  g.backward(loss);
  const Tensor analytic = g.grad(xv);
  auto value = [&](const Tensor& at) {
    Graph h(false);
    const Var yy = f(h, h.parameter(at));
    return sum(mul(yy, h.constant(w))).value().item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k], step = 1e-6;
    x[k] = orig + step;
    const double up = value(x);
    x[k] = orig - step;
    const double down = value(x);
    x[k] = orig;
    const double fd = (up - down) / (2 * step);
    worst = std::max(worst, std::abs(fd - analytic[k]) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise op gradients match central differences") {
  const Tensor x = random_matrix(3, 4, 1);
  const Tensor pos = random_matrix(3, 4, 2, 0.5, 2.0);
  CHECK(max_grad_error([](Graph&, Var a) { return sigmoid(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return sigmoid_slope(sigmoid(a)); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return ad::tanh(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return softplus(scale(a, 30.0)); }, x) < 1e-6);
  CHECK(max_grad_error([](Graph&, Var a) { return ad::exp(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return ad::log(a); }, pos) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return reciprocal(a); }, pos) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return ad::sqrt(a); }, pos) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return square(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return clamp_min(a, -10.0); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return add_scalar(scale(neg(a), 3.0), 2.0); }, x) < 1e-7);
  CHECK(max_grad_error([&](Graph& g, Var a) { return div(a, g.constant(pos)); }, x) < 1e-7);
  CHECK(max_grad_error([&](Graph& g, Var a) { return div(g.constant(x), a); }, pos) < 1e-7);
  CHECK(max_grad_error([&](Graph& g, Var a) { return mul(a, a) - g.constant(pos) * a; }, x) < 1e-7);
}

TEST_CASE("matrix and shape op gradients match central differences") {
  const Tensor x = random_matrix(3, 4, 3);
  const Tensor m = random_matrix(4, 2, 4);
  CHECK(max_grad_error([&](Graph& g, Var a) { return matmul(a, g.constant(m)); }, x) < 1e-7);
  CHECK(max_grad_error([&](Graph& g, Var b) { return matmul(g.constant(x), b); }, m) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return transpose(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return softmax_rows(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return sum_rows(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return sum_cols(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return mean(a); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return reshape(a, 2, 6); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return slice_cols(a, 1, 2); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return slice_rows(a, 1, 2); }, x) < 1e-7);
  CHECK(max_grad_error([](Graph&, Var a) { return broadcast_to(slice_rows(a, 0, 1), 5, 4); }, x) < 1e-7);
  CHECK(max_grad_error(
            [](Graph&, Var a) {
              const Var parts[] = {a, square(a)};
              return concat_cols(parts);
            },
            x) < 1e-7);
  CHECK(max_grad_error(
            [](Graph&, Var a) {
              const Var parts[] = {a, sigmoid(a)};
              return concat_rows(parts);
            },
            x) < 1e-7);
  // per-row weights (3 x 4*2) applied to per-row inputs (3 x 4)
  const Tensor w = random_matrix(3, 8, 5);
  CHECK(max_grad_error([&](Graph& g, Var a) { return batched_matvec(g.constant(w), a, 4, 2); }, x) < 1e-7);
  CHECK(max_grad_error([&](Graph& g, Var b) { return batched_matvec(b, g.constant(x), 4, 2); }, w) < 1e-7);
}

TEST_CASE("shared subexpressions accumulate gradients once per use") {
  Graph g;
  const Var x = g.parameter(Tensor::scalar(1.5));
  const Var s = sigmoid(x);
  const Var y = s * s + s;  // d/dx = (2s + 1) s (1 - s)
  g.backward(y);
  const double sv = 1.0 / (1.0 + std::exp(-1.5));
  CHECK(g.grad(x).item() == doctest::Approx((2 * sv + 1) * sv * (1 - sv)).epsilon(1e-14));
}

TEST_CASE("constants receive no gradient and inference graphs refuse backward") {
  Graph g;
  const Var c = g.constant(Tensor::scalar(2.0));
  const Var p = g.parameter(Tensor::scalar(3.0));
  g.backward(c * p);
  CHECK(g.grad(p).item() == doctest::Approx(2.0));
  CHECK(g.grad(c).item() == 0.0);
  Graph h(false);
  const Var q = h.parameter(Tensor::scalar(1.0));
  CHECK_THROWS(h.backward(q * q));
}

TEST_CASE("batched_matvec uses input-major per-row weights") {
  Graph g(false);
  // one row, in = 2, out = 3: w[i * out + j]
  const Var w = g.constant(Tensor(Shape{1, 6}, {1, 2, 3, 4, 5, 6}));
  const Var x = g.constant(Tensor(Shape{1, 2}, {10, 100}));
  const Tensor y = batched_matvec(w, x, 2, 3).value();
  CHECK(y[0] == 410.0);
  CHECK(y[1] == 520.0);
  CHECK(y[2] == 630.0);
}

TEST_CASE("shape mismatches throw") {
  Graph g;
  const Var a = g.constant(Tensor::matrix(2, 3));
  const Var b = g.constant(Tensor::matrix(3, 2));
  CHECK_THROWS(add(a, b));
  CHECK_NOTHROW(matmul(a, b));
  CHECK_THROWS(matmul(a, a));
}

TEST_CASE("first Adam step moves each coordinate by about the learning rate") {
  Tensor p(Shape{1, 3}, {1.0, -2.0, 0.5});
  Tensor grad(Shape{1, 3}, {0.5, -3.0, 1e-3});
  const Tensor* cp[] = {&p};
  Adam opt(cp, {0.01});
  Tensor* ps[] = {&p};
  const Tensor* gs[] = {&grad};
  opt.step(ps, gs);
  // m_hat = g and v_hat = g^2 after bias correction
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
  CHECK(opt.steps() == 1);
}

TEST_CASE("Adam second step follows the bias-corrected moments") {
  Tensor p(Shape{1, 1}, {0.0});
  const Tensor* cp[] = {&p};
  Adam opt(cp, {0.1, 0.9, 0.999, 0.0});
  Tensor* ps[] = {&p};
  Tensor g1(Shape{1, 1}, {1.0}), g2(Shape{1, 1}, {-2.0});
  const Tensor* gs1[] = {&g1};
  const Tensor* gs2[] = {&g2};
  opt.step(ps, gs1);
  opt.step(ps, gs2);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(p[0] == doctest::Approx(-0.1 - 0.1 * mh / std::sqrt(vh)).epsilon(1e-12));
}

TEST_CASE("global norm clipping rescales only when above the bound") {
  Tensor a(Shape{1, 1}, {3.0}), b(Shape{1, 1}, {4.0});
  Tensor* gs[] = {&a, &b};
  CHECK(clip_global_norm(gs, 10.0) == doctest::Approx(5.0));
  CHECK(a[0] == 3.0);
  CHECK(clip_global_norm(gs, 1.0) == doctest::Approx(5.0));
  CHECK(a[0] == doctest::Approx(0.6));
  CHECK(b[0] == doctest::Approx(0.8));
}
