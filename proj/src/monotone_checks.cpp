#include "mdc/monotone_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdc/adam.hpp"
#include "mdc/error.hpp"
#include "mdc/jdan_graph.hpp"
#include "mdc/normal.hpp"

namespace mdc::evaluation {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

double MisoNet::value(double x, double y) const {
  std::vector<double> a(width), z(width);
  for (std::size_t j = 0; j < width; ++j) a[j] = sigmoid(w1[j] * x + w1[width + j] * y + b1[j]);
  double out = b3;
  for (std::size_t o = 0; o < width; ++o) {
    double s = b2[o];
    for (std::size_t j = 0; j < width; ++j) s += a[j] * w2[j * width + o];
    out += w3[o] * sigmoid(s);
  }
  return out;
}

void MisoNet::gradient(double x, double y, double& dx, double& dy) const {
  std::vector<double> a(width), dax(width), day(width);
  for (std::size_t j = 0; j < width; ++j) {
    a[j] = sigmoid(w1[j] * x + w1[width + j] * y + b1[j]);
    const double s = a[j] * (1.0 - a[j]);
    dax[j] = s * w1[j];
    day[j] = s * w1[width + j];
  }
  dx = dy = 0.0;
  for (std::size_t o = 0; o < width; ++o) {
    double s = b2[o], sx = 0.0, sy = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      s += a[j] * w2[j * width + o];
      sx += dax[j] * w2[j * width + o];
      sy += day[j] * w2[j * width + o];
    }
    const double z = sigmoid(s);
    dx += w3[o] * z * (1.0 - z) * sx;
    dy += w3[o] * z * (1.0 - z) * sy;
  }
}

MisoNet random_miso(Rng& rng, std::size_t width) {
  MisoNet n;
  n.width = width;
  for (std::size_t k = 0; k < 2 * width; ++k) n.w1.push_back(rng.uniform(0.1, 3.0));
  for (std::size_t k = 0; k < width; ++k) n.b1.push_back(rng.normal(0.0, 2.0));
  for (std::size_t k = 0; k < width * width; ++k) n.w2.push_back(rng.uniform(0.1, 3.0));
  for (std::size_t k = 0; k < width; ++k) n.b2.push_back(rng.normal(0.0, 2.0));
  for (std::size_t k = 0; k < width; ++k) n.w3.push_back(rng.uniform(0.1, 2.0));
  n.b3 = rng.normal();
  return n;
}

double mixed_partial_fd(const std::function<double(double, double)>& f, double x, double y, double h) {
  return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
}

Json MisoDemoReport::to_json() const {
  return Json{{"nets", nets},
              {"nets_with_negative_mixed", nets_with_negative_mixed},
              {"fraction_negative", fraction_negative},
              {"min_first_partial", min_first_partial},
              {"min_mixed_generic", min_mixed_generic},
              {"jdan_nets", jdan_nets},
              {"jdan_negative_points", jdan_negative_points},
              {"min_mixed_jdan", min_mixed_jdan}};
}

MisoDemoReport miso_counterexample_demo(const MisoDemoOptions& o) {
  if (o.grid < 2 || !(o.hi > o.lo)) throw std::invalid_argument("miso demo: bad grid");
  Rng rng(o.seed);
  MisoDemoReport r;
  r.nets = o.nets;
  r.min_first_partial = std::numeric_limits<double>::infinity();
  r.min_mixed_generic = std::numeric_limits<double>::infinity();
  auto coord = [&](std::size_t k) { return o.lo + (o.hi - o.lo) * static_cast<double>(k) / static_cast<double>(o.grid - 1); };
  for (std::size_t n = 0; n < o.nets; ++n) {
    const MisoNet net = random_miso(rng, o.width);
    auto f = [&](double x, double y) { return net.value(x, y); };
    bool negative = false;
    for (std::size_t a = 0; a < o.grid; ++a)
      for (std::size_t b = 0; b < o.grid; ++b) {
        const double x = coord(a), y = coord(b);
        double dx, dy;
        net.gradient(x, y, dx, dy);
        r.min_first_partial = std::min({r.min_first_partial, dx, dy});
        const double m = mixed_partial_fd(f, x, y, o.h);
        r.min_mixed_generic = std::min(r.min_mixed_generic, m);
        if (m < o.generic_threshold) negative = true;
      }
    r.nets_with_negative_mixed += negative ? 1 : 0;
  }
  r.fraction_negative = o.nets ? static_cast<double>(r.nets_with_negative_mixed) / static_cast<double>(o.nets) : 0.0;

  r.jdan_nets = o.jdan_nets;
  r.min_mixed_jdan = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < o.jdan_nets; ++n) {
    jdan::JdanArch arch;
    arch.n_vars = 2;
    arch.n_components = 3;
    arch.n_blocks = 1;
    arch.width = o.width;
    jdan::RandomParamOptions po;
    po.input_weight_lo = 0.5;
    po.input_weight_hi = 3.0;
    po.center_lo = o.lo;
    po.center_hi = o.hi;
    const jdan::ForecastDistribution dist(arch, jdan::random_params(arch, rng, po));
    auto f = [&](double x, double y) {
      const double sm[2] = {x, y};
      return dist.joint_cdf(sm);
    };
    for (std::size_t a = 0; a < o.grid; ++a)
      for (std::size_t b = 0; b < o.grid; ++b) {
        const double m = mixed_partial_fd(f, coord(a), coord(b), o.h);
        r.min_mixed_jdan = std::min(r.min_mixed_jdan, m);
        if (m < o.jdan_threshold) ++r.jdan_negative_points;
      }
  }
  return r;
}

double bivariate_normal_cdf(double x, double y, double rho) {
  if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("bivariate normal needs |rho| < 1");
  if (x == -INFINITY || y == -INFINITY) return 0.0;
  if (x == INFINITY) return normal_cdf(y);
  if (y == INFINITY) return normal_cdf(x);
  // P(X <= x, Y <= y) = int_{-inf}^{x} phi(t) Phi((y - rho t) / sqrt(1 - rho^2)) dt, composite Simpson.
  const double lo = std::min(x, -9.0);
  if (x <= lo) return 0.0;
  const std::size_t n = 2000;
  const double h = (x - lo) / static_cast<double>(n);
  const double s = std::sqrt(1.0 - rho * rho);
  auto g = [&](double t) { return normal_pdf(t) * normal_cdf((y - rho * t) / s); };
  double total = g(lo) + g(x);
  for (std::size_t k = 1; k < n; ++k) total += (k % 2 ? 4.0 : 2.0) * g(lo + h * static_cast<double>(k));
  return total * h / 3.0;
}

CdfTarget gaussian_mixture_cdf(std::vector<GaussianComponent> components) {
  double wsum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0 && c.sd_x > 0.0 && c.sd_y > 0.0)) throw std::invalid_argument("bad mixture component");
    wsum += c.weight;
  }
  for (auto& c : components) c.weight /= wsum;
  return [components](double x, double y) {
    double total = 0.0;
    for (const auto& c : components)
      total += c.weight * bivariate_normal_cdf((x - c.mean_x) / c.sd_x, (y - c.mean_y) / c.sd_y, c.rho);
    return total;
  };
}

CdfTarget correlated_mixture_target() {
  return gaussian_mixture_cdf({{0.5, 0.3, 0.3, 0.1, 0.1, 0.5}, {0.5, 0.7, 0.7, 0.1, 0.1, 0.5}});
}

CdfTarget independent_product_target() {
  return [](double x, double y) { return normal_cdf((x - 0.45) / 0.15) * normal_cdf((y - 0.55) / 0.12); };
}

jdan::JdanArch fit_test_arch(const FitTestOptions& o) {
  jdan::JdanArch a;
  a.n_vars = 2;
  a.coupling = o.coupling;
  a.n_components = o.coupling == jdan::Coupling::kPaperLiteral ? 1 : o.components;
  a.n_blocks = o.blocks;
  a.width = o.width;
  const double mid = 0.5 * (o.lo + o.hi), half = 0.5 * (o.hi - o.lo);
  a.location = {mid, mid};
  a.scale = {half, half};
  a.validate();
  return a;
}

jdan::JdanParams fit_test_init(const FitTestOptions& o) {
  Rng rng(o.seed);
  jdan::RandomParamOptions po;
  po.input_weight_lo = 1.0;
  po.input_weight_hi = 4.0;
  return jdan::random_params(fit_test_arch(o), rng, po);
}

FitTestResult coupling_fit_test(const CdfTarget& target, const FitTestOptions& o, const jdan::JdanParams* init) {
  if (o.grid < 2) throw std::invalid_argument("fit test grid must have at least 2 points per axis");
  FitTestResult res;
  res.arch = fit_test_arch(o);
  const jdan::JdanArch& arch = res.arch;
  jdan::JdanParams p0 = init ? *init : fit_test_init(o);
  p0.validate(arch);

  const std::size_t g = o.grid, rows = g * g;
  ad::Tensor margins = ad::Tensor::matrix(rows, 2);
  ad::Tensor tgt = ad::Tensor::matrix(rows, 1);
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b) {
      const double x = o.lo + (o.hi - o.lo) * static_cast<double>(a) / static_cast<double>(g - 1);
      const double y = o.lo + (o.hi - o.lo) * static_cast<double>(b) / static_cast<double>(g - 1);
      margins.at(a * g + b, 0) = x;
      margins.at(a * g + b, 1) = y;
      tgt[a * g + b] = target(x, y);
    }

  std::vector<double> free_w(p0.weights.size());
  for (std::size_t k = 0; k < free_w.size(); ++k) free_w[k] = softplus_inverse(p0.weights[k]);
  ad::Tensor tw = ad::Tensor::matrix(1, free_w.size());
  std::copy(free_w.begin(), free_w.end(), tw.data().begin());
  ad::Tensor tb = ad::Tensor::row(p0.biases);
  ad::Tensor tl = arch.logit_count() ? ad::Tensor::row(p0.logits) : ad::Tensor::matrix(1, 1);
  std::vector<ad::Tensor*> params{&tw, &tb, &tl};
  std::vector<const ad::Tensor*> cparams{&tw, &tb, &tl};
  ad::Adam opt(cparams, ad::AdamOptions{o.learning_rate, 0.9, 0.999, 1e-8});

  auto extract = [&](const ad::Tensor& w) {
    jdan::JdanParams p;
    for (double v : w.values()) p.weights.push_back(std::max(v > 30.0 ? v : std::log1p(std::exp(v)), 1e-12));
    p.biases = tb.data();
    if (arch.logit_count()) p.logits = tl.data();
    return p;
  };
  auto max_error = [&](const jdan::JdanParams& p) {
    const jdan::ForecastDistribution dist(arch, p);
    double worst = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double sm[2] = {margins.at(r, 0), margins.at(r, 1)};
      worst = std::max(worst, std::abs(dist.joint_cdf(sm) - tgt[r]));
    }
    return worst;
  };
  res.initial_max_error = max_error(p0);

  for (std::size_t it = 0; it < o.iterations; ++it) {
    ad::Graph gr;
    ad::Var vw = gr.parameter(tw), vb = gr.parameter(tb), vl = gr.parameter(tl);
    jdan::GraphParams gp{ad::clamp_min(ad::softplus(vw), 1e-12), vb, arch.logit_count() ? vl : ad::Var{}};
    ad::Var f = jdan::joint_cdf_graph(arch, gp, margins);
    ad::Var loss = ad::mean(ad::square(f - gr.constant(tgt)));
    gr.backward(loss);
    res.final_mse = loss.value().item();
    ad::Tensor gw = gr.grad(vw), gb = gr.grad(vb), gl = gr.grad(vl);
    std::vector<const ad::Tensor*> grads{&gw, &gb, &gl};
    opt.step(params, grads);
  }
  res.params = extract(tw);
  res.max_error = max_error(res.params);
  return res;
}

}  // namespace mdc::evaluation
