#include "mdc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "mdc/error.hpp"

namespace mdc::ad {

namespace {

Graph& common_graph(Var a, Var b, const char* op) {
  if (!a.valid() || a.graph != b.graph) throw ShapeError(std::string(op) + ": operands on different graphs");
  return *a.graph;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

// Maps an output coordinate to the flat index of a possibly broadcast operand.
struct Broadcast {
  std::size_t rows, cols;
  std::size_t operator()(std::size_t r, std::size_t c) const {
    return (rows == 1 ? 0 : r) * cols + (cols == 1 ? 0 : c);
  }
};

std::pair<std::size_t, std::size_t> broadcast_extent(const Tensor& a, const Tensor& b, const char* op) {
  auto pick = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    shape_fail(op, a, b);
  };
  return {pick(a.rows(), b.rows()), pick(a.cols(), b.cols())};
}

template <class Fwd, class Da, class Db>
Var binary(Var a, Var b, const char* op, Fwd f, Da da, Db db) {
  Graph& g = common_graph(a, b, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const auto [R, C] = broadcast_extent(A, B, op);
  const Broadcast ia{A.rows(), A.cols()};
  const Broadcast ib{B.rows(), B.cols()};
  Tensor out = Tensor::matrix(R, C);
  const bool same = A.rows() == R && A.cols() == C && B.rows() == R && B.cols() == C;
  if (same) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(A[k], B[k]);
  } else {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) out[r * C + c] = f(A[ia(r, c)], B[ib(r, c)]);
  }
  const std::size_t aid = a.id, bid = b.id;
  return g.record(
      std::move(out), {aid, bid},
      [=](Graph& gr, const Tensor& go) {
        const Tensor& X = gr.value(aid);
        const Tensor& Y = gr.value(bid);
        if (gr.requires_grad(aid)) {
          Tensor& gx = gr.grad_buffer(aid);
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t ka = ia(r, c), kb = ib(r, c);
              gx[ka] += go[r * C + c] * da(X[ka], Y[kb]);
            }
        }
        if (gr.requires_grad(bid)) {
          Tensor& gy = gr.grad_buffer(bid);
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t ka = ia(r, c), kb = ib(r, c);
              gy[kb] += go[r * C + c] * db(X[ka], Y[kb]);
            }
        }
      },
      op);
}

// dfn receives (input, output) and returns d output / d input.
template <class Fwd, class Dfn>
Var unary(Var a, const char* op, Fwd f, Dfn dfn) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  Tensor out(A.shape());
  for (std::size_t k = 0; k < A.size(); ++k) out[k] = f(A[k]);
  const std::size_t aid = a.id;
  const std::size_t self = g.size();
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        const Tensor& X = gr.value(aid);
        const Tensor& Y = gr.value(self);
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t k = 0; k < X.size(); ++k) gx[k] += go[k] * dfn(X[k], Y[k]);
      },
      op);
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
                [](double x, double y) { return -x / (y * y); });
}

Var add_scalar(Var a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scale(Var a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var sigmoid(Var a) {
  return unary(a, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var sigmoid_slope(Var s) {
  return unary(s, "sigmoid_slope", [](double y) { return y * (1.0 - y); },
               [](double y, double) { return 1.0 - 2.0 * y; });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Var a) {
  return unary(a, "softplus", [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
               [](double x, double) { return sigmoid_value(x); });
}

Var log(Var a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var reciprocal(Var a) {
  return unary(a, "reciprocal", [](double x) { return 1.0 / x; }, [](double x, double) { return -1.0 / (x * x); });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(a, "sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var clamp_min(Var a, double floor) {
  return unary(a, "clamp_min", [floor](double x) { return std::max(x, floor); },
               [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var matmul(Var a, Var b) {
  Graph& g = common_graph(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) shape_fail("matmul", A, B);
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  const std::size_t aid = a.id, bid = b.id;
  return g.record(
      std::move(out), {aid, bid},
      [=](Graph& gr, const Tensor& go) {
        const Tensor& X = gr.value(aid);
        const Tensor& Y = gr.value(bid);
        if (gr.requires_grad(aid)) {
          Tensor& gx = gr.grad_buffer(aid);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * Y[p * n + j];
              gx[i * k + p] += s;
            }
        }
        if (gr.requires_grad(bid)) {
          Tensor& gy = gr.grad_buffer(bid);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double xv = X[i * k + p];
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) gy[p * n + j] += xv * go[i * n + j];
            }
        }
      },
      "matmul");
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += go[j * r + i];
      },
      "transpose");
}

Var batched_matvec(Var w, Var x, std::size_t in, std::size_t out_dim) {
  Graph& g = common_graph(w, x, "batched_matvec");
  const Tensor& W = w.value();
  const Tensor& X = x.value();
  const std::size_t batch = X.rows();
  if (X.cols() != in || W.cols() != in * out_dim || (W.rows() != batch && W.rows() != 1)) shape_fail("batched_matvec", W, X);
  const bool shared = W.rows() == 1;
  const std::size_t wstride = in * out_dim;
  Tensor out = Tensor::matrix(batch, out_dim);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* wb = &W[shared ? 0 : b * wstride];
    double* ob = &out[b * out_dim];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = X[b * in + i];
      const double* wrow = wb + i * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) ob[o] += xv * wrow[o];
    }
  }
  const std::size_t wid = w.id, xid = x.id;
  return g.record(
      std::move(out), {wid, xid},
      [=](Graph& gr, const Tensor& go) {
        const Tensor& Wv = gr.value(wid);
        const Tensor& Xv = gr.value(xid);
        if (gr.requires_grad(xid)) {
          Tensor& gx = gr.grad_buffer(xid);
          for (std::size_t b = 0; b < batch; ++b) {
            const double* wb = &Wv[shared ? 0 : b * wstride];
            const double* gb = &go[b * out_dim];
            for (std::size_t i = 0; i < in; ++i) {
              const double* wrow = wb + i * out_dim;
              double s = 0.0;
              for (std::size_t o = 0; o < out_dim; ++o) s += gb[o] * wrow[o];
              gx[b * in + i] += s;
            }
          }
        }
        if (gr.requires_grad(wid)) {
          Tensor& gw = gr.grad_buffer(wid);
          for (std::size_t b = 0; b < batch; ++b) {
            double* gwb = &gw[shared ? 0 : b * wstride];
            const double* gb = &go[b * out_dim];
            for (std::size_t i = 0; i < in; ++i) {
              const double xv = Xv[b * in + i];
              double* grow = gwb + i * out_dim;
              for (std::size_t o = 0; o < out_dim; ++o) grow[o] += xv * gb[o];
            }
          }
        }
      },
      "batched_matvec");
}

Var softmax_rows(Var a) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = A[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (out[i * c + j] = std::exp(A[i * c + j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
  }
  const std::size_t aid = a.id;
  const std::size_t self = g.size();
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        const Tensor& Y = gr.value(self);
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += go[i * c + j] * Y[i * c + j];
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += Y[i * c + j] * (go[i * c + j] - dot);
        }
      },
      "softmax_rows");
}

Var sum(Var a) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  double s = 0.0;
  for (double v : A.values()) s += v;
  const std::size_t aid = a.id;
  return g.record(
      Tensor::matrix(1, 1, s), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += go[0];
      },
      "sum");
}

Var sum_rows(Var a) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = Tensor::matrix(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += A[i * c + j];
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += go[j];
      },
      "sum_rows");
}

Var sum_cols(Var a) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor out = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += A[i * c + j];
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += go[i];
      },
      "sum_cols");
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph& g = *parts[0].graph;
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ShapeError("concat_cols: operands on different graphs");
    if (p.rows() != r) shape_fail("concat_cols", parts[0].value(), p.value());
    ids.push_back(p.id);
    widths.push_back(p.cols());
    c += p.cols();
  }
  Tensor out = Tensor::matrix(r, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    const std::size_t w = P.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * c + off + j] = P[i * w + j];
    off += w;
  }
  return g.record(
      std::move(out), ids,
      [=](Graph& gr, const Tensor& go) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t w = widths[k];
          if (gr.requires_grad(ids[k])) {
            Tensor& gx = gr.grad_buffer(ids[k]);
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < w; ++j) gx[i * w + j] += go[i * c + offset + j];
          }
          offset += w;
        }
      },
      "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Graph& g = *parts[0].graph;
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  std::vector<std::size_t> ids, heights;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ShapeError("concat_rows: operands on different graphs");
    if (p.cols() != c) shape_fail("concat_rows", parts[0].value(), p.value());
    ids.push_back(p.id);
    heights.push_back(p.rows());
    r += p.rows();
  }
  Tensor out = Tensor::matrix(r, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    std::copy(P.data().begin(), P.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off * c));
    off += P.rows();
  }
  return g.record(
      std::move(out), ids,
      [=](Graph& gr, const Tensor& go) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (gr.requires_grad(ids[k])) {
            Tensor& gx = gr.grad_buffer(ids[k]);
            for (std::size_t q = 0; q < heights[k] * c; ++q) gx[q] += go[offset * c + q];
          }
          offset += heights[k];
        }
      },
      "concat_rows");
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (count == 0 || start + count > c) throw ShapeError("slice_cols: range out of bounds for " + shape_string(A.shape()));
  Tensor out = Tensor::matrix(r, count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = A[i * c + start + j];
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < count; ++j) gx[i * c + start + j] += go[i * count + j];
      },
      "slice_cols");
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (count == 0 || start + count > r) throw ShapeError("slice_rows: range out of bounds for " + shape_string(A.shape()));
  Tensor out = Tensor::matrix(count, c);
  std::copy(A.data().begin() + static_cast<std::ptrdiff_t>(start * c),
            A.data().begin() + static_cast<std::ptrdiff_t>((start + count) * c), out.data().begin());
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t q = 0; q < count * c; ++q) gx[start * c + q] += go[q];
      },
      "slice_rows");
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  if (rows * cols != A.size()) throw ShapeError("reshape: cannot view " + shape_string(A.shape()) + " as " +
                                                std::to_string(rows) + "x" + std::to_string(cols));
  Tensor out(Shape{rows, cols}, A.data());
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t q = 0; q < gx.size(); ++q) gx[q] += go[q];
      },
      "reshape");
}

Var broadcast_to(Var a, std::size_t rows, std::size_t cols) {
  Graph& g = *a.graph;
  const Tensor& A = a.value();
  if ((A.rows() != rows && A.rows() != 1) || (A.cols() != cols && A.cols() != 1))
    throw ShapeError("broadcast_to: cannot broadcast " + shape_string(A.shape()));
  const Broadcast ia{A.rows(), A.cols()};
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = A[ia(r, c)];
  const std::size_t aid = a.id;
  return g.record(
      std::move(out), {aid},
      [=](Graph& gr, const Tensor& go) {
        Tensor& gx = gr.grad_buffer(aid);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gx[ia(r, c)] += go[r * cols + c];
      },
      "broadcast_to");
}

}  // namespace mdc::ad
