#pragma once

#include <cstddef>
#include <span>

#include "mdc/graph.hpp"

// Differentiable primitives. All operate on matrices (rank <= 2 tensors
// are viewed as rows x cols). Binary elementwise ops broadcast a 1-extent
// row or column against the other operand.
namespace mdc::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var add_scalar(Var a, double c);
Var scale(Var a, double c);
Var neg(Var a);

Var sigmoid(Var a);
// s * (1 - s) for s = sigmoid output, with its own derivative (1 - 2s).
Var sigmoid_slope(Var s);
Var tanh(Var a);
// max(x,0) + log1p(exp(-|x|)), overflow-safe.
Var softplus(Var a);
Var log(Var a);
Var exp(Var a);
Var reciprocal(Var a);
Var square(Var a);
Var sqrt(Var a);
// max(a, floor); the gradient is zero where the floor is active.
Var clamp_min(Var a, double floor);

Var matmul(Var a, Var b);
Var transpose(Var a);
// Row-wise affine map with per-row weight matrices: w is B x (in*out)
// (or 1 x (in*out), shared by all rows) stored in-major, x is B x in.
// out[b, o] = sum_i x[b, i] * w[b, i*out + o].
Var batched_matvec(Var w, Var x, std::size_t in, std::size_t out);

Var softmax_rows(Var a);

Var sum(Var a);       // -> 1x1
Var sum_rows(Var a);  // r x c -> 1 x c
Var sum_cols(Var a);  // r x c -> r x 1
Var mean(Var a);      // -> 1x1

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var broadcast_to(Var a, std::size_t rows, std::size_t cols);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace mdc::ad
