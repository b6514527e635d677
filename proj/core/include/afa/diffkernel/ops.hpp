#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "afa/diffkernel/graph.hpp"

namespace afa::ops {

inline constexpr double kLayerNormEps = 1e-5;

Var matmul(Var a, Var b);     // [m,k] x [k,n]
Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);       // elementwise
Var add_bias(Var x, Var b);  // x[..., n] + b[n]
Var scale(Var x, double s);
Var gelu(Var x);  // exact erf form
Var tanh(Var x);
Var layer_norm(Var x, Var gain, Var bias);

// Softmax over the last dimension restricted to entries where mask != 0.
// Masked entries are exactly zero in value and gradient. Throws if any row
// is fully masked.
Var masked_softmax(Var logits, const Tensor& mask);
// Log-softmax with the same masking convention (masked entries read 0).
Var masked_log_softmax(Var logits, const Tensor& mask);

// Mean over rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const std::size_t> targets);
// Mean of 0.5 * (log 2pi + log_var + (y - mean)^2 exp(-log_var)).
Var gaussian_nll(Var mean, Var log_var, Var y);

Var slice_cols(Var x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const std::size_t> rows);

Var sum(Var x);
Var mean(Var x);

// Forward value is `hard`; gradient passes to `relaxed` unchanged.
Var straight_through(Var relaxed, const Tensor& hard);

}  // namespace afa::ops
