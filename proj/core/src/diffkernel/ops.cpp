#include "afa/diffkernel/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

namespace afa::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

CMapM as_mat(const Tensor& t) { return CMapM(t.data().data(), t.rows(), t.cols()); }
MapM as_mat(Tensor& t) { return MapM(t.data().data(), t.rows(), t.cols()); }

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw std::invalid_argument("variable is not attached to a graph");
  return *a.graph;
}

Graph& same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw std::invalid_argument("variables belong to different graphs");
  return graph_of(a);
}

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

bool wants_grad(Graph& g, std::size_t id) { return g.requires_grad(id); }

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_2d(av, "matmul");
  require_2d(bv, "matmul");
  if (av.shape()[1] != bv.shape()[0]) {
    throw ShapeError("matmul: inner dims differ " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor out(Shape{av.shape()[0], bv.shape()[1]});
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  const auto ia = a.id, ib = b.id;
  return g.record(OpKind::kMatMul, {ia, ib}, std::move(out), [ia, ib](Graph& gr, std::size_t self) {
    const auto gc = as_mat(gr.upstream(self));
    if (wants_grad(gr, ia)) as_mat(gr.grad_buffer(ia)).noalias() += gc * as_mat(gr.value(ib)).transpose();
    if (wants_grad(gr, ib)) as_mat(gr.grad_buffer(ib)).noalias() += as_mat(gr.value(ia)).transpose() * gc;
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_2d(av, "matmul_nt");
  require_2d(bv, "matmul_nt");
  if (av.shape()[1] != bv.shape()[1]) {
    throw ShapeError("matmul_nt: inner dims differ " + shape_string(av.shape()) + " x " + shape_string(bv.shape()) + "^T");
  }
  Tensor out(Shape{av.shape()[0], bv.shape()[0]});
  as_mat(out).noalias() = as_mat(av) * as_mat(bv).transpose();
  const auto ia = a.id, ib = b.id;
  return g.record(OpKind::kMatMulNT, {ia, ib}, std::move(out), [ia, ib](Graph& gr, std::size_t self) {
    const auto gc = as_mat(gr.upstream(self));
    if (wants_grad(gr, ia)) as_mat(gr.grad_buffer(ia)).noalias() += gc * as_mat(gr.value(ib));
    if (wants_grad(gr, ib)) as_mat(gr.grad_buffer(ib)).noalias() += gc.transpose() * as_mat(gr.value(ia));
  });
}

namespace {

template <class Fwd, class Bwd>
Var binary_elementwise(OpKind kind, Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
  Graph& g = same_graph(a, b);
  require_same_shape(a.value(), b.value(), name);
  Tensor out(a.value().shape());
  const auto& av = a.value().values();
  const auto& bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  const auto ia = a.id, ib = b.id;
  return g.record(kind, {ia, ib}, std::move(out), [ia, ib, bwd](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    const auto& x = gr.value(ia).values();
    const auto& y = gr.value(ib).values();
    if (wants_grad(gr, ia)) {
      auto& ga = gr.grad_buffer(ia).values();
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * bwd(x[i], y[i], 0);
    }
    if (wants_grad(gr, ib)) {
      auto& gb = gr.grad_buffer(ib).values();
      for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * bwd(x[i], y[i], 1);
    }
  });
}

template <class Fwd, class Deriv>
Var unary_elementwise(OpKind kind, Var x, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of(x);
  Tensor out(x.value().shape());
  const auto& xv = x.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  const auto ix = x.id;
  return g.record(kind, {ix}, std::move(out), [ix, deriv](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    const auto& xin = gr.value(ix).values();
    const auto& yout = gr.value(self).values();
    auto& gx = gr.grad_buffer(ix).values();
    for (std::size_t i = 0; i < up.size(); ++i) gx[i] += up[i] * deriv(xin[i], yout[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      OpKind::kAdd, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, int) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      OpKind::kSub, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, int which) { return which == 0 ? 1.0 : -1.0; });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      OpKind::kMul, a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, int which) { return which == 0 ? y : x; });
}

Var add_bias(Var x, Var b) {
  Graph& g = same_graph(x, b);
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (bv.size() != xv.cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bv.shape()) + " vs input " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  out.requires_grad = false;
  const std::size_t n = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bv[c];
  }
  const auto ix = x.id, ib = b.id;
  return g.record(OpKind::kAddBias, {ix, ib}, std::move(out), [ix, ib, n](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    if (wants_grad(gr, ix)) {
      auto& gx = gr.grad_buffer(ix).values();
      for (std::size_t i = 0; i < up.size(); ++i) gx[i] += up[i];
    }
    if (wants_grad(gr, ib)) {
      auto& gb = gr.grad_buffer(ib).values();
      for (std::size_t i = 0; i < up.size(); ++i) gb[i % n] += up[i];
    }
  });
}

Var scale(Var x, double s) {
  return unary_elementwise(
      OpKind::kScale, x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Var gelu(Var x) {
  return unary_elementwise(
      OpKind::kGelu, x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Var tanh(Var x) {
  return unary_elementwise(
      OpKind::kTanh, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Graph& g = same_graph(x, gain);
  same_graph(x, bias);
  const Tensor& xv = x.value();
  const std::size_t h = xv.cols();
  if (h == 0) throw ShapeError("layer_norm: empty feature dimension");
  if (gain.value().size() != h || bias.value().size() != h) throw ShapeError("layer_norm: gain/bias width mismatch");
  const std::size_t rows = xv.rows();
  Tensor out(xv.shape());
  // Per row: normalized values and inverse std, kept for backward.
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& gv = gain.value().values();
  const auto& bv = bias.value().values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data().data() + r * h;
    double mu = 0.0;
    for (std::size_t c = 0; c < h; ++c) mu += xr[c];
    mu /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t c = 0; c < h; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(h);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < h; ++c) {
      const double xh = (xr[c] - mu) * is;
      (*xhat)[r * h + c] = xh;
      out[r * h + c] = xh * gv[c] + bv[c];
    }
  }
  const auto ix = x.id, ig = gain.id, ib = bias.id;
  return g.record(OpKind::kLayerNorm, {ix, ig, ib}, std::move(out),
                  [ix, ig, ib, h, rows, xhat, inv_std](Graph& gr, std::size_t self) {
                    const auto& up = gr.upstream(self).values();
                    const auto& gv2 = gr.value(ig).values();
                    if (wants_grad(gr, ig)) {
                      auto& gg = gr.grad_buffer(ig).values();
                      for (std::size_t i = 0; i < up.size(); ++i) gg[i % h] += up[i] * (*xhat)[i];
                    }
                    if (wants_grad(gr, ib)) {
                      auto& gb = gr.grad_buffer(ib).values();
                      for (std::size_t i = 0; i < up.size(); ++i) gb[i % h] += up[i];
                    }
                    if (wants_grad(gr, ix)) {
                      auto& gx = gr.grad_buffer(ix).values();
                      const double inv_h = 1.0 / static_cast<double>(h);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t c = 0; c < h; ++c) {
                          const double dxh = up[r * h + c] * gv2[c];
                          m1 += dxh;
                          m2 += dxh * (*xhat)[r * h + c];
                        }
                        m1 *= inv_h;
                        m2 *= inv_h;
                        for (std::size_t c = 0; c < h; ++c) {
                          const double dxh = up[r * h + c] * gv2[c];
                          gx[r * h + c] += (*inv_std)[r] * (dxh - m1 - (*xhat)[r * h + c] * m2);
                        }
                      }
                    }
                  });
}

Var masked_softmax(Var logits, const Tensor& mask) {
  Graph& g = graph_of(logits);
  const Tensor& xv = logits.value();
  require_same_shape(xv, mask, "masked_softmax");
  const std::size_t n = xv.cols();
  Tensor out(xv.shape(), 0.0);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c] != 0.0) mx = std::max(mx, xv[r * n + c]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("masked_softmax: row " + std::to_string(r) + " is fully masked");
    }
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c] != 0.0) {
        const double e = std::exp(xv[r * n + c] - mx);
        out[r * n + c] = e;
        z += e;
      }
    }
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= z;
  }
  const auto ix = logits.id;
  return g.record(OpKind::kMaskedSoftmax, {ix}, std::move(out), [ix, n](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    const auto& y = gr.value(self).values();
    auto& gx = gr.grad_buffer(ix).values();
    const std::size_t rows = n ? y.size() / n : 0;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += y[r * n + c] * up[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y[r * n + c] * (up[r * n + c] - dot);
    }
  });
}

Var masked_log_softmax(Var logits, const Tensor& mask) {
  Graph& g = graph_of(logits);
  const Tensor& xv = logits.value();
  require_same_shape(xv, mask, "masked_log_softmax");
  const std::size_t n = xv.cols();
  Tensor out(xv.shape(), 0.0);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c] != 0.0) mx = std::max(mx, xv[r * n + c]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("masked_log_softmax: row " + std::to_string(r) + " is fully masked");
    }
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c] != 0.0) z += std::exp(xv[r * n + c] - mx);
    }
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c] != 0.0) out[r * n + c] = xv[r * n + c] - lse;
    }
  }
  const auto ix = logits.id;
  Tensor m = mask;
  return g.record(OpKind::kMaskedLogSoftmax, {ix}, std::move(out), [ix, n, m](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    const auto& y = gr.value(self).values();
    auto& gx = gr.grad_buffer(ix).values();
    const std::size_t rows = n ? y.size() / n : 0;
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        if (m[r * n + c] != 0.0) s += up[r * n + c];
      }
      for (std::size_t c = 0; c < n; ++c) {
        if (m[r * n + c] != 0.0) gx[r * n + c] += up[r * n + c] - std::exp(y[r * n + c]) * s;
      }
    }
  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  Graph& g = graph_of(logits);
  const Tensor& xv = logits.value();
  require_2d(xv, "cross_entropy");
  const std::size_t n = xv.shape()[0], c = xv.shape()[1];
  if (targets.size() != n) throw ShapeError("cross_entropy: target count differs from rows");
  if (n == 0) throw ShapeError("cross_entropy: empty batch");
  auto probs = std::make_shared<std::vector<double>>(n * c);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (tgt[r] >= c) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(tgt[r]) + " outside [0, " + std::to_string(c) + ")");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, xv[r * c + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(xv[r * c + k] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t k = 0; k < c; ++k) (*probs)[r * c + k] = std::exp(xv[r * c + k] - lse);
    loss += lse - xv[r * c + tgt[r]];
  }
  loss /= static_cast<double>(n);
  const auto ix = logits.id;
  return g.record(OpKind::kCrossEntropy, {ix}, Tensor::scalar(loss),
                  [ix, n, c, probs, tgt = std::move(tgt)](Graph& gr, std::size_t self) {
                    const double up = gr.upstream(self)[0] / static_cast<double>(n);
                    auto& gx = gr.grad_buffer(ix).values();
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t k = 0; k < c; ++k) {
                        gx[r * c + k] += up * ((*probs)[r * c + k] - (k == tgt[r] ? 1.0 : 0.0));
                      }
                    }
                  });
}

Var gaussian_nll(Var mean, Var log_var, Var y) {
  Graph& g = same_graph(mean, log_var);
  same_graph(mean, y);
  const auto& mv = mean.value();
  const auto& lv = log_var.value();
  const auto& yv = y.value();
  if (mv.size() != lv.size() || mv.size() != yv.size()) throw ShapeError("gaussian_nll: size mismatch");
  const std::size_t n = mv.size();
  if (n == 0) throw ShapeError("gaussian_nll: empty input");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = yv[i] - mv[i];
    loss += 0.5 * (log2pi + lv[i] + r * r * std::exp(-lv[i]));
  }
  loss /= static_cast<double>(n);
  const auto im = mean.id, il = log_var.id, iy = y.id;
  return g.record(OpKind::kGaussianNll, {im, il, iy}, Tensor::scalar(loss), [im, il, iy, n](Graph& gr, std::size_t self) {
    const double up = gr.upstream(self)[0] / static_cast<double>(n);
    const auto& m = gr.value(im).values();
    const auto& l = gr.value(il).values();
    const auto& t = gr.value(iy).values();
    for (std::size_t i = 0; i < n; ++i) {
      const double r = t[i] - m[i];
      const double prec = std::exp(-l[i]);
      if (wants_grad(gr, im)) gr.grad_buffer(im)[i] += up * (-r * prec);
      if (wants_grad(gr, il)) gr.grad_buffer(il)[i] += up * 0.5 * (1.0 - r * r * prec);
      if (wants_grad(gr, iy)) gr.grad_buffer(iy)[i] += up * (r * prec);
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_2d(xv, "slice_cols");
  const std::size_t rows = xv.shape()[0], cols = xv.shape()[1];
  if (start + count > cols) throw ShapeError("slice_cols: range exceeds width " + std::to_string(cols));
  Tensor out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data().data() + r * cols + start, count, out.data().data() + r * count);
  }
  const auto ix = x.id;
  return g.record(OpKind::kSliceCols, {ix}, std::move(out), [ix, rows, cols, start, count](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    auto& gx = gr.grad_buffer(ix).values();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) gx[r * cols + start + c] += up[r * count + c];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = graph_of(parts[0]);
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> ids, widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    same_graph(parts[0], p);
    require_2d(p.value(), "concat_cols");
    if (p.value().shape()[0] != rows) throw ShapeError("concat_cols: row count mismatch");
    ids.push_back(p.id);
    widths.push_back(p.value().shape()[1]);
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data().data() + r * widths[k], widths[k], out.data().data() + r * total + off);
    }
    off += widths[k];
  }
  auto input_ids = ids;
  return g.record(OpKind::kConcatCols, std::move(input_ids), std::move(out),
                  [ids, widths, rows, total](Graph& gr, std::size_t self) {
                    const auto& up = gr.upstream(self).values();
                    std::size_t o = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (wants_grad(gr, ids[k])) {
                        auto& gp = gr.grad_buffer(ids[k]).values();
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t c = 0; c < widths[k]; ++c) gp[r * widths[k] + c] += up[r * total + o + c];
                        }
                      }
                      o += widths[k];
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = graph_of(parts[0]);
  const std::size_t cols = parts[0].value().cols();
  std::vector<std::size_t> ids, sizes;
  std::size_t total_rows = 0;
  std::vector<double> values;
  for (const auto& p : parts) {
    same_graph(parts[0], p);
    require_2d(p.value(), "concat_rows");
    if (p.value().shape()[1] != cols) throw ShapeError("concat_rows: column count mismatch");
    ids.push_back(p.id);
    sizes.push_back(p.value().size());
    total_rows += p.value().shape()[0];
    values.insert(values.end(), p.value().values().begin(), p.value().values().end());
  }
  auto input_ids = ids;
  return g.record(OpKind::kConcatRows, std::move(input_ids), Tensor(Shape{total_rows, cols}, std::move(values)),
                  [ids, sizes](Graph& gr, std::size_t self) {
                    const auto& up = gr.upstream(self).values();
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (wants_grad(gr, ids[k])) {
                        auto& gp = gr.grad_buffer(ids[k]).values();
                        for (std::size_t i = 0; i < sizes[k]; ++i) gp[i] += up[off + i];
                      }
                      off += sizes[k];
                    }
                  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  require_2d(xv, "gather_rows");
  const std::size_t cols = xv.shape()[1];
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out(Shape{idx.size(), cols});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= xv.shape()[0]) throw std::out_of_range("gather_rows: row index out of range");
    std::copy_n(xv.data().data() + idx[k] * cols, cols, out.data().data() + k * cols);
  }
  const auto ix = x.id;
  return g.record(OpKind::kGatherRows, {ix}, std::move(out), [ix, cols, idx = std::move(idx)](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    auto& gx = gr.grad_buffer(ix).values();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      for (std::size_t c = 0; c < cols; ++c) gx[idx[k] * cols + c] += up[k * cols + c];
    }
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto ix = x.id;
  return g.record(OpKind::kSum, {ix}, Tensor::scalar(s), [ix](Graph& gr, std::size_t self) {
    const double up = gr.upstream(self)[0];
    for (auto& v : gr.grad_buffer(ix).values()) v += up;
  });
}

Var mean(Var x) {
  Graph& g = graph_of(x);
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto ix = x.id;
  return g.record(OpKind::kMean, {ix}, Tensor::scalar(s / static_cast<double>(n)), [ix, n](Graph& gr, std::size_t self) {
    const double up = gr.upstream(self)[0] / static_cast<double>(n);
    for (auto& v : gr.grad_buffer(ix).values()) v += up;
  });
}

Var straight_through(Var relaxed, const Tensor& hard) {
  Graph& g = graph_of(relaxed);
  require_same_shape(relaxed.value(), hard, "straight_through");
  Tensor out = hard;
  out.requires_grad = false;
  const auto ix = relaxed.id;
  return g.record(OpKind::kStraightThrough, {ix}, std::move(out), [ix](Graph& gr, std::size_t self) {
    const auto& up = gr.upstream(self).values();
    auto& gx = gr.grad_buffer(ix).values();
    for (std::size_t i = 0; i < up.size(); ++i) gx[i] += up[i];
  });
}

}  // namespace afa::ops
