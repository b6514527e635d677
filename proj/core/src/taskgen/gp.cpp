#include "afa/taskgen/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "afa/taskgen/dataset.hpp"
#include "eigen_bridge.hpp"

namespace afa {

std::string to_string(KernelKind kind) { return kind == KernelKind::kRbf ? "rbf" : "matern"; }

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "rbf") return KernelKind::kRbf;
  if (s == "matern" || s == "matern52") return KernelKind::kMatern52;
  throw std::invalid_argument("unknown kernel '" + s + "' (expected rbf or matern)");
}

double GpKernel::operator()(std::span<const double> a, std::span<const double> b) const {
  double r2 = 0.0;
  for (std::size_t i = 0; i < lengthscales.size(); ++i) {
    const double z = (a[i] - b[i]) / lengthscales[i];
    r2 += z * z;
  }
  if (kind == KernelKind::kRbf) return outputscale * std::exp(-0.5 * r2);
  const double s5r = std::sqrt(5.0 * r2);
  return outputscale * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
}

void GPPriorConfig::validate() const {
  if (d == 0) throw std::invalid_argument("gp prior: d must be positive");
  if (!(lengthscale_min > 0 && lengthscale_min <= lengthscale_max))
    throw std::invalid_argument("gp prior: need 0 < lengthscale_min <= lengthscale_max");
  if (!(outputscale_min > 0 && outputscale_min <= outputscale_max))
    throw std::invalid_argument("gp prior: need 0 < outputscale_min <= outputscale_max");
  if (!(noise_std > 0)) throw std::invalid_argument("gp prior: noise_std must be positive");
  if (informative_min > informative_max || informative_max > d)
    throw std::invalid_argument("gp prior: need informative_min <= informative_max <= d");
  if (baseline_count >= d) throw std::invalid_argument("gp prior: baseline_count must be < d");
}

Tensor kernel_matrix(const GpKernel& k, const Tensor& a, const Tensor& b) {
  Tensor out(Shape{a.rows(), b.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out.at(i, j) = k(a.row(i), b.row(j));
  return out;
}

Tensor kernel_matrix(const GpKernel& k, const Tensor& x) {
  Tensor out(Shape{x.rows(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out.at(i, i) = k(x.row(i), x.row(i));
    for (std::size_t j = 0; j < i; ++j) out.at(i, j) = out.at(j, i) = k(x.row(i), x.row(j));
  }
  return out;
}

Tensor cholesky_with_jitter(const Tensor& a, double* jitter_used) {
  if (a.rank() != 2 || a.rows() != a.cols()) throw ShapeError("cholesky: square matrix required");
  const auto m = detail::as_matrix(a);
  double jitter = 0.0;
  for (;;) {
    detail::RowMatrix shifted = m;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<detail::RowMatrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return detail::from_matrix(llt.matrixL());
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4 * 1.0000001) throw std::runtime_error("cholesky failed even with jitter 1e-4");
  }
}

Dataset sample_gp_task(const GPPriorConfig& cfg, std::size_t n, Rng& rng) {
  cfg.validate();
  if (n < 2) throw std::invalid_argument("gp task: N must be >= 2");
  const std::size_t d = cfg.d;

  Dataset ds;
  ds.kind = TaskKind::kRegression;
  ds.x = Tensor(Shape{n, d});
  for (auto& v : ds.x.values()) v = normal(rng);
  ds.r = Tensor(Shape{n, d}, 1.0);
  ds.baseline.assign(d, 0);
  std::fill_n(ds.baseline.begin(), cfg.baseline_count, 1);

  const auto n_inf = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(cfg.informative_min),
                                                         static_cast<std::int64_t>(cfg.informative_max)));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  GpKernel k;
  k.kind = cfg.kernel;
  k.noise_std = cfg.noise_std;
  k.lengthscales.assign(d, kUninformativeLengthscale);
  for (std::size_t i = 0; i < n_inf; ++i) k.lengthscales[order[i]] = uniform(rng, cfg.lengthscale_min, cfg.lengthscale_max);
  k.outputscale = uniform(rng, cfg.outputscale_min, cfg.outputscale_max);

  Tensor kmat = kernel_matrix(k, ds.x);
  for (std::size_t i = 0; i < n; ++i) kmat.at(i, i) += k.noise_std * k.noise_std;
  const Tensor chol = cholesky_with_jitter(kmat);

  Tensor z(Shape{n, 1});
  for (auto& v : z.values()) v = normal(rng);
  ds.y = Tensor(Shape{n, 1});
  detail::as_matrix(ds.y) = detail::as_matrix(chol).triangularView<Eigen::Lower>() * detail::as_matrix(z);
  ds.kernel = std::move(k);
  return ds;
}

}  // namespace afa
