#include "afa/oracle/gp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "afa/oracle/discrete.hpp"
#include "afa/rng.hpp"
#include "eigen_bridge.hpp"

namespace afa {
namespace {

using detail::RowMatrix;

void check_inputs(const GpKernel& k, const Tensor& ctx_x, std::span<const double> ctx_y, const Tensor& query_x) {
  if (ctx_x.rank() != 2 || query_x.rank() != 2) throw std::invalid_argument("gp_posterior: inputs must be matrices");
  if (ctx_x.rows() != ctx_y.size()) throw std::invalid_argument("gp_posterior: context x/y length mismatch");
  const std::size_t d = k.lengthscales.size();
  if ((ctx_x.rows() > 0 && ctx_x.cols() != d) || query_x.cols() != d)
    throw std::invalid_argument("gp_posterior: feature width does not match kernel");
  if (!(k.noise_std > 0.0)) throw std::invalid_argument("gp_posterior: noise must be positive");
}

RowMatrix noisy_gram(const GpKernel& k, const Tensor& ctx_x) {
  RowMatrix g = detail::as_matrix(kernel_matrix(k, ctx_x));
  g.diagonal().array() += k.noise_std * k.noise_std;
  return g;
}

RowMatrix cross(const GpKernel& k, const Tensor& ctx_x, const Tensor& query_x) {
  return detail::as_matrix(kernel_matrix(k, query_x, ctx_x));
}

Eigen::VectorXd prior_var(const GpKernel& k, const Tensor& query_x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(query_x.rows()));
  for (std::size_t i = 0; i < query_x.rows(); ++i)
    v[static_cast<Eigen::Index>(i)] = k(query_x.row(i), query_x.row(i)) + k.noise_std * k.noise_std;
  return v;
}

GPPosterior prior_only(const GpKernel& k, const Tensor& query_x) {
  GPPosterior out;
  out.mean.assign(query_x.rows(), 0.0);
  const auto v = prior_var(k, query_x);
  out.var.assign(v.data(), v.data() + v.size());
  return out;
}

}  // namespace

GPPosterior gp_posterior(const GpKernel& k, const Tensor& ctx_x, std::span<const double> ctx_y,
                         const Tensor& query_x) {
  check_inputs(k, ctx_x, ctx_y, query_x);
  if (ctx_y.empty()) return prior_only(k, query_x);
  Eigen::LLT<RowMatrix> llt(noisy_gram(k, ctx_x));
  if (llt.info() != Eigen::Success) throw std::runtime_error("gp_posterior: Cholesky factorization failed");
  const Eigen::Map<const Eigen::VectorXd> y(ctx_y.data(), static_cast<Eigen::Index>(ctx_y.size()));
  const RowMatrix ks = cross(k, ctx_x, query_x);  // [q, m]
  const Eigen::VectorXd mean = ks * llt.solve(y);
  const RowMatrix v = llt.matrixL().solve(ks.transpose());  // [m, q]
  const Eigen::VectorXd var = prior_var(k, query_x) - v.colwise().squaredNorm().transpose();
  return {std::vector<double>(mean.data(), mean.data() + mean.size()),
          std::vector<double>(var.data(), var.data() + var.size())};
}

GPPosterior gp_posterior_lu(const GpKernel& k, const Tensor& ctx_x, std::span<const double> ctx_y,
                            const Tensor& query_x) {
  check_inputs(k, ctx_x, ctx_y, query_x);
  if (ctx_y.empty()) return prior_only(k, query_x);
  Eigen::PartialPivLU<RowMatrix> lu(noisy_gram(k, ctx_x));
  const Eigen::Map<const Eigen::VectorXd> y(ctx_y.data(), static_cast<Eigen::Index>(ctx_y.size()));
  const RowMatrix ks = cross(k, ctx_x, query_x);
  const RowMatrix w = lu.solve(ks.transpose());  // K^{-1} k_*, [m, q]
  GPPosterior out;
  const Eigen::VectorXd pv = prior_var(k, query_x);
  for (Eigen::Index i = 0; i < ks.rows(); ++i) {
    out.mean.push_back(w.col(i).dot(y));
    out.var.push_back(pv[i] - ks.row(i).dot(w.col(i)));
  }
  return out;
}

double gaussian_nll(double mean, double var, double y) {
  if (!(var > 0.0)) throw std::invalid_argument("gaussian_nll: variance must be positive");
  const double r = y - mean;
  return 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5 * r * r / var;
}

double gaussian_entropy(double var) {
  if (!(var > 0.0)) throw std::invalid_argument("gaussian_entropy: variance must be positive");
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * var);
}

GpOracle::GpOracle(GpKernel kernel, const Tensor& ctx_x, std::span<const double> ctx_y, std::size_t samples,
                   std::uint64_t seed)
    : kernel_(std::move(kernel)), ctx_x_(ctx_x), samples_(samples), seed_(seed) {
  if (samples_ == 0) throw std::invalid_argument("GpOracle: samples must be positive");
  check_inputs(kernel_, ctx_x, ctx_y, Tensor(Shape{0, kernel_.lengthscales.size()}));
  if (ctx_y.empty()) return;
  Eigen::LLT<RowMatrix> llt(noisy_gram(kernel_, ctx_x));
  if (llt.info() != Eigen::Success) throw std::runtime_error("GpOracle: Cholesky factorization failed");
  chol_ = detail::from_matrix(llt.matrixL());
  const Eigen::Map<const Eigen::VectorXd> y(ctx_y.data(), static_cast<Eigen::Index>(ctx_y.size()));
  const Eigen::VectorXd a = llt.solve(y);
  alpha_.assign(a.data(), a.data() + a.size());
}

std::vector<double> GpOracle::draws(std::size_t query, std::uint64_t salt) const {
  Rng rng = derive_rng(seed_, {query, salt});
  std::vector<double> z(samples_ * kernel_.lengthscales.size());
  for (double& v : z) v = normal(rng);
  return z;
}

double GpOracle::posterior_mean_var(std::span<const double> x, double* var) const {
  const double prior = kernel_(x, x) + kernel_.noise_std * kernel_.noise_std;
  if (alpha_.empty()) {
    *var = prior;
    return 0.0;
  }
  const std::size_t m = ctx_x_.rows();
  Eigen::VectorXd ks(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) ks[static_cast<Eigen::Index>(i)] = kernel_(ctx_x_.row(i), x);
  const Eigen::Map<const Eigen::VectorXd> a(alpha_.data(), static_cast<Eigen::Index>(m));
  const auto l = detail::as_matrix(chol_);
  const Eigen::VectorXd v = l.triangularView<Eigen::Lower>().solve(ks);
  *var = prior - v.squaredNorm();
  return ks.dot(a);
}

GpOracle::Gaussian GpOracle::predict(std::size_t query, std::span<const double> x,
                                     std::span<const std::uint8_t> acquired) const {
  const std::size_t d = kernel_.lengthscales.size();
  if (x.size() != d || acquired.size() != d) throw std::invalid_argument("GpOracle: feature width mismatch");
  bool complete = true;
  for (auto a : acquired) complete = complete && a;
  Gaussian g;
  if (complete) {
    g.mean = posterior_mean_var(x, &g.var);
    return g;
  }
  const auto z = draws(query, 0);
  std::vector<double> xs(d);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < samples_; ++s) {
    for (std::size_t j = 0; j < d; ++j) xs[j] = acquired[j] ? x[j] : z[s * d + j];
    double v = 0.0;
    const double mu = posterior_mean_var(xs, &v);
    m1 += mu;
    m2 += v + mu * mu;
  }
  const double n = static_cast<double>(samples_);
  g.mean = m1 / n;
  g.var = std::max(m2 / n - g.mean * g.mean, kernel_.noise_std * kernel_.noise_std);
  return g;
}

std::size_t GpOracle::greedy(std::size_t query, std::span<const double> x, std::span<const std::uint8_t> acquired,
                             std::span<const std::uint8_t> candidates) const {
  const std::size_t d = kernel_.lengthscales.size();
  if (candidates.size() != d) throw std::invalid_argument("GpOracle: candidate mask width mismatch");
  const auto outer = draws(query, 1);
  std::vector<std::uint8_t> a(acquired.begin(), acquired.end());
  std::vector<double> xs(x.begin(), x.end());
  std::size_t best = d;
  double best_h = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (!candidates[j]) continue;
    if (acquired[j]) throw std::invalid_argument("GpOracle: candidate already acquired");
    a[j] = 1;
    double h = 0.0;
    for (std::size_t o = 0; o < samples_; ++o) {
      xs[j] = outer[o * d + j];
      h += gaussian_entropy(predict(query, xs, a).var);
    }
    h /= static_cast<double>(samples_);
    a[j] = 0;
    xs[j] = x[j];
    if (best == d || h < best_h - kOracleTieTolerance) best = j, best_h = h;
  }
  if (best == d) throw std::invalid_argument("GpOracle: no candidate feature");
  return best;
}

}  // namespace afa
