#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afa/diffkernel/tensor.hpp"
#include "afa/taskgen/gp.hpp"

namespace afa {

// Predictive distribution of noisy y at each query point.
struct GPPosterior {
  std::vector<double> mean;
  std::vector<double> var;
};

// Standard GP regression predictive equations, solved through a Cholesky
// factor of K + noise^2 I. Throws std::runtime_error if the factorization
// fails.
GPPosterior gp_posterior(const GpKernel& k, const Tensor& ctx_x, std::span<const double> ctx_y, const Tensor& query_x);

// Same quantity through a partial-pivot LU solve; kept as an independent
// reference for tests.
GPPosterior gp_posterior_lu(const GpKernel& k, const Tensor& ctx_x, std::span<const double> ctx_y,
                            const Tensor& query_x);

double gaussian_nll(double mean, double var, double y);
double gaussian_entropy(double var);

// GP oracle for queries with a partial feature set. Unacquired features are
// integrated out by Monte Carlo under their N(0, 1) prior and the mixture is
// moment-matched to a Gaussian. Context features are taken as fully known
// (ground truth), which is what makes this an oracle rather than a baseline.
// The draws are fixed per query index so candidates are compared under
// common random numbers.
class GpOracle {
 public:
  GpOracle(GpKernel kernel, const Tensor& ctx_x, std::span<const double> ctx_y, std::size_t samples,
           std::uint64_t seed);

  struct Gaussian {
    double mean = 0.0;
    double var = 0.0;
  };

  // x: the query's ground-truth features; acquired: mask of revealed ones.
  Gaussian predict(std::size_t query, std::span<const double> x, std::span<const std::uint8_t> acquired) const;

  // Candidate minimizing the expected predictive entropy after acquisition,
  // i.e. maximizing the moment-matched information gain. Lowest index wins
  // ties. Throws if no candidate exists.
  std::size_t greedy(std::size_t query, std::span<const double> x, std::span<const std::uint8_t> acquired,
                     std::span<const std::uint8_t> candidates) const;

 private:
  std::vector<double> draws(std::size_t query, std::uint64_t salt) const;
  double posterior_mean_var(std::span<const double> x, double* var) const;

  GpKernel kernel_;
  Tensor ctx_x_;
  std::vector<double> alpha_;  // (K + s^2 I)^{-1} y
  Tensor chol_;                // lower factor of K + s^2 I
  std::size_t samples_;
  std::uint64_t seed_;
};

}  // namespace afa
