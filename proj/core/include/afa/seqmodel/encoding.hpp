#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "afa/diffkernel/graph.hpp"
#include "afa/taskgen/dataset.hpp"

namespace afa {

enum class TokenRole { kContext, kTarget, kQuery };

// Acquisition state of q query points. `x` holds ground truth; only entries
// with a = 1 are ever encoded.
class AcquisitionState {
 public:
  AcquisitionState() = default;
  // Starts with every baseline column acquired.
  AcquisitionState(Tensor x, Tensor r, std::span<const std::uint8_t> baseline);
  // Query rows of a dataset.
  static AcquisitionState from_rows(const Dataset& ds, std::span<const std::size_t> rows);

  std::size_t queries() const { return x_.rows(); }
  std::size_t d() const { return x_.cols(); }
  const Tensor& x() const { return x_; }
  const Tensor& r() const { return r_; }
  const Tensor& a() const { return a_; }

  bool acquired(std::size_t q, std::size_t j) const { return a_.at(q, j) == 1.0; }
  bool available(std::size_t q, std::size_t j) const { return r_.at(q, j) == 1.0; }
  bool is_candidate(std::size_t q, std::size_t j) const { return available(q, j) && !acquired(q, j); }
  std::vector<std::size_t> candidates(std::size_t q) const;
  // [q, d] binary: 1 where the feature may still be acquired.
  Tensor candidate_mask() const;
  // Throws std::logic_error for a blocked or already acquired feature.
  void acquire(std::size_t q, std::size_t j);
  // x * r with unavailable entries exactly 0.
  Tensor available_values() const;

 private:
  Tensor x_, r_, a_;
};

// [x * r, r, y] per row.
Tensor encode_labeled(const Tensor& x, const Tensor& r, const Tensor& y);
// [x * a, a, 0^c] per row.
Tensor encode_queries(const AcquisitionState& s, std::size_t c);
// Differentiable variant: `a` may be relaxed; `x_avail` must already be
// zero wherever r = 0.
Var encode_queries(Graph& g, const Tensor& x_avail, Var a, std::size_t c);

inline constexpr std::size_t kNoTarget = std::numeric_limits<std::size_t>::max();

// Rows are ordered context (m), targets (t), queries (q). 1 = may attend.
//   context -> all context
//   target i -> all context, targets 0..i
//   query k -> all context, targets strictly before pair[k], itself
// Queries never see each other. pair[k] = kNoTarget means context only.
Tensor build_mask(std::size_t m, std::size_t targets, std::span<const std::size_t> pair);
// Training layout: q targets and q queries, query k paired with target k.
Tensor build_mask(std::size_t m, std::size_t q);
// Inference layout: no targets.
Tensor build_inference_mask(std::size_t m, std::size_t q);

}  // namespace afa
