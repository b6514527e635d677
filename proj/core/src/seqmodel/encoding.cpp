#include "afa/seqmodel/encoding.hpp"

#include <algorithm>
#include <stdexcept>

#include "afa/diffkernel/ops.hpp"

namespace afa {

AcquisitionState::AcquisitionState(Tensor x, Tensor r, std::span<const std::uint8_t> baseline)
    : x_(std::move(x)), r_(std::move(r)), a_(x_.shape()) {
  if (x_.shape() != r_.shape() || x_.rank() != 2) throw ShapeError("acquisition state: x and r must be equal-shape matrices");
  if (baseline.size() != d()) throw ShapeError("acquisition state: baseline flags must have length d");
  for (std::size_t q = 0; q < queries(); ++q)
    for (std::size_t j = 0; j < d(); ++j)
      if (baseline[j]) {
        if (!available(q, j)) throw std::invalid_argument("acquisition state: baseline feature unavailable");
        a_.at(q, j) = 1.0;
      }
}

AcquisitionState AcquisitionState::from_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  const auto sub = subset_rows(ds, rows);
  return AcquisitionState(sub.x, sub.r, ds.baseline);
}

std::vector<std::size_t> AcquisitionState::candidates(std::size_t q) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < d(); ++j)
    if (is_candidate(q, j)) out.push_back(j);
  return out;
}

Tensor AcquisitionState::candidate_mask() const {
  Tensor m(a_.shape());
  for (std::size_t q = 0; q < queries(); ++q)
    for (std::size_t j = 0; j < d(); ++j) m.at(q, j) = is_candidate(q, j) ? 1.0 : 0.0;
  return m;
}

void AcquisitionState::acquire(std::size_t q, std::size_t j) {
  if (!available(q, j)) throw std::logic_error("acquire: feature " + std::to_string(j) + " is unavailable (r = 0)");
  if (acquired(q, j)) throw std::logic_error("acquire: feature " + std::to_string(j) + " already acquired");
  a_.at(q, j) = 1.0;
}

Tensor AcquisitionState::available_values() const {
  Tensor out(x_.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r_[i] == 1.0 ? x_[i] : 0.0;
  return out;
}

Tensor encode_labeled(const Tensor& x, const Tensor& r, const Tensor& y) {
  if (x.shape() != r.shape() || y.rows() != x.rows()) throw ShapeError("encode: inconsistent x, r, y shapes");
  const std::size_t n = x.rows(), d = x.cols(), c = y.cols();
  Tensor out(Shape{n, 2 * d + c});
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const bool obs = r.at(i, j) == 1.0;
      row[j] = obs ? x.at(i, j) : 0.0;
      row[d + j] = obs ? 1.0 : 0.0;
    }
    for (std::size_t k = 0; k < c; ++k) row[2 * d + k] = y.at(i, k);
  }
  return out;
}

Tensor encode_queries(const AcquisitionState& s, std::size_t c) {
  const std::size_t q = s.queries(), d = s.d();
  Tensor out(Shape{q, 2 * d + c});
  for (std::size_t i = 0; i < q; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const bool acq = s.acquired(i, j);
      row[j] = acq ? s.x().at(i, j) : 0.0;
      row[d + j] = acq ? 1.0 : 0.0;
    }
  }
  return out;
}

Var encode_queries(Graph& g, const Tensor& x_avail, Var a, std::size_t c) {
  if (a.shape() != x_avail.shape()) throw ShapeError("encode_queries: a and x shapes differ");
  std::vector<Var> parts{ops::mul(g.constant(x_avail), a), a};
  if (c > 0) parts.push_back(g.constant(Tensor(Shape{x_avail.rows(), c})));
  return ops::concat_cols(parts);
}

Tensor build_mask(std::size_t m, std::size_t targets, std::span<const std::size_t> pair) {
  const std::size_t q = pair.size();
  const std::size_t len = m + targets + q;
  Tensor mask(Shape{len, len});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) mask.at(i, j) = 1.0;
  for (std::size_t t = 0; t < targets; ++t) {
    const std::size_t row = m + t;
    for (std::size_t j = 0; j < m; ++j) mask.at(row, j) = 1.0;
    for (std::size_t u = 0; u <= t; ++u) mask.at(row, m + u) = 1.0;
  }
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t row = m + targets + k;
    if (pair[k] != kNoTarget && pair[k] >= targets) throw std::out_of_range("build_mask: paired target out of range");
    for (std::size_t j = 0; j < m; ++j) mask.at(row, j) = 1.0;
    const std::size_t visible = pair[k] == kNoTarget ? 0 : pair[k];
    for (std::size_t u = 0; u < visible; ++u) mask.at(row, m + u) = 1.0;
    mask.at(row, row) = 1.0;
  }
  return mask;
}

Tensor build_mask(std::size_t m, std::size_t q) {
  std::vector<std::size_t> pair(q);
  for (std::size_t k = 0; k < q; ++k) pair[k] = k;
  return build_mask(m, q, pair);
}

Tensor build_inference_mask(std::size_t m, std::size_t q) {
  std::vector<std::size_t> pair(q, kNoTarget);
  return build_mask(m, 0, pair);
}

}  // namespace afa
