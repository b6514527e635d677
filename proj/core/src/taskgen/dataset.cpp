#include "afa/taskgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afa {

std::string to_string(TaskKind kind) { return kind == TaskKind::kRegression ? "regression" : "classification"; }

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "regression") return TaskKind::kRegression;
  if (s == "classification") return TaskKind::kClassification;
  throw std::invalid_argument("unknown task kind '" + s + "'");
}

std::size_t Dataset::label(std::size_t i) const {
  if (kind != TaskKind::kClassification) throw std::logic_error("label(): not a classification task");
  const auto row = y.row(i);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out(n());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = label(i);
  return out;
}

std::size_t Dataset::baseline_count() const {
  return static_cast<std::size_t>(std::count(baseline.begin(), baseline.end(), 1));
}

void Dataset::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("dataset: " + what); };
  if (x.rank() != 2) fail("x must be a matrix");
  if (n() < 2) fail("need at least 2 rows");
  if (r.shape() != x.shape()) fail("r shape " + shape_string(r.shape()) + " != x shape " + shape_string(x.shape()));
  if (y.rank() != 2 || y.shape()[0] != n()) fail("y must be [N, c]");
  if (baseline.size() != d()) fail("baseline flags must have length d");
  if (!x.all_finite() || !y.all_finite()) fail("non-finite values");
  for (double v : r.values())
    if (v != 0.0 && v != 1.0) fail("r must be binary");
  for (std::size_t j = 0; j < d(); ++j) {
    if (!baseline[j]) continue;
    for (std::size_t i = 0; i < n(); ++i)
      if (r.at(i, j) != 1.0) fail("baseline column " + std::to_string(j) + " has a missing entry");
  }
  if (kind == TaskKind::kRegression && c() != 1) fail("regression labels must have width 1");
  if (kind == TaskKind::kClassification) {
    if (c() < 2) fail("classification needs at least 2 classes");
    for (std::size_t i = 0; i < n(); ++i) {
      double s = 0.0;
      for (double v : y.row(i)) {
        if (v != 0.0 && v != 1.0) fail("classification labels must be one-hot");
        s += v;
      }
      if (s != 1.0) fail("classification labels must be one-hot");
    }
  }
  if (true_probs && true_probs->shape() != Shape{n(), c()}) fail("true_probs must be [N, classes]");
  if (kernel && kernel->lengthscales.size() != d()) fail("kernel lengthscales must have length d");
}

Dataset subset_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  auto take = [&](const Tensor& t) {
    Tensor out(Shape{rows.size(), t.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= t.rows()) throw std::out_of_range("subset_rows: row index out of range");
      std::copy_n(t.row(rows[i]).begin(), t.cols(), out.row(i).begin());
    }
    return out;
  };
  Dataset out = ds;
  out.x = take(ds.x);
  out.r = take(ds.r);
  out.y = take(ds.y);
  if (ds.true_probs) out.true_probs = take(*ds.true_probs);
  return out;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  Tensor out(Shape{labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw std::out_of_range("one_hot: label out of range");
    out.at(i, labels[i]) = 1.0;
  }
  return out;
}

Dataset normalize_per_sequence(const Dataset& ds, NormStats* stats_out) {
  const std::size_t n = ds.n(), d = ds.d();
  NormStats stats;
  stats.mean.assign(d, 0.0);
  stats.sd.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double count = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.r.at(i, j) == 1.0) {
        sum += ds.x.at(i, j);
        count += 1.0;
      }
    if (count == 0.0) continue;
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.r.at(i, j) == 1.0) ss += (ds.x.at(i, j) - mean) * (ds.x.at(i, j) - mean);
    const double var = std::max(ss / count, kVarianceFloor);
    stats.mean[j] = mean;
    stats.sd[j] = std::sqrt(var);
  }

  Dataset out = ds;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.x.at(i, j) = (ds.x.at(i, j) - stats.mean[j]) / stats.sd[j];
  if (out.kernel)
    for (std::size_t j = 0; j < d; ++j) out.kernel->lengthscales[j] /= stats.sd[j];
  out.norm = stats;
  if (stats_out) *stats_out = std::move(stats);
  return out;
}

}  // namespace afa
