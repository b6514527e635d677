#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "afa/rng.hpp"
#include "afa/taskgen/dataset.hpp"

namespace afa {

enum class Wiring { kNone, kMar, kMnar };

std::string to_string(Wiring w);
Wiring wiring_from_string(const std::string& s);

// p(R_j = 1 | parents), tabulated over the parents' joint support with the
// last parent varying fastest. Parents are column indices.
struct Propensity {
  std::vector<std::size_t> parents;
  std::vector<double> table;
};

// Explicit joint pmf over discrete columns X_0..X_{D-1} and a label Y, laid
// out row-major with Y fastest. Baseline columns play the role of X0: always
// observed and never acquired. Missingness of column j is drawn from its
// propensity table after (X, Y), so it cannot influence Y.
struct DiscreteWorld {
  std::vector<std::size_t> x_support;
  std::size_t y_support = 2;
  std::vector<std::uint8_t> baseline;
  std::vector<double> pmf;
  std::vector<Propensity> propensity;

  std::size_t columns() const { return x_support.size(); }
  std::size_t cells() const { return pmf.size(); }
  // values has columns() + 1 entries, the last being y.
  std::size_t encode(std::span<const std::size_t> values) const;
  void decode(std::size_t cell, std::span<std::size_t> values) const;
  double p_observed(std::size_t j, std::span<const std::size_t> values) const;
  // p(Y = k | all columns) for one assignment of the columns.
  std::vector<double> label_posterior(std::span<const std::size_t> x) const;

  void validate() const;
};

inline constexpr std::size_t kMaxWorldCells = 1000000;

struct DiscreteWorldSpec {
  std::size_t d = 3;  // acquirable columns
  std::size_t baseline_columns = 1;
  std::size_t support_min = 2;
  std::size_t support_max = 3;
  std::size_t y_support = 2;
  Wiring wiring = Wiring::kMar;
  double dirichlet_alpha = 1.0;
  // p(R_j = 1 | parents) ~ U[propensity_min, propensity_max].
  double propensity_min = 0.1;
  double propensity_max = 1.0;
};

DiscreteWorld sample_discrete_world(const DiscreteWorldSpec& spec, Rng& rng);

// Y uniform binary, column `copy` equals Y, every other column is Y passed
// through a binary symmetric channel with flip probability `flips[j]`
// (0.5 = independent). No missingness, no baseline columns.
DiscreteWorld make_copy_world(std::size_t d, std::size_t copy, std::span<const double> flips);
// Copy column and flip probabilities (U[0.25, 0.5]) drawn at random.
DiscreteWorld sample_copy_world(std::size_t d, Rng& rng);

// Draws rows i.i.d. from the world; R from the propensity tables; labels
// one-hot; true_probs = p(Y | all columns).
Dataset sample_world_dataset(const DiscreteWorld& w, std::size_t n, Rng& rng);

std::string world_to_json(const DiscreteWorld& w);
DiscreteWorld world_from_json(const std::string& text);

}  // namespace afa
