#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "afa/taskgen/discrete_world.hpp"

namespace afa {

// Observed value per column, or -1 when the column is not in the
// conditioning set.
using Assignment = std::vector<int>;

class PositivityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kOracleTieTolerance = 1e-12;

double assignment_probability(const DiscreteWorld& w, const Assignment& s);

// p(Y | x_S).
std::vector<double> bayes_predictive(const DiscreteWorld& w, const Assignment& s);
// H(Y | X_S = x_S), nats.
double conditional_entropy(const DiscreteWorld& w, const Assignment& s);

// I(Y; X_j | X_S = x_S) by enumeration of the joint table, in nats. With
// complete_case, the joint is reweighted by p(R_j = 1 | parents), i.e. the
// quantity is I(Y; X_j | X_S = x_S, R_j = 1).
double exact_cmi(const DiscreteWorld& w, const Assignment& s, std::size_t j, bool complete_case);

struct IdentificationResult {
  double full = 0.0;
  double complete_case = 0.0;
  double gap = 0.0;  // full - complete_case
};

// Throws PositivityError when p(R_j = 1 | x_S) = 0.
IdentificationResult identification_check(const DiscreteWorld& w, const Assignment& s, std::size_t j);

// Expected cross-entropy of the Bayes predictor after revealing X_j:
// E[-log p(Y | x_S, X_j)] under p(X_j, Y | x_S).
double expected_one_step_loss(const DiscreteWorld& w, const Assignment& s, std::size_t j);
// H(Y | X_j, x_S) computed as H(X_j, Y | x_S) - H(X_j | x_S).
double expected_conditional_entropy(const DiscreteWorld& w, const Assignment& s, std::size_t j);

// Argmax of complete-case CMI over columns with available[j] = 1 that are
// not in S and not baseline; lowest index wins ties within
// kOracleTieTolerance. Throws if there is no candidate.
std::size_t oracle_greedy(const DiscreteWorld& w, const Assignment& s, std::span<const std::uint8_t> available);

// Every (subset S containing all baseline columns, values x_S) with
// positive probability and at least one acquirable column outside S.
std::vector<Assignment> enumerate_states(const DiscreteWorld& w);

}  // namespace afa
