#pragma once

#include <cmath>
#include <cstdint>

namespace adagoal {

/// Exploration-bonus thresholds for the tabular algorithm.
///
/// Exact mode uses the theoretical pair
///   beta(n)  = log(3 S^2 A H / delta) + S log(8e(n+1))
///   beta*(n) = log(3 S^2 A H / delta) +   log(8e(n+1))
/// with scale factors 3/14H^2 (optimistic and pessimistic recursions) and
/// 6/36H^2 (error recursion). Simplified mode collapses both thresholds to a
/// single log-scale term log(S A H / delta) and all scale factors to 1; it is
/// the form the experiments run with.
struct BonusParams {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  double delta = 0.1;
  bool simplified = false;

  double log_base() const {
    return std::log(3.0 * num_states * num_states * num_actions * horizon / delta);
  }
  double simplified_term() const {
    return std::log(1.0 / delta);
  }

  double beta(std::int64_t n) const {
    if (simplified) return simplified_term();
    return log_base() + num_states * std::log(8.0 * 2.718281828459045 * (static_cast<double>(n) + 1.0));
  }
  double beta_star(std::int64_t n) const {
    if (simplified) return simplified_term();
    return log_base() + std::log(8.0 * 2.718281828459045 * (static_cast<double>(n) + 1.0));
  }

  // scale factors in front of sqrt(Var * beta*/n) and beta/n
  double var_coeff_value() const { return simplified ? 1.0 : 3.0; }
  double second_coeff_value() const {
    return simplified ? 1.0 : 14.0 * static_cast<double>(horizon) * horizon;
  }
  double var_coeff_error() const { return simplified ? 1.0 : 6.0; }
  double second_coeff_error() const {
    return simplified ? 1.0 : 36.0 * static_cast<double>(horizon) * horizon;
  }
};

}  // namespace adagoal
