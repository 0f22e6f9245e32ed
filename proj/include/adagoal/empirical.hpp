#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adagoal {

/// Visit and transition counts with the derived empirical kernel
/// p^(s'|s,a) = n(s,a,s')/n(s,a) when n(s,a) > 0 and uniform 1/S otherwise.
/// Observed successors are kept per (s,a) so table rebuilds touch only the
/// nonzero entries.
class EmpiricalModel {
 public:
  EmpiricalModel() = default;
  EmpiricalModel(int num_states, int num_actions)
      : S_(num_states),
        A_(num_actions),
        n_sa_(static_cast<std::size_t>(num_states) * num_actions, 0),
        n_sas_(static_cast<std::size_t>(num_states) * num_actions * num_states, 0),
        successors_(static_cast<std::size_t>(num_states) * num_actions),
        state_visits_(num_states, 0) {}

  int num_states() const { return S_; }
  int num_actions() const { return A_; }
  std::int64_t total_steps() const { return t_; }

  std::size_t pair_index(int s, int a) const { return static_cast<std::size_t>(s) * A_ + a; }

  void record_transition(int s, int a, int next) {
    const std::size_t idx = pair_index(s, a);
    ++n_sa_[idx];
    std::int64_t& joint = n_sas_[idx * S_ + next];
    if (joint == 0) successors_[idx].push_back(next);
    ++joint;
    ++t_;
  }

  void record_state_visit(int s) { ++state_visits_[s]; }

  std::int64_t count(int s, int a) const { return n_sa_[pair_index(s, a)]; }
  std::int64_t count(int s, int a, int next) const { return n_sas_[pair_index(s, a) * S_ + next]; }
  std::int64_t state_visits(int s) const { return state_visits_[s]; }
  const std::vector<std::int64_t>& state_visit_counts() const { return state_visits_; }
  std::span<const std::int32_t> observed_successors(int s, int a) const {
    const auto& v = successors_[pair_index(s, a)];
    return {v.data(), v.size()};
  }

  double p_hat(int s, int a, int next) const {
    const std::int64_t n = count(s, a);
    if (n == 0) return 1.0 / S_;
    return static_cast<double>(count(s, a, next)) / static_cast<double>(n);
  }

  /// p^ V(s,a); the unvisited fast path is the mean of V (uniform row).
  double p_hat_dot(std::span<const double> value, int s, int a) const {
    const std::int64_t n = count(s, a);
    if (n == 0) {
      double mean = 0.0;
      for (double v : value) mean += v;
      return mean / S_;
    }
    const std::size_t idx = pair_index(s, a);
    double acc = 0.0;
    for (std::int32_t next : successors_[idx]) acc += static_cast<double>(n_sas_[idx * S_ + next]) * value[next];
    return acc / static_cast<double>(n);
  }

 private:
  int S_ = 0;
  int A_ = 0;
  std::vector<std::int64_t> n_sa_;
  std::vector<std::int64_t> n_sas_;
  std::vector<std::vector<std::int32_t>> successors_;
  std::vector<std::int64_t> state_visits_;
  std::int64_t t_ = 0;
};

}  // namespace adagoal
