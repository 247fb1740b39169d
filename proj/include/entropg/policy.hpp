#ifndef ENTROPG_POLICY_HPP
#define ENTROPG_POLICY_HPP

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "entropg/autodiff.hpp"

namespace entropg::policy {

/// d-dimensional action space where every dimension has the same arity k.
struct ActionSpace {
  int dims = 1;
  int arity = 2;

  ActionSpace() = default;
  ActionSpace(int d, int k);

  std::size_t total_actions() const;  // k^d, throws on overflow past 2^62
  bool operator==(const ActionSpace&) const = default;
};

using Action = std::vector<int>;

void validate_action(const ActionSpace& space, const Action& a);

/// Everything produced while sampling one action: the action itself plus,
/// per dimension, the conditional distribution, its log, and the
/// log-probability of the chosen component, all recorded on the tape.
struct SampleTrace {
  Action action;
  std::vector<diff::Tensor> cond_dists;
  std::vector<diff::Tensor> log_dists;
  std::vector<diff::Tensor> log_prob_terms;
};

/// Sum of the per-dimension log-probability terms as a tape scalar.
diff::Tensor trace_log_prob(const SampleTrace& trace);

/// Per-decode incremental state (hidden state, consumed prefix, ...).
/// Cloneable so beam search can branch mid-sequence.
class StepState {
 public:
  virtual ~StepState() = default;
  virtual std::unique_ptr<StepState> clone() const = 0;
  int depth = 0;
};

/// Autoregressive policy over the action space: p(a) factorises into
/// per-dimension conditionals that are produced one at a time by step().
class PolicyModel {
 public:
  PolicyModel(ActionSpace space, int state_dim);
  virtual ~PolicyModel() = default;

  const ActionSpace& action_space() const { return space_; }
  int state_dim() const { return state_dim_; }
  virtual std::string kind() const = 0;
  virtual std::vector<diff::Parameter*> parameters() = 0;

  std::unique_ptr<StepState> begin(diff::Tape& tape, std::span<const double> state);

  /// Logits of p(a_i | prefix) for the dimension at st.depth, feeding in the
  /// component chosen for the previous dimension (ignored at depth 0).
  /// Advances st by one dimension and bumps the conditional-eval counter.
  diff::Tensor step_logits(diff::Tape& tape, StepState& st, int prev_component);

  /// Conditional distribution given an explicit prefix; replays the prefix
  /// through step_logits, so it is a deterministic function of
  /// (state, prefix, parameters).
  diff::Tensor conditional_dist(diff::Tape& tape, std::span<const double> state,
                                std::span<const int> prefix);

  std::uint64_t conditional_evals() const { return conditional_evals_; }
  void reset_conditional_evals() { conditional_evals_ = 0; }

 protected:
  virtual std::unique_ptr<StepState> begin_impl(diff::Tape& tape,
                                                std::span<const double> state) = 0;
  virtual diff::Tensor step_impl(diff::Tape& tape, StepState& st, int prev_component) = 0;

 private:
  ActionSpace space_;
  int state_dim_;
  std::uint64_t conditional_evals_ = 0;
};

/// Samples an action dimension by dimension (exactly d conditional
/// evaluations), retaining all distributions and log-prob nodes on the tape.
SampleTrace sample(PolicyModel& model, diff::Tape& tape, std::span<const double> state,
                   std::mt19937_64& rng);

/// Per-dimension argmax along the already-chosen prefix. Ties break toward
/// the smallest component index.
Action greedy_action(PolicyModel& model, std::span<const double> state);

/// Beam search over chained log-probabilities. The greedy path is always
/// kept as a candidate, so the result never has lower probability than
/// greedy_action. beam == 1 is exactly greedy.
Action beam_search(PolicyModel& model, std::span<const double> state, int beam);

/// log p(action) as a tape scalar, usable for backward().
diff::Tensor log_prob(PolicyModel& model, diff::Tape& tape, std::span<const double> state,
                      const Action& action);

/// Value-only chained log-probability (scratch tape inside).
double log_prob_value(PolicyModel& model, std::span<const double> state, const Action& action);

/// Draws an index from a probability vector by inverse CDF on one uniform.
int sample_index(std::span<const double> probs, std::mt19937_64& rng);

/// Enumerates actions in lexicographic order (component 0 most significant).
Action nth_action(const ActionSpace& space, std::size_t n);

}  // namespace entropg::policy

#endif
