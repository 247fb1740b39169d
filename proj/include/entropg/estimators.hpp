#ifndef ENTROPG_ESTIMATORS_HPP
#define ENTROPG_ESTIMATORS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entropg/policy.hpp"

namespace entropg::entropy {

enum class EstimatorKind {
  none,
  crude,
  smoothed,
  smoothed_mode,
  unbiased_gradient,
  exact,
};

EstimatorKind estimator_kind_from_string(const std::string& s);
std::string to_string(EstimatorKind k);

/// A scalar entropy-bonus term on the tape. `value` is what the trainer adds
/// to the objective (and backwards through). For the unbiased-gradient kind
/// it is the smoothed estimate plus a zero-mean correction whose coefficients
/// are detached, so backward(value) yields the unbiased entropy-gradient
/// estimate; `correction` holds that extra term on its own.
struct EntropyEstimate {
  diff::Tensor value;
  EstimatorKind kind = EstimatorKind::none;
  std::optional<diff::Tensor> correction;

  /// The entropy number to report (correction excluded).
  double entropy_value() const;
};

/// -log p(a) of the sampled action.
EntropyEstimate crude_entropy(const policy::SampleTrace& trace);

/// Sum over dimensions of the exact conditional entropy along the sampled
/// prefix. Uses only tensors retained while sampling: no extra forward pass.
EntropyEstimate smoothed_entropy(const policy::SampleTrace& trace);

/// Smoothed estimate evaluated along the beam-search action instead of the
/// sampled one: biased, but deterministic given the parameters.
EntropyEstimate smoothed_mode_entropy(policy::PolicyModel& model, diff::Tape& tape,
                                      std::span<const double> state, int beam);

/// Smoothed estimate plus the correction that makes backward() an unbiased
/// estimate of the entropy gradient: for each dimension i, the conditional
/// entropy (detached) times the log-probability of the prefix before i.
EntropyEstimate unbiased_entropy_gradient_estimate(const policy::SampleTrace& trace);

/// Scalar whose backward() is the crude entropy-gradient estimate
/// -log p(a) * grad log p(a); built as -detach(log p(a)) * log p(a).
diff::Tensor crude_entropy_gradient_estimate(const policy::SampleTrace& trace);

/// Value-only evaluations (no tape growth), for reporting and verification.
double crude_entropy_value(const policy::SampleTrace& trace);
double smoothed_entropy_value(const policy::SampleTrace& trace);

/// Smoothed entropy along an explicit action (scratch tape inside).
double smoothed_entropy_along(policy::PolicyModel& model, std::span<const double> state,
                              const policy::Action& action);

/// Exact entropy by enumerating all k^d actions, differentiable. Conditional
/// distributions are evaluated once per distinct prefix.
diff::Tensor exact_entropy(policy::PolicyModel& model, diff::Tape& tape,
                           std::span<const double> state,
                           std::size_t action_cap = 1000000);

/// Gradients of the exact entropy, one vector per entry of model.parameters().
/// Leaves the parameter accumulators as they were found.
std::vector<diff::Values> exact_entropy_gradient(policy::PolicyModel& model,
                                                 std::span<const double> state,
                                                 std::size_t action_cap = 1000000);

struct GaussianCheckReport {
  double exact_entropy = 0.0;
  double max_abs_deviation = 0.0;
  int samples = 0;
};

/// Draws from a bivariate normal, evaluates the smoothed estimate through the
/// autoregressive factorisation X1, X2|X1 for every draw, and reports the
/// largest deviation from the closed-form joint entropy.
GaussianCheckReport gaussian_smoothed_check(const std::array<double, 2>& mu,
                                            const std::array<double, 4>& cov,
                                            int samples, std::uint64_t seed);

}  // namespace entropg::entropy

#endif
