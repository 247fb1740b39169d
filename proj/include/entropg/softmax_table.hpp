#ifndef ENTROPG_SOFTMAX_TABLE_HPP
#define ENTROPG_SOFTMAX_TABLE_HPP

#include <cstdint>
#include <vector>

#include "entropg/policy.hpp"

namespace entropg::entropy {

/// Fully tabular autoregressive distribution: one explicit logit row per
/// prefix, softmaxed into the conditional for the next dimension. Small by
/// construction (d <= 3, k <= 6); it exists so estimator tests and the
/// verification suites have a substrate whose exact entropy and gradient are
/// enumerable.
class SoftmaxTable : public policy::PolicyModel {
 public:
  /// Logits drawn N(0, logit_scale^2).
  static SoftmaxTable random(int d, int k, std::uint64_t seed, double logit_scale = 1.0);
  /// All-zero logits: the uniform distribution over the action space.
  static SoftmaxTable uniform(int d, int k);
  /// Explicit per-dimension logit tables; table[i] has k^i rows of k logits.
  SoftmaxTable(int d, int k, std::vector<std::vector<double>> logit_tables);

  std::string kind() const override { return "table"; }
  std::vector<diff::Parameter*> parameters() override;

  /// Logits are divided by the temperature: large values push every
  /// conditional toward uniform, small ones toward deterministic.
  void set_temperature(double t);
  double temperature() const { return temperature_; }

  int prefix_row(std::span<const int> prefix) const;

 protected:
  std::unique_ptr<policy::StepState> begin_impl(diff::Tape&,
                                                std::span<const double>) override;
  diff::Tensor step_impl(diff::Tape&, policy::StepState&, int prev) override;

 private:
  std::vector<diff::Parameter> logit_tables_;  // one [k^i, k] matrix per dimension
  double temperature_ = 1.0;
};

}  // namespace entropg::entropy

#endif
