#ifndef ENTROPG_MODELS_HPP
#define ENTROPG_MODELS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "entropg/policy.hpp"

namespace entropg::policy {

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
diff::Parameter make_weight(const std::string& name, int rows, int cols,
                            std::mt19937_64& rng);
diff::Parameter make_bias(const std::string& name, int n);

/// Feed-forward stack of tanh hidden layers used by the IS and MMDP policies
/// and the value-net baseline.
class Ffn {
 public:
  Ffn() = default;
  Ffn(const std::string& prefix, int input, std::vector<int> hidden, int output,
      std::mt19937_64& rng);

  diff::Tensor forward(diff::Tape& tape, const diff::Tensor& input);
  std::vector<diff::Parameter*> parameters();

 private:
  std::vector<diff::Parameter> weights_;
  std::vector<diff::Parameter> biases_;
};

/// Independent softmax heads over a shared state representation; the
/// conditional for dimension i ignores every earlier component.
class ISPolicy : public PolicyModel {
 public:
  ISPolicy(ActionSpace space, int state_dim, int hidden, int layers, std::uint64_t seed);

  std::string kind() const override { return "is"; }
  std::vector<diff::Parameter*> parameters() override;

  int hidden_size() const { return hidden_; }
  int num_layers() const { return layers_; }

 protected:
  std::unique_ptr<StepState> begin_impl(diff::Tape&, std::span<const double>) override;
  diff::Tensor step_impl(diff::Tape&, StepState&, int prev) override;

 private:
  int hidden_, layers_;
  Ffn trunk_;
  std::vector<diff::Parameter> head_weights_;
  std::vector<diff::Parameter> head_biases_;
};

/// One shared feed-forward network whose input is the state followed by d-1
/// slots holding the components chosen so far; unused slots stay exactly 0.
/// Chosen components are encoded as (index+1)/k so a placeholder 0 is
/// distinguishable from component 0.
class MMDPPolicy : public PolicyModel {
 public:
  MMDPPolicy(ActionSpace space, int state_dim, int hidden, int layers, std::uint64_t seed);

  std::string kind() const override { return "mmdp"; }
  std::vector<diff::Parameter*> parameters() override;

  int hidden_size() const { return hidden_; }
  int num_layers() const { return layers_; }

  /// FFN input for a given prefix; exposed so tests can pin the layout.
  std::vector<double> encode_input(std::span<const double> state,
                                   std::span<const int> prefix) const;

 protected:
  std::unique_ptr<StepState> begin_impl(diff::Tape&, std::span<const double>) override;
  diff::Tensor step_impl(diff::Tape&, StepState&, int prev) override;

 private:
  int hidden_, layers_;
  Ffn net_;
};

/// Single-layer LSTM fed (state, previous component one-hot) at every
/// dimension. The first step uses a learned zero-initialised start vector in
/// place of the one-hot.
class LSTMPolicy : public PolicyModel {
 public:
  LSTMPolicy(ActionSpace space, int state_dim, int hidden, std::uint64_t seed);

  std::string kind() const override { return "lstm"; }
  std::vector<diff::Parameter*> parameters() override;

  int hidden_size() const { return hidden_; }

 protected:
  std::unique_ptr<StepState> begin_impl(diff::Tape&, std::span<const double>) override;
  diff::Tensor step_impl(diff::Tape&, StepState&, int prev) override;

 private:
  LSTMPolicy(ActionSpace space, int state_dim, int hidden, std::mt19937_64 rng);

  int hidden_;
  diff::Parameter w_input_, w_hidden_, bias_gates_;  // gate order: i, f, g, o
  diff::Parameter w_out_, b_out_;
  diff::Parameter start_embedding_;
};

std::unique_ptr<PolicyModel> make_policy(const std::string& kind, ActionSpace space,
                                         int state_dim, int hidden, int layers,
                                         std::uint64_t seed);

}  // namespace entropg::policy

#endif
