#include "entropg/models.hpp"

#include <cmath>
#include <stdexcept>

#include "entropg/util.hpp"

namespace entropg::policy {

namespace ops = diff::ops;

diff::Parameter make_weight(const std::string& name, int rows, int cols,
                            std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  diff::Values v(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (double& x : v) x = (2.0 * util::uniform01(rng) - 1.0) * bound;
  return diff::Parameter(name, std::move(v), {rows, cols});
}

diff::Parameter make_bias(const std::string& name, int n) {
  return diff::Parameter(name, diff::Values(static_cast<std::size_t>(n), 0.0), {n});
}

Ffn::Ffn(const std::string& prefix, int input, std::vector<int> hidden, int output,
         std::mt19937_64& rng) {
  int in = input;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    weights_.push_back(make_weight(prefix + ".w" + std::to_string(l), hidden[l], in, rng));
    biases_.push_back(make_bias(prefix + ".b" + std::to_string(l), hidden[l]));
    in = hidden[l];
  }
  weights_.push_back(make_weight(prefix + ".w_out", output, in, rng));
  biases_.push_back(make_bias(prefix + ".b_out", output));
}

diff::Tensor Ffn::forward(diff::Tape& tape, const diff::Tensor& input) {
  diff::Tensor h = input;
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l)
    h = ops::tanh(ops::linear(h, weights_[l].use(tape), biases_[l].use(tape)));
  return ops::linear(h, weights_.back().use(tape), biases_.back().use(tape));
}

std::vector<diff::Parameter*> Ffn::parameters() {
  std::vector<diff::Parameter*> out;
  for (auto& w : weights_) out.push_back(&w);
  for (auto& b : biases_) out.push_back(&b);
  return out;
}

namespace {

struct TrunkState : StepState {
  diff::Tensor representation;
  std::unique_ptr<StepState> clone() const override {
    return std::make_unique<TrunkState>(*this);
  }
};

struct PrefixState : StepState {
  diff::Tensor state_input;  // constant copy of the environment state
  std::vector<int> prefix;
  std::unique_ptr<StepState> clone() const override {
    return std::make_unique<PrefixState>(*this);
  }
};

struct RecurrentState : StepState {
  diff::Tensor state_input;
  diff::Tensor h, c;
  std::unique_ptr<StepState> clone() const override {
    return std::make_unique<RecurrentState>(*this);
  }
};

}  // namespace

ISPolicy::ISPolicy(ActionSpace space, int state_dim, int hidden, int layers,
                   std::uint64_t seed)
    : PolicyModel(space, state_dim), hidden_(hidden), layers_(layers) {
  if (hidden < 1 || layers < 1) throw std::invalid_argument("is: hidden and layers must be >= 1");
  auto rng = util::make_rng(seed, 0x15);
  trunk_ = Ffn("is.trunk", state_dim, std::vector<int>(static_cast<std::size_t>(layers - 1), hidden),
               hidden, rng);
  for (int i = 0; i < space.dims; ++i) {
    head_weights_.push_back(
        make_weight("is.head" + std::to_string(i) + ".w", space.arity, hidden, rng));
    head_biases_.push_back(make_bias("is.head" + std::to_string(i) + ".b", space.arity));
  }
}

std::vector<diff::Parameter*> ISPolicy::parameters() {
  auto out = trunk_.parameters();
  for (auto& w : head_weights_) out.push_back(&w);
  for (auto& b : head_biases_) out.push_back(&b);
  return out;
}

std::unique_ptr<StepState> ISPolicy::begin_impl(diff::Tape& tape,
                                                std::span<const double> state) {
  auto st = std::make_unique<TrunkState>();
  diff::Tensor input = diff::Tensor::constant({state.begin(), state.end()});
  st->representation = ops::tanh(trunk_.forward(tape, input));
  return st;
}

diff::Tensor ISPolicy::step_impl(diff::Tape& tape, StepState& st, int /*prev*/) {
  auto& ts = static_cast<TrunkState&>(st);
  const std::size_t i = static_cast<std::size_t>(st.depth);
  return ops::linear(ts.representation, head_weights_[i].use(tape), head_biases_[i].use(tape));
}

MMDPPolicy::MMDPPolicy(ActionSpace space, int state_dim, int hidden, int layers,
                       std::uint64_t seed)
    : PolicyModel(space, state_dim), hidden_(hidden), layers_(layers) {
  if (hidden < 1 || layers < 1)
    throw std::invalid_argument("mmdp: hidden and layers must be >= 1");
  auto rng = util::make_rng(seed, 0x3d);
  net_ = Ffn("mmdp", state_dim + (space.dims - 1),
             std::vector<int>(static_cast<std::size_t>(layers), hidden), space.arity, rng);
}

std::vector<diff::Parameter*> MMDPPolicy::parameters() { return net_.parameters(); }

std::vector<double> MMDPPolicy::encode_input(std::span<const double> state,
                                             std::span<const int> prefix) const {
  std::vector<double> input(state.begin(), state.end());
  input.resize(state.size() + static_cast<std::size_t>(action_space().dims - 1), 0.0);
  for (std::size_t j = 0; j < prefix.size(); ++j)
    input[state.size() + j] =
        static_cast<double>(prefix[j] + 1) / static_cast<double>(action_space().arity);
  return input;
}

std::unique_ptr<StepState> MMDPPolicy::begin_impl(diff::Tape&, std::span<const double> state) {
  auto st = std::make_unique<PrefixState>();
  st->state_input = diff::Tensor::constant({state.begin(), state.end()});
  return st;
}

diff::Tensor MMDPPolicy::step_impl(diff::Tape& tape, StepState& st, int prev) {
  auto& ps = static_cast<PrefixState&>(st);
  if (st.depth > 0) ps.prefix.push_back(prev);
  diff::Tensor input =
      diff::Tensor::constant(encode_input(ps.state_input.values(), ps.prefix));
  return net_.forward(tape, input);
}

namespace {
int checked_positive(int v, const char* what) {
  if (v < 1) throw std::invalid_argument(std::string(what) + " must be >= 1");
  return v;
}
}  // namespace

LSTMPolicy::LSTMPolicy(ActionSpace space, int state_dim, int hidden, std::uint64_t seed)
    : LSTMPolicy(space, state_dim, checked_positive(hidden, "lstm hidden size"),
                 util::make_rng(seed, 0xa7)) {}

LSTMPolicy::LSTMPolicy(ActionSpace space, int state_dim, int hidden, std::mt19937_64 rng)
    : PolicyModel(space, state_dim),
      hidden_(hidden),
      w_input_(make_weight("lstm.w_input", 4 * hidden, state_dim + space.arity, rng)),
      w_hidden_(make_weight("lstm.w_hidden", 4 * hidden, hidden, rng)),
      bias_gates_(make_bias("lstm.b_gates", 4 * hidden)),
      w_out_(make_weight("lstm.w_out", space.arity, hidden, rng)),
      b_out_(make_bias("lstm.b_out", space.arity)),
      start_embedding_("lstm.start",
                       diff::Values(static_cast<std::size_t>(space.arity), 0.0),
                       {space.arity}) {}

std::vector<diff::Parameter*> LSTMPolicy::parameters() {
  return {&w_input_, &w_hidden_, &bias_gates_, &w_out_, &b_out_, &start_embedding_};
}

std::unique_ptr<StepState> LSTMPolicy::begin_impl(diff::Tape&, std::span<const double> state) {
  auto st = std::make_unique<RecurrentState>();
  st->state_input = diff::Tensor::constant({state.begin(), state.end()});
  st->h = diff::Tensor::zeros({hidden_});
  st->c = diff::Tensor::zeros({hidden_});
  return st;
}

diff::Tensor LSTMPolicy::step_impl(diff::Tape& tape, StepState& st, int prev) {
  auto& rs = static_cast<RecurrentState&>(st);
  const int k = action_space().arity;

  diff::Tensor prev_input;
  if (st.depth == 0) {
    prev_input = start_embedding_.use(tape);
  } else {
    diff::Values one_hot(static_cast<std::size_t>(k), 0.0);
    one_hot[static_cast<std::size_t>(prev)] = 1.0;
    prev_input = diff::Tensor::constant(std::move(one_hot));
  }
  diff::Tensor x = state_dim() > 0 ? ops::concat(rs.state_input, prev_input) : prev_input;

  diff::Tensor gates = ops::add(ops::linear(x, w_input_.use(tape), bias_gates_.use(tape)),
                                ops::linear(rs.h, w_hidden_.use(tape),
                                            diff::Tensor::zeros({4 * hidden_})));
  // Packed gate layout: input, forget, cell candidate, output.
  diff::Tensor gate_i = ops::sigmoid(ops::slice(gates, 0, hidden_));
  diff::Tensor gate_f = ops::sigmoid(ops::slice(gates, hidden_, hidden_));
  diff::Tensor gate_g = ops::tanh(ops::slice(gates, 2 * hidden_, hidden_));
  diff::Tensor gate_o = ops::sigmoid(ops::slice(gates, 3 * hidden_, hidden_));

  rs.c = ops::add(ops::mul(gate_f, rs.c), ops::mul(gate_i, gate_g));
  rs.h = ops::mul(gate_o, ops::tanh(rs.c));
  return ops::linear(rs.h, w_out_.use(tape), b_out_.use(tape));
}

std::unique_ptr<PolicyModel> make_policy(const std::string& kind, ActionSpace space,
                                         int state_dim, int hidden, int layers,
                                         std::uint64_t seed) {
  if (kind == "is") return std::make_unique<ISPolicy>(space, state_dim, hidden, layers, seed);
  if (kind == "mmdp")
    return std::make_unique<MMDPPolicy>(space, state_dim, hidden, layers, seed);
  if (kind == "lstm") return std::make_unique<LSTMPolicy>(space, state_dim, hidden, seed);
  throw std::invalid_argument("unknown model kind: " + kind);
}

}  // namespace entropg::policy
