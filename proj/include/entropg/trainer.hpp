#ifndef ENTROPG_TRAINER_HPP
#define ENTROPG_TRAINER_HPP

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "entropg/envs.hpp"
#include "entropg/estimators.hpp"
#include "entropg/models.hpp"
#include "entropg/policy.hpp"

namespace entropg::train {

struct StepRecord {
  std::vector<double> state;
  policy::SampleTrace trace;
  double reward = 0.0;
  double ret = 0.0;  // discounted return from this step
};

struct Trajectory {
  std::vector<StepRecord> steps;
  double reset_reward = 0.0;

  double total_raw_reward() const;
  double total_discounted_reward(double gamma) const;  // discounted from episode start
};

/// R_t = r_t + gamma * R_{t+1}, with R for the last step equal to its reward.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);
void fill_returns(Trajectory& traj, double gamma);

/// Gradient-descent optimizers over Parameter::grad(). State is allocated
/// per parameter on first sight and updates are deterministic functions of
/// the gradients seen so far.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<diff::Parameter* const> params) = 0;
  virtual std::string kind() const = 0;
  virtual double learning_rate() const = 0;
  static std::unique_ptr<Optimizer> make(const std::string& kind, double lr,
                                         double momentum = 0.0);
  static std::unique_ptr<Optimizer> make_rmsprop(double lr, double decay, double eps = 1e-10,
                                                 double momentum = 0.0);
  static std::unique_ptr<Optimizer> make_sgd(double lr, double momentum);
};

/// Clamps every gradient entry to [-limit, limit].
void clip_gradients(std::span<diff::Parameter* const> params, double limit);

class Baseline {
 public:
  virtual ~Baseline() = default;
  virtual double value(std::span<const double> state) = 0;
  virtual void observe_episode(const Trajectory& traj) = 0;
};

/// State-value FFN with one hidden layer, trained with one optimizer step
/// per episode on an L1 loss over first-visit (state, return) pairs.
class ValueNetBaseline : public Baseline {
 public:
  ValueNetBaseline(int state_dim, int hidden, double lr, std::uint64_t seed);

  double value(std::span<const double> state) override;
  void observe_episode(const Trajectory& traj) override;

  using Batch = std::vector<std::pair<std::vector<double>, double>>;
  static Batch first_visit_pairs(const Trajectory& traj);

  /// One L1 training step; returns the batch L1 before the step.
  double train_batch(const Batch& batch);

 private:
  policy::Ffn net_;
  std::vector<diff::Parameter*> params_;
  std::unique_ptr<Optimizer> opt_;
};

/// Truncated average of the raw rewards of the most recent `window`
/// episodes: the top `trim` fraction is dropped before averaging so rare
/// upside outliers do not drag the baseline above the steady reward.
class MovingAverageBaseline : public Baseline {
 public:
  explicit MovingAverageBaseline(int window = 100, double trim = 0.1);
  double value(std::span<const double> state) override;
  void observe_episode(const Trajectory& traj) override;

 private:
  int window_;
  double trim_;
  std::deque<double> recent_;
  double mean_ = 0.0;
};

class ZeroBaseline : public Baseline {
 public:
  double value(std::span<const double>) override { return 0.0; }
  void observe_episode(const Trajectory&) override {}
};

struct EstimatorSpec {
  entropy::EstimatorKind kind = entropy::EstimatorKind::none;
  int beam = 1;
  std::size_t exact_cap = 1000000;
};

struct TrainConfig {
  // [model]
  std::string model_kind = "lstm";
  int hidden = 32;
  int layers = 1;
  // [estimator]
  EstimatorSpec estimator;
  // [env]
  std::string env_kind = "bandit";
  envs::HuntersConfig hunters;
  envs::BanditConfig bandit;
  double discount = 1.0;
  // [train]
  long long episodes = 1000;
  double beta = 0.0;
  double lr = 1e-3;
  std::string optimizer = "rmsprop";
  double momentum = 0.0;
  std::string baseline = "auto";  // value_net | moving_average | none | auto
  double baseline_lr = 1e-3;
  int baseline_hidden = 64;
  int baseline_window = 100;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  bool timing = false;
  int eval_episodes = 1000;
  bool eval_greedy = false;
  int tail_window = 500;

  void validate() const;
  std::string resolved_baseline() const;
  std::unique_ptr<envs::Env> make_env() const;
  std::unique_ptr<policy::PolicyModel> make_model(const envs::Env& env) const;
};

struct EpisodeRow {
  long long episode = 0;
  int length = 0;
  double reward_raw = 0.0;
  double reward_discounted = 0.0;
  double entropy_mean = 0.0;
  long long wallclock_ms = 0;
};

struct PgStepResult {
  bool applied = false;    // false when the gradient went non-finite
  double entropy_mean = 0.0;
};

/// One REINFORCE-with-baseline update from a completed episode: builds
/// sum_t [log p(a_t|s_t) * (R_t - b(s_t)) + beta * E_t] on the episode tape
/// and backwards through it. The learning-rate-scaled update is clipped
/// elementwise to [-grad_clip, grad_clip] before the optimizer applies it
/// (so rare huge advantages are bounded without flattening their ratio to
/// ordinary rounds), then one optimizer step runs. The advantage is
/// detached; with beta == 0 or kind none the entropy term is never built.
PgStepResult policy_gradient_step(policy::PolicyModel& model, const Trajectory& traj,
                                  Baseline& baseline, const EstimatorSpec& estimator,
                                  double beta, Optimizer& opt, double grad_clip);

struct TrainResult {
  std::vector<EpisodeRow> curve;
  long long discarded_episodes = 0;
  double tail_mean_reward = 0.0;        // over the last tail_window episodes
  double tail_optimal_config_pct = 0.0;  // bandit only
  std::unique_ptr<policy::PolicyModel> model;
};

/// Seeded, single-threaded training run. `log` (when given) receives sparse
/// progress lines; the returned curve is the full per-episode record.
TrainResult train(const TrainConfig& cfg, std::ostream* log = nullptr);

struct EvalReport {
  int episodes = 0;
  double mean_length = 0.0, std_length = 0.0;
  double mean_reward = 0.0, std_reward = 0.0;
  double mean_discounted = 0.0, std_discounted = 0.0;
  double optimal_config_pct = 0.0;  // bandit only
  std::vector<double> lengths;
};

/// Rolls evaluation episodes with the stochastic policy (or greedy decoding
/// when `greedy`), using a fixed evaluation seed.
EvalReport evaluate(policy::PolicyModel& model, envs::Env& env, int episodes, double gamma,
                    std::uint64_t seed, bool greedy);

}  // namespace entropg::train

#endif
