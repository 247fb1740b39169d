#include "entropg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include "entropg/util.hpp"

namespace entropg::train {

namespace ops = diff::ops;
using diff::Tensor;

double Trajectory::total_raw_reward() const {
  double total = reset_reward;
  for (const auto& s : steps) total += s.reward;
  return total;
}

double Trajectory::total_discounted_reward(double gamma) const {
  double total = reset_reward;  // earned before any step, discount 1
  double factor = 1.0;
  for (const auto& s : steps) {
    total += factor * s.reward;
    factor *= gamma;
  }
  return total;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw std::invalid_argument("compute_returns on empty trajectory");
  std::vector<double> returns(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

void fill_returns(Trajectory& traj, double gamma) {
  if (traj.steps.empty()) return;
  std::vector<double> rewards;
  rewards.reserve(traj.steps.size());
  for (const auto& s : traj.steps) rewards.push_back(s.reward);
  const auto returns = compute_returns(rewards, gamma);
  for (std::size_t i = 0; i < traj.steps.size(); ++i) traj.steps[i].ret = returns[i];
}

namespace {

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr, double momentum = 0.0) : lr_(lr), momentum_(momentum) {}
  std::string kind() const override { return "sgd"; }
  double learning_rate() const override { return lr_; }
  void step(std::span<diff::Parameter* const> params) override {
    for (auto* p : params) {
      auto& v = p->values();
      const auto& g = p->grad();
      if (momentum_ > 0.0) {
        auto& buf = state_[p];
        if (buf.empty()) buf.assign(p->size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
          buf[i] = momentum_ * buf[i] + g[i];
          v[i] -= lr_ * buf[i];
        }
      } else {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
      }
    }
  }

 private:
  double lr_, momentum_;
  std::unordered_map<diff::Parameter*, diff::Values> state_;
};

// Mean-square accumulators start at one, so early steps are
// gradient-proportional (~lr*g) instead of normalised to full lr steps; the
// step rule only approaches g/rms(g) once the accumulator has adapted.
class RmsProp : public Optimizer {
 public:
  explicit RmsProp(double lr, double decay = 0.9, double eps = 1e-10, double momentum = 0.0)
      : lr_(lr), decay_(decay), eps_(eps), momentum_(momentum) {}
  std::string kind() const override { return "rmsprop"; }
  double learning_rate() const override { return lr_; }
  void step(std::span<diff::Parameter* const> params) override {
    for (auto* p : params) {
      auto& s = state_[p];
      if (s.sq.empty()) {
        s.sq.assign(p->size(), 1.0);
        if (momentum_ > 0.0) s.buf.assign(p->size(), 0.0);
      }
      auto& v = p->values();
      const auto& g = p->grad();
      for (std::size_t i = 0; i < v.size(); ++i) {
        s.sq[i] = decay_ * s.sq[i] + (1.0 - decay_) * g[i] * g[i];
        const double normalised = g[i] / std::sqrt(s.sq[i] + eps_);
        if (momentum_ > 0.0) {
          s.buf[i] = momentum_ * s.buf[i] + normalised;
          v[i] -= lr_ * s.buf[i];
        } else {
          v[i] -= lr_ * normalised;
        }
      }
    }
  }

 private:
  struct State {
    diff::Values sq, buf;
  };
  double lr_, decay_, eps_, momentum_;
  std::unordered_map<diff::Parameter*, State> state_;
};

// Second moments start at one (no bias correction), so warmup steps stay
// gradient-proportional instead of jumping to full-rate sign steps; the slow
// second moment lets a rare large advantage carry its full relative weight
// through the first moment before being absorbed.
class Adam : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  std::string kind() const override { return "adam"; }
  double learning_rate() const override { return lr_; }
  void step(std::span<diff::Parameter* const> params) override {
    for (auto* p : params) {
      auto& s = state_[p];
      if (s.m.empty()) {
        s.m.assign(p->size(), 0.0);
        s.v.assign(p->size(), 1.0);
      }
      auto& v = p->values();
      const auto& g = p->grad();
      for (std::size_t i = 0; i < v.size(); ++i) {
        s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
        s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
        v[i] -= lr_ * s.m[i] / (std::sqrt(s.v[i]) + eps_);
      }
    }
  }

 private:
  struct Moments {
    diff::Values m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::unordered_map<diff::Parameter*, Moments> state_;
};

}  // namespace

std::unique_ptr<Optimizer> Optimizer::make(const std::string& kind, double lr,
                                           double momentum) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("momentum must lie in [0, 1)");
  if (kind == "sgd") return std::make_unique<Sgd>(lr, momentum);
  if (kind == "rmsprop") return std::make_unique<RmsProp>(lr, 0.9, 1e-10, momentum);
  if (kind == "adam") return std::make_unique<Adam>(lr);
  throw std::invalid_argument("unknown optimizer: " + kind);
}

std::unique_ptr<Optimizer> Optimizer::make_rmsprop(double lr, double decay, double eps,
                                                   double momentum) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  return std::make_unique<RmsProp>(lr, decay, eps, momentum);
}

std::unique_ptr<Optimizer> Optimizer::make_sgd(double lr, double momentum) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  return std::make_unique<Sgd>(lr, momentum);
}

void clip_gradients(std::span<diff::Parameter* const> params, double limit) {
  for (auto* p : params)
    for (double& g : p->grad()) g = std::clamp(g, -limit, limit);
}

ValueNetBaseline::ValueNetBaseline(int state_dim, int hidden, double lr, std::uint64_t seed) {
  auto rng = util::make_rng(seed, 0xba5e);
  net_ = policy::Ffn("baseline", state_dim, {hidden}, 1, rng);
  params_ = net_.parameters();
  opt_ = Optimizer::make("rmsprop", lr);
}

double ValueNetBaseline::value(std::span<const double> state) {
  diff::Tape tape;
  Tensor out = net_.forward(tape, Tensor::constant({state.begin(), state.end()}));
  return out.value();
}

ValueNetBaseline::Batch ValueNetBaseline::first_visit_pairs(const Trajectory& traj) {
  Batch batch;
  std::set<std::vector<double>> seen;
  for (const auto& s : traj.steps)
    if (seen.insert(s.state).second) batch.emplace_back(s.state, s.ret);
  return batch;
}

double ValueNetBaseline::train_batch(const Batch& batch) {
  if (batch.empty()) return 0.0;
  for (auto* p : params_) p->zero_grad();
  diff::Tape tape;
  Tensor loss;
  for (const auto& [state, target] : batch) {
    Tensor pred = net_.forward(tape, Tensor::constant({state.begin(), state.end()}));
    Tensor err = ops::sub(pred, Tensor::scalar(target));
    // |err| via sign(err) * err with the sign detached
    Tensor abs_err = ops::scale(err, err.value() >= 0.0 ? 1.0 : -1.0);
    loss = loss.defined() ? ops::add(loss, abs_err) : abs_err;
  }
  loss = ops::scale(loss, 1.0 / static_cast<double>(batch.size()));
  const double before = loss.value();
  tape.backward(loss);
  opt_->step(params_);
  for (auto* p : params_) p->zero_grad();
  return before;
}

void ValueNetBaseline::observe_episode(const Trajectory& traj) {
  train_batch(first_visit_pairs(traj));
}

MovingAverageBaseline::MovingAverageBaseline(int window, double trim)
    : window_(window), trim_(trim) {
  if (window < 1) throw std::invalid_argument("baseline window must be >= 1");
  if (trim < 0.0 || trim >= 1.0) throw std::invalid_argument("trim must lie in [0, 1)");
}

double MovingAverageBaseline::value(std::span<const double>) { return mean_; }

void MovingAverageBaseline::observe_episode(const Trajectory& traj) {
  recent_.push_back(traj.total_raw_reward());
  if (static_cast<int>(recent_.size()) > window_) recent_.pop_front();

  std::vector<double> sorted(recent_.begin(), recent_.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t keep =
      sorted.size() - static_cast<std::size_t>(trim_ * static_cast<double>(sorted.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += sorted[i];
  mean_ = sum / static_cast<double>(keep);
}

void TrainConfig::validate() const {
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  if (!(discount > 0.0 && discount <= 1.0))
    throw std::invalid_argument("discount must lie in (0, 1]");
  if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  if (estimator.beam < 1) throw std::invalid_argument("beam must be >= 1");
  if (hidden < 1 || layers < 1)
    throw std::invalid_argument("hidden and layers must be >= 1");
  if (env_kind != "hunters" && env_kind != "bandit")
    throw std::invalid_argument("unknown env kind: " + env_kind);
  if (model_kind != "is" && model_kind != "mmdp" && model_kind != "lstm")
    throw std::invalid_argument("unknown model kind: " + model_kind);
  const std::string b = resolved_baseline();
  if (b != "value_net" && b != "moving_average" && b != "none")
    throw std::invalid_argument("unknown baseline kind: " + baseline);
  Optimizer::make(optimizer, lr, momentum);  // validates name and momentum
  if (env_kind == "hunters") hunters.validate();
  if (env_kind == "bandit") bandit.validate();
  if (estimator.kind == entropy::EstimatorKind::exact) {
    const policy::ActionSpace space = env_kind == "hunters"
                                          ? policy::ActionSpace(hunters.num_hunters, 9)
                                          : policy::ActionSpace(bandit.agents, bandit.arms);
    if (space.total_actions() > estimator.exact_cap)
      throw std::invalid_argument(
          "exact estimator needs " + std::to_string(space.total_actions()) +
          " enumerated actions, above the cap of " + std::to_string(estimator.exact_cap));
  }
}

std::string TrainConfig::resolved_baseline() const {
  if (baseline != "auto") return baseline;
  return env_kind == "bandit" ? "moving_average" : "value_net";
}

std::unique_ptr<envs::Env> TrainConfig::make_env() const {
  if (env_kind == "hunters") return std::make_unique<envs::HuntersEnv>(hunters);
  if (env_kind == "bandit") return std::make_unique<envs::BanditEnv>(bandit);
  throw std::invalid_argument("unknown env kind: " + env_kind);
}

std::unique_ptr<policy::PolicyModel> TrainConfig::make_model(const envs::Env& env) const {
  return policy::make_policy(model_kind, env.action_space(), env.state_dim(), hidden,
                             layers, seed);
}

namespace {

std::unique_ptr<Baseline> make_baseline(const TrainConfig& cfg, int state_dim) {
  const std::string kind = cfg.resolved_baseline();
  if (kind == "value_net")
    return std::make_unique<ValueNetBaseline>(state_dim, cfg.baseline_hidden,
                                              cfg.baseline_lr, cfg.seed);
  if (kind == "moving_average")
    return std::make_unique<MovingAverageBaseline>(cfg.baseline_window);
  return std::make_unique<ZeroBaseline>();
}

bool grads_finite(std::span<diff::Parameter* const> params) {
  for (auto* p : params)
    for (double g : p->grad())
      if (!std::isfinite(g)) return false;
  return true;
}

}  // namespace

PgStepResult policy_gradient_step(policy::PolicyModel& model, const Trajectory& traj,
                                  Baseline& baseline, const EstimatorSpec& estimator,
                                  double beta, Optimizer& opt, double grad_clip) {
  if (traj.steps.empty()) throw std::invalid_argument("policy gradient step on empty episode");

  diff::Tape* tape = traj.steps.front().trace.log_prob_terms.front().tape();
  if (!tape) throw std::invalid_argument("trajectory traces are not on a tape");

  const bool with_entropy =
      beta > 0.0 && estimator.kind != entropy::EstimatorKind::none;

  Tensor objective;
  double entropy_sum = 0.0;
  for (const auto& step : traj.steps) {
    const double advantage = step.ret - baseline.value(step.state);
    Tensor log_p = policy::trace_log_prob(step.trace);
    Tensor term = ops::scale(log_p, advantage);

    double entropy_value = 0.0;
    if (with_entropy) {
      entropy::EntropyEstimate est;
      switch (estimator.kind) {
        case entropy::EstimatorKind::crude:
          est = entropy::crude_entropy(step.trace);
          break;
        case entropy::EstimatorKind::smoothed:
          est = entropy::smoothed_entropy(step.trace);
          break;
        case entropy::EstimatorKind::smoothed_mode:
          est = entropy::smoothed_mode_entropy(model, *tape, step.state, estimator.beam);
          break;
        case entropy::EstimatorKind::unbiased_gradient:
          est = entropy::unbiased_entropy_gradient_estimate(step.trace);
          break;
        case entropy::EstimatorKind::exact:
          est = {entropy::exact_entropy(model, *tape, step.state, estimator.exact_cap),
                 entropy::EstimatorKind::exact,
                 {}};
          break;
        case entropy::EstimatorKind::none:
          break;
      }
      term = ops::add(term, ops::scale(est.value, beta));
      entropy_value = est.entropy_value();
    } else {
      // Reporting only: no nodes are added to the tape.
      entropy_value = estimator.kind == entropy::EstimatorKind::crude
                          ? entropy::crude_entropy_value(step.trace)
                          : entropy::smoothed_entropy_value(step.trace);
    }
    entropy_sum += entropy_value;
    objective = objective.defined() ? ops::add(objective, term) : term;
  }

  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  tape->backward(ops::scale(objective, -1.0));  // descend on the negated objective

  PgStepResult result;
  result.entropy_mean = entropy_sum / static_cast<double>(traj.steps.size());
  if (!grads_finite(params)) {
    for (auto* p : params) p->zero_grad();
    return result;  // applied stays false; the caller counts the discard
  }
  // the clip bound applies to the learning-rate-scaled update, so it
  // protects against outliers without flattening advantage ratios
  clip_gradients(params, grad_clip / opt.learning_rate());
  opt.step(params);
  for (auto* p : params) p->zero_grad();
  result.applied = true;
  return result;
}

TrainResult train(const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();

  auto env = cfg.make_env();
  auto model = cfg.make_model(*env);
  auto baseline = make_baseline(cfg, env->state_dim());
  auto opt = Optimizer::make(cfg.optimizer, cfg.lr, cfg.momentum);

  auto env_rng = util::make_rng(cfg.seed, 0xe4);
  auto policy_rng = util::make_rng(cfg.seed, 0x9c);

  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(cfg.episodes));

  double tail_reward = 0.0;
  double tail_optimal = 0.0;
  long long tail_count = 0;

  for (long long episode = 0; episode < cfg.episodes; ++episode) {
    const auto started = std::chrono::steady_clock::now();

    diff::Tape tape;
    Trajectory traj;
    std::vector<double> state = env->reset(env_rng);
    traj.reset_reward = env->reset_reward();
    while (!env->done()) {
      policy::SampleTrace trace = policy::sample(*model, tape, state, policy_rng);
      envs::StepResult res = env->step(trace.action);
      traj.steps.push_back({std::move(state), std::move(trace), res.reward, 0.0});
      state = std::move(res.state);
    }
    fill_returns(traj, cfg.discount);

    EpisodeRow row;
    row.episode = episode;
    row.length = static_cast<int>(traj.steps.size());
    row.reward_raw = traj.total_raw_reward();
    row.reward_discounted = traj.total_discounted_reward(cfg.discount);

    if (!traj.steps.empty()) {
      PgStepResult pg = policy_gradient_step(*model, traj, *baseline, cfg.estimator,
                                             cfg.beta, *opt, cfg.grad_clip);
      row.entropy_mean = pg.entropy_mean;
      if (!pg.applied) ++result.discarded_episodes;
      baseline->observe_episode(traj);
    }

    if (cfg.timing)
      row.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    result.curve.push_back(row);

    if (cfg.episodes - episode <= cfg.tail_window) {
      tail_reward += row.reward_raw;
      const auto info = env->episode_info();
      if (auto it = info.find("optimal_config"); it != info.end()) tail_optimal += it->second;
      ++tail_count;
    }
    if (log && (episode + 1) % std::max<long long>(1, cfg.episodes / 10) == 0)
      *log << "episode " << (episode + 1) << "/" << cfg.episodes
           << " reward=" << row.reward_raw << " len=" << row.length << "\n";
  }

  if (tail_count > 0) {
    result.tail_mean_reward = tail_reward / static_cast<double>(tail_count);
    result.tail_optimal_config_pct = 100.0 * tail_optimal / static_cast<double>(tail_count);
  }
  if (result.discarded_episodes > 0 && log)
    *log << "warning: discarded " << result.discarded_episodes
         << " episodes with non-finite gradients\n";

  result.model = std::move(model);
  return result;
}

EvalReport evaluate(policy::PolicyModel& model, envs::Env& env, int episodes, double gamma,
                    std::uint64_t seed, bool greedy) {
  if (episodes < 1) throw std::invalid_argument("evaluate needs at least one episode");
  if (model.action_space() != env.action_space() || model.state_dim() != env.state_dim())
    throw std::invalid_argument("model and environment shapes do not match");

  auto env_rng = util::make_rng(seed, 0xeba1);
  auto policy_rng = util::make_rng(seed, 0xeba2);

  std::vector<double> lengths, rewards, discounted;
  double optimal = 0.0;
  diff::Tape tape;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> state = env.reset(env_rng);
    double raw = env.reset_reward();
    double disc = env.reset_reward();
    double factor = 1.0;
    int len = 0;
    while (!env.done()) {
      policy::Action action;
      if (greedy) {
        action = policy::greedy_action(model, state);
      } else {
        tape.reset();
        action = policy::sample(model, tape, state, policy_rng).action;
      }
      envs::StepResult res = env.step(action);
      raw += res.reward;
      disc += factor * res.reward;
      factor *= gamma;
      state = std::move(res.state);
      ++len;
    }
    lengths.push_back(static_cast<double>(len));
    rewards.push_back(raw);
    discounted.push_back(disc);
    const auto info = env.episode_info();
    if (auto it = info.find("optimal_config"); it != info.end()) optimal += it->second;
  }

  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::pair{mean, std::sqrt(var)};
  };

  EvalReport report;
  report.episodes = episodes;
  std::tie(report.mean_length, report.std_length) = mean_std(lengths);
  std::tie(report.mean_reward, report.std_reward) = mean_std(rewards);
  std::tie(report.mean_discounted, report.std_discounted) = mean_std(discounted);
  report.optimal_config_pct = 100.0 * optimal / static_cast<double>(episodes);
  report.lengths = std::move(lengths);
  return report;
}

}  // namespace entropg::train
