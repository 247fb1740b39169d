#ifndef ENTROPG_ENVS_HPP
#define ENTROPG_ENVS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "entropg/policy.hpp"

namespace entropg::envs {

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment: deterministic given the reset rng state and the
/// action sequence. Stepping a finished episode is rejected.
class Env {
 public:
  virtual ~Env() = default;
  virtual std::vector<double> reset(std::mt19937_64& rng) = 0;
  virtual StepResult step(const policy::Action& action) = 0;
  virtual const policy::ActionSpace& action_space() const = 0;
  virtual int state_dim() const = 0;
  virtual bool done() const = 0;
  virtual std::string kind() const = 0;

  /// Reward earned during reset itself (placement captures); 0 for most envs.
  virtual double reset_reward() const { return 0.0; }

  /// Per-episode diagnostics folded into run summaries.
  virtual std::map<std::string, double> episode_info() const { return {}; }
};

struct GridPos {
  int row = 0;
  int col = 0;
  bool operator==(const GridPos&) const = default;
};

struct HuntersConfig {
  int grid_size = 5;
  int num_hunters = 2;
  int num_rabbits = 2;
  int max_steps = 10000;

  void validate() const;
};

/// n x n grid with fixed rabbits and hunters that move one king-step per
/// turn (9 actions each, index 4 = stay). A hunter entering a square with an
/// active rabbit captures it: both become inactive and the step reward rises
/// by one. Episodes end when every rabbit is captured or after max_steps.
class HuntersEnv : public Env {
 public:
  explicit HuntersEnv(HuntersConfig cfg);

  std::vector<double> reset(std::mt19937_64& rng) override;
  StepResult step(const policy::Action& action) override;
  const policy::ActionSpace& action_space() const override { return space_; }
  int state_dim() const override;
  bool done() const override { return done_; }
  std::string kind() const override { return "hunters"; }
  double reset_reward() const override { return reset_reward_; }
  std::map<std::string, double> episode_info() const override;

  /// (flag, row/(n-1), col/(n-1)) per hunter, then per rabbit.
  std::vector<double> encode_state() const;

  const std::vector<GridPos>& hunter_positions() const { return hunters_; }
  const std::vector<GridPos>& rabbit_positions() const { return rabbits_; }
  const std::vector<bool>& hunters_active() const { return hunter_active_; }
  const std::vector<bool>& rabbits_active() const { return rabbit_active_; }
  int steps_taken() const { return steps_; }
  int captures() const { return captures_; }

  /// Fixed placement, for capture-rule tests.
  std::vector<double> reset_with_positions(std::vector<GridPos> hunters,
                                           std::vector<GridPos> rabbits);

 private:
  void resolve_captures();

  HuntersConfig cfg_;
  policy::ActionSpace space_;
  std::vector<GridPos> hunters_, rabbits_;
  std::vector<bool> hunter_active_, rabbit_active_;
  int steps_ = 0;
  int captures_ = 0;
  double reset_reward_ = 0.0;
  bool done_ = true;
};

struct BanditConfig {
  int agents = 4;
  int arms = 10;
  std::vector<double> arm_rewards;  // defaults to 1..arms
  double bonus_amount = 166.0;
  double bonus_prob = 0.01;
  policy::Action bonus_config;  // defaults to agent i -> arm (arms-agents+i)

  void validate() const;
  std::vector<double> effective_arm_rewards() const;
  policy::Action effective_bonus_config() const;
};

/// One-round episodes: every agent picks an arm, duplicate picks collapse,
/// and the reward is the sum over distinct chosen arms. Hitting the bonus
/// agents-to-arms configuration exactly adds the bonus with probability
/// bonus_prob.
class BanditEnv : public Env {
 public:
  explicit BanditEnv(BanditConfig cfg);

  std::vector<double> reset(std::mt19937_64& rng) override;
  StepResult step(const policy::Action& action) override;
  const policy::ActionSpace& action_space() const override { return space_; }
  int state_dim() const override { return 1; }
  bool done() const override { return done_; }
  std::string kind() const override { return "bandit"; }
  std::map<std::string, double> episode_info() const override;

  const policy::Action& bonus_config() const { return bonus_config_; }
  double max_expected_reward() const;

 private:
  BanditConfig cfg_;
  policy::ActionSpace space_;
  std::vector<double> rewards_;
  policy::Action bonus_config_;
  std::mt19937_64 bonus_rng_;
  bool done_ = true;
  bool last_was_bonus_config_ = false;
};

}  // namespace entropg::envs

#endif
