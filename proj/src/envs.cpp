#include "entropg/envs.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "entropg/util.hpp"

namespace entropg::envs {

using policy::Action;
using policy::ActionSpace;

void HuntersConfig::validate() const {
  if (grid_size < 2) throw std::invalid_argument("hunters: grid_size must be >= 2");
  if (num_hunters < 1) throw std::invalid_argument("hunters: need at least one hunter");
  if (num_rabbits < 1) throw std::invalid_argument("hunters: need at least one rabbit");
  if (max_steps < 1) throw std::invalid_argument("hunters: max_steps must be >= 1");
  const int cells = grid_size * grid_size;
  if (num_hunters > cells || num_rabbits > cells)
    throw std::invalid_argument("hunters: more entities than grid cells");
}

HuntersEnv::HuntersEnv(HuntersConfig cfg)
    : cfg_(cfg), space_(ActionSpace((cfg.validate(), cfg.num_hunters), 9)) {}

int HuntersEnv::state_dim() const { return 3 * (cfg_.num_hunters + cfg_.num_rabbits); }

namespace {

std::vector<GridPos> place_without_replacement(int count, int n, std::mt19937_64& rng) {
  std::set<int> used;
  std::vector<GridPos> out;
  while (static_cast<int>(out.size()) < count) {
    const int cell = static_cast<int>(util::uniform01(rng) * n * n);
    const int clamped = std::min(cell, n * n - 1);
    if (used.insert(clamped).second) out.push_back({clamped / n, clamped % n});
  }
  return out;
}

}  // namespace

std::vector<double> HuntersEnv::reset(std::mt19937_64& rng) {
  return reset_with_positions(place_without_replacement(cfg_.num_hunters, cfg_.grid_size, rng),
                              place_without_replacement(cfg_.num_rabbits, cfg_.grid_size, rng));
}

std::vector<double> HuntersEnv::reset_with_positions(std::vector<GridPos> hunters,
                                                     std::vector<GridPos> rabbits) {
  if (static_cast<int>(hunters.size()) != cfg_.num_hunters ||
      static_cast<int>(rabbits.size()) != cfg_.num_rabbits)
    throw std::invalid_argument("hunters: wrong entity count at reset");
  hunters_ = std::move(hunters);
  rabbits_ = std::move(rabbits);
  hunter_active_.assign(hunters_.size(), true);
  rabbit_active_.assign(rabbits_.size(), true);
  steps_ = 0;
  captures_ = 0;

  // A hunter placed on a rabbit captures it immediately. The reward is
  // reported via reset_reward(): it precedes every action, so it belongs in
  // the episode totals but not in any step's return.
  resolve_captures();
  reset_reward_ = static_cast<double>(captures_);

  done_ = std::none_of(rabbit_active_.begin(), rabbit_active_.end(), [](bool a) { return a; });
  return encode_state();
}

void HuntersEnv::resolve_captures() {
  // Lowest-index hunter wins when several land on the same rabbit.
  for (std::size_t h = 0; h < hunters_.size(); ++h) {
    if (!hunter_active_[h]) continue;
    for (std::size_t r = 0; r < rabbits_.size(); ++r) {
      if (!rabbit_active_[r]) continue;
      if (hunters_[h] == rabbits_[r]) {
        hunter_active_[h] = false;
        rabbit_active_[r] = false;
        ++captures_;
        break;
      }
    }
  }
}

StepResult HuntersEnv::step(const Action& action) {
  if (done_) throw std::logic_error("hunters: step on a finished episode");
  policy::validate_action(space_, action);

  for (std::size_t h = 0; h < hunters_.size(); ++h) {
    if (!hunter_active_[h]) continue;  // component accepted but ignored
    const int a = action[h];
    const int dr = a / 3 - 1;
    const int dc = a % 3 - 1;
    hunters_[h].row = std::clamp(hunters_[h].row + dr, 0, cfg_.grid_size - 1);
    hunters_[h].col = std::clamp(hunters_[h].col + dc, 0, cfg_.grid_size - 1);
  }

  const int before = captures_;
  resolve_captures();
  const double reward = static_cast<double>(captures_ - before);

  ++steps_;
  const bool all_captured =
      std::none_of(rabbit_active_.begin(), rabbit_active_.end(), [](bool a) { return a; });
  done_ = all_captured || steps_ >= cfg_.max_steps;
  return {encode_state(), reward, done_};
}

std::vector<double> HuntersEnv::encode_state() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(state_dim()));
  const double denom = static_cast<double>(cfg_.grid_size - 1);
  auto push = [&](const GridPos& p, bool active) {
    out.push_back(active ? 1.0 : 0.0);
    out.push_back(static_cast<double>(p.row) / denom);
    out.push_back(static_cast<double>(p.col) / denom);
  };
  for (std::size_t h = 0; h < hunters_.size(); ++h) push(hunters_[h], hunter_active_[h]);
  for (std::size_t r = 0; r < rabbits_.size(); ++r) push(rabbits_[r], rabbit_active_[r]);
  return out;
}

std::map<std::string, double> HuntersEnv::episode_info() const {
  return {{"captures", static_cast<double>(captures_)},
          {"steps", static_cast<double>(steps_)}};
}

void BanditConfig::validate() const {
  if (agents < 1) throw std::invalid_argument("bandit: need at least one agent");
  if (arms < 2) throw std::invalid_argument("bandit: need at least two arms");
  if (agents > arms) throw std::invalid_argument("bandit: agents must not exceed arms");
  if (!arm_rewards.empty() && static_cast<int>(arm_rewards.size()) != arms)
    throw std::invalid_argument("bandit: arm_rewards length must equal arms");
  if (bonus_prob < 0.0 || bonus_prob > 1.0)
    throw std::invalid_argument("bandit: bonus_prob must lie in [0, 1]");
  if (!bonus_config.empty()) {
    if (static_cast<int>(bonus_config.size()) != agents)
      throw std::invalid_argument("bandit: bonus_config length must equal agents");
    std::set<int> distinct;
    const auto rewards = effective_arm_rewards();
    std::vector<double> sorted = rewards;
    std::sort(sorted.begin(), sorted.end());
    double best = 0.0;
    for (int i = 0; i < agents; ++i) best += sorted[static_cast<std::size_t>(arms - 1 - i)];
    double got = 0.0;
    for (int c : bonus_config) {
      if (c < 0 || c >= arms) throw std::invalid_argument("bandit: bonus_config arm out of range");
      if (!distinct.insert(c).second)
        throw std::invalid_argument("bandit: bonus_config must use distinct arms");
      got += rewards[static_cast<std::size_t>(c)];
    }
    if (got + 1e-9 < best)
      throw std::invalid_argument("bandit: bonus_config must pull the highest-reward arms");
  }
}

std::vector<double> BanditConfig::effective_arm_rewards() const {
  if (!arm_rewards.empty()) return arm_rewards;
  std::vector<double> out(static_cast<std::size_t>(arms));
  for (int i = 0; i < arms; ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
  return out;
}

policy::Action BanditConfig::effective_bonus_config() const {
  if (!bonus_config.empty()) return bonus_config;
  Action cfg(static_cast<std::size_t>(agents));
  for (int i = 0; i < agents; ++i) cfg[static_cast<std::size_t>(i)] = arms - agents + i;
  return cfg;
}

BanditEnv::BanditEnv(BanditConfig cfg)
    : cfg_(cfg),
      space_(ActionSpace((cfg.validate(), cfg.agents), cfg.arms)),
      rewards_(cfg.effective_arm_rewards()),
      bonus_config_(cfg.effective_bonus_config()) {}

std::vector<double> BanditEnv::reset(std::mt19937_64& rng) {
  bonus_rng_.seed(rng());
  done_ = false;
  last_was_bonus_config_ = false;
  return {1.0};  // constant input; the policy is state-free within a round
}

StepResult BanditEnv::step(const Action& action) {
  if (done_) throw std::logic_error("bandit: step on a finished episode");
  policy::validate_action(space_, action);

  std::set<int> chosen(action.begin(), action.end());
  double reward = 0.0;
  for (int arm : chosen) reward += rewards_[static_cast<std::size_t>(arm)];

  last_was_bonus_config_ = (action == bonus_config_);
  if (last_was_bonus_config_ && util::uniform01(bonus_rng_) < cfg_.bonus_prob)
    reward += cfg_.bonus_amount;

  done_ = true;
  return {{1.0}, reward, true};
}

std::map<std::string, double> BanditEnv::episode_info() const {
  return {{"optimal_config", last_was_bonus_config_ ? 1.0 : 0.0}};
}

double BanditEnv::max_expected_reward() const {
  double base = 0.0;
  for (int arm : bonus_config_) base += rewards_[static_cast<std::size_t>(arm)];
  return base + cfg_.bonus_prob * cfg_.bonus_amount;
}

}  // namespace entropg::envs
