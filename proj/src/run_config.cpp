#include "entropg/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace entropg::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected on/off, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct KeySpec {
  const char* section;
  const char* key;
  const char* default_text;
  const char* description;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"model", "kind", "lstm", "policy parameterization: is | mmdp | lstm",
       [](RunConfig& c, const std::string& v) { c.base.model_kind = v; }},
      {"model", "hidden", "32", "hidden width (LSTM state size / FFN layer width)",
       [](RunConfig& c, const std::string& v) { c.base.hidden = static_cast<int>(parse_int(v)); }},
      {"model", "layers", "1", "hidden layer count for is and mmdp models",
       [](RunConfig& c, const std::string& v) { c.base.layers = static_cast<int>(parse_int(v)); }},

      {"estimator", "kind", "none",
       "entropy bonus: none | crude | smoothed | smoothed_mode | unbiased_gradient | exact",
       [](RunConfig& c, const std::string& v) {
         c.base.estimator.kind = entropy::estimator_kind_from_string(v);
       }},
      {"estimator", "beam", "1", "beam size for the smoothed_mode estimator",
       [](RunConfig& c, const std::string& v) { c.base.estimator.beam = static_cast<int>(parse_int(v)); }},
      {"estimator", "exact_cap", "1000000",
       "largest k^d the exact estimator will enumerate",
       [](RunConfig& c, const std::string& v) {
         c.base.estimator.exact_cap = static_cast<std::size_t>(parse_int(v));
       }},

      {"env", "kind", "(required)", "environment: hunters | bandit",
       [](RunConfig& c, const std::string& v) { c.base.env_kind = v; }},
      {"env", "discount", "1.0", "return discount factor gamma",
       [](RunConfig& c, const std::string& v) { c.base.discount = parse_real(v); }},
      {"env", "grid_size", "5", "hunters: grid side length",
       [](RunConfig& c, const std::string& v) { c.base.hunters.grid_size = static_cast<int>(parse_int(v)); }},
      {"env", "num_hunters", "2", "hunters: hunter count (one action dimension each)",
       [](RunConfig& c, const std::string& v) { c.base.hunters.num_hunters = static_cast<int>(parse_int(v)); }},
      {"env", "num_rabbits", "2", "hunters: rabbit count",
       [](RunConfig& c, const std::string& v) { c.base.hunters.num_rabbits = static_cast<int>(parse_int(v)); }},
      {"env", "max_steps", "10000", "hunters: episode step cap",
       [](RunConfig& c, const std::string& v) { c.base.hunters.max_steps = static_cast<int>(parse_int(v)); }},
      {"env", "agents", "4", "bandit: agent count",
       [](RunConfig& c, const std::string& v) { c.base.bandit.agents = static_cast<int>(parse_int(v)); }},
      {"env", "arms", "10", "bandit: arm count",
       [](RunConfig& c, const std::string& v) { c.base.bandit.arms = static_cast<int>(parse_int(v)); }},
      {"env", "arm_rewards", "1..K", "bandit: comma list of per-arm rewards",
       [](RunConfig& c, const std::string& v) {
         c.base.bandit.arm_rewards.clear();
         for (const auto& item : split_commas(v)) c.base.bandit.arm_rewards.push_back(parse_real(item));
       }},
      {"env", "bonus_amount", "166", "bandit: bonus added on the bonus configuration",
       [](RunConfig& c, const std::string& v) { c.base.bandit.bonus_amount = parse_real(v); }},
      {"env", "bonus_prob", "0.01", "bandit: probability the bonus fires",
       [](RunConfig& c, const std::string& v) { c.base.bandit.bonus_prob = parse_real(v); }},
      {"env", "bonus_config", "top arms in order",
       "bandit: comma list, arm index per agent",
       [](RunConfig& c, const std::string& v) {
         c.base.bandit.bonus_config.clear();
         for (const auto& item : split_commas(v))
           c.base.bandit.bonus_config.push_back(static_cast<int>(parse_int(item)));
       }},

      {"train", "episodes", "1000", "training episodes per seed",
       [](RunConfig& c, const std::string& v) { c.base.episodes = parse_int(v); }},
      {"train", "beta", "0.0", "entropy weight",
       [](RunConfig& c, const std::string& v) { c.base.beta = parse_real(v); }},
      {"train", "lr", "0.001", "policy learning rate",
       [](RunConfig& c, const std::string& v) { c.base.lr = parse_real(v); }},
      {"train", "optimizer", "rmsprop", "sgd | rmsprop | adam",
       [](RunConfig& c, const std::string& v) { c.base.optimizer = v; }},
      {"train", "momentum", "0.0", "momentum for sgd and rmsprop",
       [](RunConfig& c, const std::string& v) { c.base.momentum = parse_real(v); }},
      {"train", "baseline", "auto",
       "auto | value_net | moving_average | none (auto: value_net for hunters, moving_average for bandit)",
       [](RunConfig& c, const std::string& v) { c.base.baseline = v; }},
      {"train", "baseline_lr", "0.001", "value-net baseline learning rate",
       [](RunConfig& c, const std::string& v) { c.base.baseline_lr = parse_real(v); }},
      {"train", "baseline_hidden", "64", "value-net baseline hidden width",
       [](RunConfig& c, const std::string& v) { c.base.baseline_hidden = static_cast<int>(parse_int(v)); }},
      {"train", "baseline_window", "100", "moving-average baseline window",
       [](RunConfig& c, const std::string& v) { c.base.baseline_window = static_cast<int>(parse_int(v)); }},
      {"train", "grad_clip", "1.0", "per-parameter gradient clip bound",
       [](RunConfig& c, const std::string& v) { c.base.grad_clip = parse_real(v); }},
      {"train", "seeds", "0", "seed list: a..b or comma list",
       [](RunConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); }},
      {"train", "timing", "off",
       "write measured wallclock_ms (off keeps curves byte-identical across runs)",
       [](RunConfig& c, const std::string& v) { c.base.timing = parse_bool(v); }},
      {"train", "eval_episodes", "1000", "episodes for post-training evaluation",
       [](RunConfig& c, const std::string& v) { c.base.eval_episodes = static_cast<int>(parse_int(v)); }},
      {"train", "eval_greedy", "off", "evaluate with greedy decoding instead of sampling",
       [](RunConfig& c, const std::string& v) { c.base.eval_greedy = parse_bool(v); }},
      {"train", "tail_window", "500", "episodes in the tail summary window",
       [](RunConfig& c, const std::string& v) { c.base.tail_window = static_cast<int>(parse_int(v)); }},

      {"output", "dir", "runs/out", "output directory (ENTROPY_PG_OUT overrides)",
       [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
  };
  return keys;
}

const KeySpec* find_key(const std::string& section, const std::string& key) {
  for (const auto& spec : schema())
    if (section == spec.section && key == spec.key) return &spec;
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& spec : schema())
    if (section == spec.section) return true;
  return false;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const long long lo = parse_int(trim(text.substr(0, dots)));
    const long long hi = parse_int(trim(text.substr(dots + 2)));
    if (lo > hi) throw ConfigError("seed range " + text + " is empty");
    for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    for (const auto& item : split_commas(text))
      seeds.push_back(static_cast<std::uint64_t>(parse_int(item)));
  }
  if (seeds.empty()) throw ConfigError("seed list '" + text + "' is empty");
  return seeds;
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  bool saw_env = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section))
        throw ConfigError(where + ": unknown section [" + section + "]");
      if (section == "env") saw_env = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeySpec* spec = find_key(section, key);
    if (!spec)
      throw ConfigError(where + ": unknown key '" + key + "' in section [" + section + "]");
    try {
      spec->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (!saw_env) throw ConfigError(origin + ": missing required [env] section");
  return cfg;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str(), path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  const std::string path = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override key '" + path + "' must be section.key");
  const std::string section = path.substr(0, dot);
  const std::string key = path.substr(dot + 1);
  const KeySpec* spec = find_key(section, key);
  if (!spec) throw ConfigError("unknown override key '" + path + "'");
  spec->set(cfg, value);
}

std::string config_reference() {
  std::ostringstream out;
  std::string section;
  for (const auto& spec : schema()) {
    if (section != spec.section) {
      section = spec.section;
      out << "[" << section << "]\n";
    }
    out << "  " << spec.key << " = " << spec.default_text << "\n      " << spec.description
        << "\n";
  }
  return out.str();
}

}  // namespace entropg::cli
