// entropg: train / evaluate / verify / sweep for autoregressive policies with
// entropy-bonus estimators.
//
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 verification failure.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "entropg/checkpoint.hpp"
#include "entropg/run_config.hpp"
#include "entropg/trainer.hpp"
#include "entropg/util.hpp"
#include "entropg/verify.hpp"

namespace fs = std::filesystem;
using namespace entropg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerification = 4;

std::string curve_csv(const std::vector<train::EpisodeRow>& curve) {
  std::ostringstream out;
  out << "episode,length,reward_raw,reward_discounted,entropy_mean,wallclock_ms\n";
  for (const auto& r : curve)
    out << r.episode << "," << r.length << "," << util::format_double(r.reward_raw) << ","
        << util::format_double(r.reward_discounted) << ","
        << util::format_double(r.entropy_mean) << "," << r.wallclock_ms << "\n";
  return out.str();
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  train::TrainResult result;
  train::EvalReport eval;
};

checkpoint::Meta meta_for(const train::TrainConfig& cfg, const envs::Env& env) {
  checkpoint::Meta meta;
  meta.model_kind = cfg.model_kind;
  meta.dims = env.action_space().dims;
  meta.arity = env.action_space().arity;
  meta.state_dim = env.state_dim();
  meta.hidden = cfg.hidden;
  meta.layers = cfg.layers;
  meta.seed = cfg.seed;
  return meta;
}

/// Trains every seed (optionally in parallel), writes curves, checkpoints and
/// a summary with mean +- std across seeds.
int run_training(cli::RunConfig cfg, int jobs, bool quiet) {
  const fs::path out_dir = cfg.output_dir;
  cfg.base.validate();
  fs::create_directories(out_dir);

  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> numeric_failure{false};
  std::mutex log_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size() || numeric_failure) return;
      train::TrainConfig tc = cfg.base;
      tc.seed = cfg.seeds[i];
      try {
        SeedOutcome& out = outcomes[i];
        out.seed = tc.seed;
        out.result = train::train(tc, quiet ? nullptr : &std::cerr);
        auto env = tc.make_env();
        out.eval = train::evaluate(*out.result.model, *env, tc.eval_episodes, tc.discount,
                                   tc.seed + 1000003, tc.eval_greedy);
        if (!quiet) {
          std::lock_guard lock(log_mutex);
          std::cerr << "seed " << tc.seed << ": tail reward " << out.result.tail_mean_reward
                    << ", eval mean length " << out.eval.mean_length << "\n";
        }
      } catch (const diff::NumericError& e) {
        std::lock_guard lock(log_mutex);
        std::cerr << "numeric failure on seed " << tc.seed << ": " << e.what() << "\n";
        numeric_failure = true;
        return;
      }
    }
  };

  const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(cfg.seeds.size())));
  {
    std::vector<std::thread> pool;
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (numeric_failure) return kExitNumeric;

  // All artifacts are written after the runs complete, in seed order.
  for (auto& out : outcomes) {
    const std::string tag = "seed" + std::to_string(out.seed);
    util::atomic_write_file(out_dir / ("curve_" + tag + ".csv"), curve_csv(out.result.curve));
    train::TrainConfig tc = cfg.base;
    tc.seed = out.seed;
    auto env = tc.make_env();
    checkpoint::save(out_dir / ("checkpoint_" + tag + ".bin"), *out.result.model,
                     meta_for(tc, *env));
  }

  auto mean_std = [](auto pick) {
    return [pick](const std::vector<SeedOutcome>& xs) {
      double mean = 0.0;
      for (const auto& x : xs) mean += pick(x);
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (const auto& x : xs) var += (pick(x) - mean) * (pick(x) - mean);
      return std::pair{mean, std::sqrt(var / static_cast<double>(xs.size()))};
    };
  };

  std::ostringstream summary;
  summary << "seeds = " << cfg.seeds.size() << "\n";
  const auto [mr, sr] = mean_std([](const SeedOutcome& o) { return o.result.tail_mean_reward; })(outcomes);
  summary << "tail_mean_reward = " << mr << " +- " << sr << "\n";
  const auto [mo, so] = mean_std([](const SeedOutcome& o) { return o.result.tail_optimal_config_pct; })(outcomes);
  summary << "tail_optimal_config_pct = " << mo << " +- " << so << "\n";
  const auto [ml, sl] = mean_std([](const SeedOutcome& o) { return o.eval.mean_length; })(outcomes);
  summary << "eval_mean_length = " << ml << " +- " << sl << "\n";
  const auto [mw, sw] = mean_std([](const SeedOutcome& o) { return o.eval.mean_reward; })(outcomes);
  summary << "eval_mean_reward = " << mw << " +- " << sw << "\n";
  const auto [md, sd] = mean_std([](const SeedOutcome& o) { return o.eval.mean_discounted; })(outcomes);
  summary << "eval_mean_discounted_reward = " << md << " +- " << sd << "\n";
  const auto [mc, sc] = mean_std([](const SeedOutcome& o) { return o.eval.optimal_config_pct; })(outcomes);
  summary << "eval_optimal_config_pct = " << mc << " +- " << sc << "\n";
  long long discarded = 0;
  for (const auto& o : outcomes) discarded += o.result.discarded_episodes;
  summary << "discarded_episodes = " << discarded << "\n";
  util::atomic_write_file(out_dir / "summary.txt", summary.str());

  std::cout << summary.str();
  std::cout << "artifacts written to " << out_dir.string() << "\n";
  return kExitOk;
}

int run_verify(const std::string& suite_name, const fs::path& csv_out) {
  verify::SuiteResult suite;
  if (suite_name == "unbiasedness") suite = verify::verify_unbiasedness();
  else if (suite_name == "gradient") suite = verify::verify_gradient();
  else if (suite_name == "theorem2") suite = verify::verify_gaussian_closed_form();
  else if (suite_name == "theorem3") suite = verify::verify_entropy_limits();
  else if (suite_name == "beam") suite = verify::verify_beam();
  else {
    std::cerr << "unknown verify suite: " << suite_name
              << " (expected unbiasedness | gradient | theorem2 | theorem3 | beam)\n";
    return kExitConfig;
  }

  const std::string csv = verify::to_csv(suite);
  std::cout << csv;
  if (!csv_out.empty()) util::atomic_write_file(csv_out, csv);
  if (!suite.pass()) {
    std::cerr << "verification suite '" << suite_name << "' FAILED\n";
    return kExitVerification;
  }
  std::cout << "suite " << suite_name << ": all checks passed\n";
  return kExitOk;
}

int run_evaluate(const fs::path& checkpoint_path, const fs::path& config_path, int episodes,
                 bool greedy, std::uint64_t seed) {
  auto cfg = cli::parse_run_config(config_path);
  cfg.base.validate();
  auto env = cfg.base.make_env();

  const auto meta = checkpoint::peek(checkpoint_path);
  if (meta.dims != env->action_space().dims || meta.arity != env->action_space().arity ||
      meta.state_dim != env->state_dim()) {
    std::cerr << "checkpoint/config shape mismatch: checkpoint is " << meta.model_kind << " d="
              << meta.dims << " k=" << meta.arity << " state_dim=" << meta.state_dim
              << ", env needs d=" << env->action_space().dims
              << " k=" << env->action_space().arity << " state_dim=" << env->state_dim() << "\n";
    return kExitConfig;
  }
  auto model = checkpoint::load(checkpoint_path);

  const int n = episodes > 0 ? episodes : cfg.base.eval_episodes;
  auto report = train::evaluate(*model, *env, n, cfg.base.discount, seed,
                                greedy || cfg.base.eval_greedy);
  std::cout << "episodes = " << report.episodes << "\n"
            << "mean_length = " << report.mean_length << " +- " << report.std_length << "\n"
            << "mean_reward = " << report.mean_reward << " +- " << report.std_reward << "\n"
            << "mean_discounted_reward = " << report.mean_discounted << " +- "
            << report.std_discounted << "\n";
  if (cfg.base.env_kind == "bandit")
    std::cout << "optimal_config_pct = " << report.optimal_config_pct << "\n";
  return kExitOk;
}

int run_sweep(const cli::RunConfig& base_cfg, const std::vector<double>& betas,
              const std::vector<double>& lrs, int jobs, bool quiet) {
  const fs::path root = base_cfg.output_dir;
  const auto beta_list = betas.empty() ? std::vector<double>{base_cfg.base.beta} : betas;
  const auto lr_list = lrs.empty() ? std::vector<double>{base_cfg.base.lr} : lrs;
  for (double beta : beta_list)
    for (double lr : lr_list) {
      cli::RunConfig cfg = base_cfg;
      cfg.base.beta = beta;
      cfg.base.lr = lr;
      std::ostringstream tag;
      tag << "beta" << beta << "_lr" << lr;
      cfg.output_dir = root / tag.str();
      std::cout << "sweep point " << tag.str() << "\n";
      const int rc = run_training(cfg, jobs, quiet);
      if (rc != kExitOk) return rc;
    }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autoregressive policies with entropy-bonus estimators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seeds_text;
  std::string estimator_override;
  long long episodes_override = -1;
  std::string out_override;
  std::vector<std::string> set_overrides;
  int jobs = 1;
  bool quiet = false;
  bool print_reference = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file");
    cmd->add_option("--seeds", seeds_text, "seed list override: a..b or comma list");
    cmd->add_option("--estimator", estimator_override,
                    "estimator kind override (none|crude|smoothed|smoothed_mode|unbiased_gradient|exact)");
    cmd->add_option("--episodes", episodes_override, "episode count override");
    cmd->add_option("--out", out_override, "output directory override");
    cmd->add_option("--set", set_overrides, "generic overrides: section.key=value");
    cmd->add_option("--jobs", jobs, "seed-parallel worker count");
    cmd->add_flag("--quiet", quiet, "suppress progress logging");
  };

  auto* train_cmd = app.add_subcommand("train", "train per seed and write curves/checkpoints");
  add_common(train_cmd);
  train_cmd->add_flag("--print-config-reference", print_reference,
                      "print every config key with its default and exit");

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint under a config");
  std::string checkpoint_path;
  int eval_episodes = 0;
  bool eval_greedy = false;
  std::uint64_t eval_seed = 12345;
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--config", config_path, "run configuration file")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval_cmd->add_flag("--greedy", eval_greedy, "greedy decoding instead of sampling");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");

  auto* verify_cmd = app.add_subcommand("verify", "run an estimator verification suite");
  std::string suite;
  std::string verify_csv;
  verify_cmd->add_option("suite", suite, "unbiasedness | gradient | theorem2 | theorem3 | beam")
      ->required();
  verify_cmd->add_option("--out", verify_csv, "write the CSV report here");

  auto* sweep_cmd = app.add_subcommand("sweep", "cartesian sweep over beta and lr");
  std::vector<double> sweep_betas, sweep_lrs;
  add_common(sweep_cmd);
  sweep_cmd->add_option("--betas", sweep_betas, "entropy weights to sweep")->delimiter(',');
  sweep_cmd->add_option("--lrs", sweep_lrs, "learning rates to sweep")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed() && print_reference) {
      std::cout << cli::config_reference();
      return kExitOk;
    }

    if (verify_cmd->parsed()) return run_verify(suite, verify_csv);

    if (eval_cmd->parsed())
      return run_evaluate(checkpoint_path, config_path, eval_episodes, eval_greedy, eval_seed);

    // train and sweep both need a parsed config with overrides applied
    if (config_path.empty()) {
      std::cerr << "--config is required\n";
      return kExitConfig;
    }
    cli::RunConfig cfg = cli::parse_run_config(config_path);
    if (!seeds_text.empty()) cfg.seeds = cli::parse_seed_list(seeds_text);
    if (!estimator_override.empty())
      cli::apply_override(cfg, "estimator.kind=" + estimator_override);
    if (episodes_override >= 0)
      cli::apply_override(cfg, "train.episodes=" + std::to_string(episodes_override));
    if (!out_override.empty()) cfg.output_dir = out_override;
    for (const auto& assignment : set_overrides) cli::apply_override(cfg, assignment);
    if (const char* env_out = std::getenv("ENTROPY_PG_OUT")) cfg.output_dir = env_out;

    if (train_cmd->parsed()) return run_training(cfg, jobs, quiet);
    if (sweep_cmd->parsed()) return run_sweep(cfg, sweep_betas, sweep_lrs, jobs, quiet);
    return kExitConfig;
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const diff::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
