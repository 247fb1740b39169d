#include <filesystem>

#include "doctest.h"
#include "entropg/checkpoint.hpp"
#include "entropg/models.hpp"
#include "entropg/run_config.hpp"
#include "entropg/util.hpp"

using namespace entropg;
using cli::ConfigError;

namespace {

const char* kBanditConfig = R"(# bandit smoke config
[model]
kind = lstm
hidden = 8

[estimator]
kind = smoothed

[env]
kind = bandit
agents = 4
arms = 10
bonus_amount = 166
bonus_prob = 0.01

[train]
episodes = 50
beta = 0.001
lr = 0.002
seeds = 0..2

[output]
dir = runs/test
)";

}  // namespace

TEST_CASE("run config parsing") {
  SUBCASE("happy path") {
    auto cfg = cli::parse_run_config_text(kBanditConfig, "test.cfg");
    CHECK(cfg.base.model_kind == "lstm");
    CHECK(cfg.base.hidden == 8);
    CHECK(cfg.base.estimator.kind == entropy::EstimatorKind::smoothed);
    CHECK(cfg.base.env_kind == "bandit");
    CHECK(cfg.base.episodes == 50);
    CHECK(cfg.base.beta == 0.001);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(cfg.output_dir == std::filesystem::path("runs/test"));
    cfg.base.validate();
  }

  SUBCASE("unknown keys fail hard with the line number") {
    const std::string bad = "[model]\nkind = lstm\nhiden = 8\n[env]\nkind = bandit\n";
    CHECK_THROWS_WITH_AS(cli::parse_run_config_text(bad, "x.cfg"),
                         doctest::Contains("x.cfg:3"), ConfigError);
    CHECK_THROWS_WITH_AS(cli::parse_run_config_text(bad, "x.cfg"),
                         doctest::Contains("hiden"), ConfigError);
  }

  SUBCASE("unknown sections fail hard") {
    CHECK_THROWS_AS(cli::parse_run_config_text("[models]\nkind = lstm\n", "x.cfg"),
                    ConfigError);
  }

  SUBCASE("a missing env section is an error") {
    CHECK_THROWS_WITH_AS(cli::parse_run_config_text("[model]\nkind = lstm\n", "x.cfg"),
                         doctest::Contains("[env]"), ConfigError);
  }

  SUBCASE("values are type checked") {
    CHECK_THROWS_AS(
        cli::parse_run_config_text("[env]\nkind = bandit\n[train]\nepisodes = soon\n", "x.cfg"),
        ConfigError);
  }

  SUBCASE("seed lists") {
    CHECK(cli::parse_seed_list("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(cli::parse_seed_list("7") == std::vector<std::uint64_t>{7});
    CHECK(cli::parse_seed_list("4, 9, 1") == std::vector<std::uint64_t>{4, 9, 1});
    CHECK_THROWS_AS(cli::parse_seed_list("5..2"), ConfigError);
    CHECK_THROWS_AS(cli::parse_seed_list(""), ConfigError);
  }

  SUBCASE("overrides change exactly one key") {
    auto cfg = cli::parse_run_config_text(kBanditConfig, "test.cfg");
    cli::apply_override(cfg, "estimator.kind=none");
    CHECK(cfg.base.estimator.kind == entropy::EstimatorKind::none);
    CHECK(cfg.base.beta == 0.001);  // untouched
    CHECK_THROWS_AS(cli::apply_override(cfg, "estimator.strength=2"), ConfigError);
    CHECK_THROWS_AS(cli::apply_override(cfg, "beta=0.1"), ConfigError);
  }

  SUBCASE("the generated reference documents every key") {
    const std::string ref = cli::config_reference();
    for (const char* key : {"kind", "hidden", "beam", "grid_size", "bonus_prob", "episodes",
                            "seeds", "timing", "dir"})
      CHECK(ref.find(key) != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "entropg_test_ckpt.bin";

  policy::LSTMPolicy model(policy::ActionSpace(3, 5), 2, 6, 42);
  checkpoint::Meta meta{"lstm", 3, 5, 2, 6, 1, 42};
  checkpoint::save(path, model, meta);

  SUBCASE("peek reads the header only") {
    auto peeked = checkpoint::peek(path);
    CHECK(peeked.model_kind == "lstm");
    CHECK(peeked.dims == 3);
    CHECK(peeked.arity == 5);
    CHECK(peeked.hidden == 6);
    CHECK(peeked.seed == 42);
  }

  SUBCASE("load restores bit-identical parameters and distributions") {
    auto loaded = checkpoint::load(path);
    auto p1 = model.parameters();
    auto p2 = loaded->parameters();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(p1[i]->name() == p2[i]->name());
      CHECK(p1[i]->values() == p2[i]->values());
    }
    const diff::Values state = {0.3, -0.3};
    diff::Tape t1, t2;
    auto d1 = model.conditional_dist(t1, state, std::vector<int>{2});
    auto d2 = loaded->conditional_dist(t2, state, std::vector<int>{2});
    for (std::size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == d2[i]);
  }

  SUBCASE("corrupt files are rejected") {
    util::atomic_write_file(path, "not a checkpoint\n");
    CHECK_THROWS(checkpoint::load(path));
  }

  fs::remove(path);
}
