#ifndef ENTROPG_RUN_CONFIG_HPP
#define ENTROPG_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropg/trainer.hpp"

namespace entropg::cli {

/// Invalid configuration (bad file, unknown key, inconsistent values).
/// The message carries file/line context where available.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  train::TrainConfig base;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path output_dir = "runs/out";
};

/// Parses the sectioned key=value run-configuration format. Unknown sections
/// or keys raise ConfigError with the offending line number; an [env] section
/// naming the environment is required.
RunConfig parse_run_config(const std::filesystem::path& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

/// Applies one "section.key=value" override on top of a parsed config.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// "0..9" (inclusive range) or "0,4,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Generated listing of every section, key, default and description.
std::string config_reference();

}  // namespace entropg::cli

#endif
