#pragma once

#include "mfpg/bench.hpp"
#include "mfpg/policy.hpp"
#include "mfpg/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace mfpg {

/// Config validation failure. `key_path` names the offending field, e.g. "train.eps".
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string key_path, const std::string& why);
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

struct EnvConfig {
  std::string name = "two_state";  // two_state | cyber | plan
  TwoStateParams two_state;
  CyberParams cyber;
  PlanParams plan;

  std::unique_ptr<MeanFieldEnv> make() const;
  /// Training horizon of the configured env.
  int horizon() const;
  std::size_t num_states() const;
  std::size_t num_actions() const;
};

struct RunConfig {
  EnvConfig env;
  PolicySpec policy;  // num_states, num_actions, time_horizon filled from env
  TrainConfig train;  // train.seed mirrors seed
  std::string out = "runs/out";
  std::uint64_t seed = 0;
};

/// Strict parse: unknown keys and type errors raise ConfigError with the key path. Missing
/// optional fields take their defaults; env.name and policy.kind are required.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved config with every field spelled out. parse(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& cfg);

/// FNV-1a 64 of the resolved config dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Run manifest: resolved config, hash, seed, mode, threads, command, software version.
nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command, int threads);

std::string software_version();

}  // namespace mfpg
