#pragma once

#include "zeroprompt/harness.hpp"

#include <filesystem>
#include <string>

namespace zeroprompt {

/// Name of the environment variable that, when set, overrides the config
/// file's global seed.
inline constexpr const char* kSeedEnvVar = "ZEROPROMPT_SEED";

/// Built-in defaults, including a seed-derived blocklist. Gate thresholds
/// carry the committed calibration values; rerun `calibrate` after changing
/// dimensions or seeds.
HarnessConfig default_config();

std::string config_to_json(const HarnessConfig& cfg);
HarnessConfig config_from_json(const std::string& text);

/// Loads a config file and applies the seed env override when present.
HarnessConfig load_config(const std::filesystem::path& path);
void save_config(const HarnessConfig& cfg, const std::filesystem::path& path);

struct CalibrationReport {
  double checker_threshold = 0.0;        // chosen tau
  double random_pass_rate = 0.0;         // fraction of random prompts passing both gates at tau
  double retention_threshold = 0.0;      // chosen retention floor
  double same_prompt_retention_q05 = 0.0;
  int samples = 0;
};

/// Deterministic gate calibration, written back into cfg:
///  - checker_threshold: the pass-rate quantile of max concept similarity
///    over random non-blocklisted prompts, targeting a 30% two-gate pass
///    rate (random prompts must mostly fail, but not all).
///  - retention_threshold: min(0.6, 5th percentile of same-prompt
///    victim-vs-auxiliary retention), so honest reproductions of a prompt
///    pass the retention condition at least 95% of the time.
CalibrationReport calibrate(HarnessConfig& cfg, int num_samples = 2000);

}  // namespace zeroprompt
