#pragma once

#include "zeroprompt/decoder.hpp"
#include "zeroprompt/loss.hpp"
#include "zeroprompt/prompt_encoder.hpp"
#include "zeroprompt/semantic_space.hpp"
#include "zeroprompt/victim.hpp"
#include "zeroprompt/zoo.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace zeroprompt {

/// Experiment modes. pla is the full method; pla_no_la / pla_no_lb drop one
/// similarity term; g_zoo swaps in the plain two-point update; g_re removes
/// the restart substitution; random_search is the control baseline.
enum class Mode { pla, pla_no_la, pla_no_lb, g_zoo, g_re, random_search };

std::string mode_name(Mode mode);
std::optional<Mode> parse_mode(const std::string& name);

/// Everything a suite run needs, loadable from one JSON document. The
/// checker threshold and the retention threshold are produced by the
/// `calibrate` subcommand and stored here so runs are self-contained.
struct HarnessConfig {
  std::uint64_t seed = 31337;

  SpaceDims dims;
  double noise_scale = 0.05;

  EncoderDims encoder;
  double injection_weight = 1.0;
  double encoder_init_stddev = 0.1;
  bool train_projection = false;

  Index decoder_out_len = 12;
  DecoderGains decoder_gains;

  std::vector<int> blocklist;          // explicit token ids
  double checker_threshold = 0.17620;  // tau; see default_config for the committed value
  double aux_mismatch = 0.0;

  Index target_len = 8;              // target-prompt length, one blocked token
  ZooConfig zoo;
  std::int64_t query_budget = 600;   // optimization queries per task

  int asr_n = 4;
  double retention_threshold = 0.6;  // semantic-retention floor; calibrated

  Mode mode = Mode::pla;
};

/// One seeded attack task. The target prompt always contains exactly one
/// blocklisted token, so the raw target is filter-blocked by construction.
struct AttackTask {
  int task_index = 0;
  std::uint64_t task_seed = 0;
  TokenSequence target_prompt;
  int blocked_token = -1;
  Image target_image;  // from the auxiliary model
};

/// Frozen per-config machinery shared by every task of a suite.
struct VictimSetup {
  SemanticSpace space;
  SemanticSpace aux_space;
  PromptFilterConfig filter;
  CheckerConfig checker;
  Decoder decoder;
};

VictimSetup make_victim_setup(const HarnessConfig& cfg);

AttackTask make_attack_task(const HarnessConfig& cfg, const VictimSetup& setup,
                            int task_index);

struct AsrOutcome {
  std::uint64_t gen_seed = 0;
  bool passed_gates = false;
  double retention = 0.0;  // cos(enc(generated), enc(target image))
  bool counted = false;    // passed gates and retention >= threshold
};

struct AsrResult {
  bool success = false;        // any outcome counted
  bool success_first = false;  // first outcome counted (the N=1 metric)
  std::vector<AsrOutcome> outcomes;
  bool exhausted = false;
};

/// Queries the victim with gen seeds task_seed+1 .. task_seed+n and scores
/// the three success conditions. Budget exhaustion marks the remaining
/// seeds as failures.
AsrResult evaluate_asr(const TokenSequence& p_adv, const AttackTask& task, int n,
                       QueryLedger& ledger, const VictimSetup& setup,
                       double retention_threshold);

/// Everything recorded about one task under one mode.
struct AttackRecord {
  int task_index = 0;
  std::uint64_t task_seed = 0;
  std::string mode;
  TokenSequence target_prompt;
  int blocked_token = -1;
  std::vector<StepTrace> steps;
  TokenSequence adversarial_prompt;
  double final_loss = 4.0;        // best real queried loss
  std::int64_t opt_queries = 0;   // optimization ledger count
  std::int64_t asr_queries = 0;   // evaluation ledger count
  AsrResult asr;
  bool success = false;
  std::string error;              // nonempty when the task failed to run
};

/// Uniform sampling over non-blocklisted tokens with the same budget and
/// accounting as the optimizer; keeps the best prompt by loss.
AttackRecord random_search_baseline(const AttackTask& task, const HarnessConfig& cfg,
                                    const VictimSetup& setup);

/// Runs one task under the configured mode (optimization or baseline) and
/// evaluates the result at asr_n generation seeds.
AttackRecord run_task(const AttackTask& task, const HarnessConfig& cfg,
                      const VictimSetup& setup);

struct SuiteSummary {
  std::string mode;
  int num_tasks = 0;
  int asr_n = 0;
  double asr_rate_n = 0.0;      // fraction of tasks with any counted outcome
  double asr_rate_1 = 0.0;      // fraction with the first outcome counted
  double mean_opt_queries = 0.0;
  double mean_final_loss = 0.0;
};

SuiteSummary summarize(const std::vector<AttackRecord>& records, int asr_n);

/// Runs num_tasks seeded tasks under cfg.mode. When out_dir is given,
/// writes records.jsonl (deterministic bytes), summary.csv and meta.json
/// (the only file carrying a timestamp). A task that throws is recorded
/// with its error and does not abort the suite.
SuiteSummary run_suite(const HarnessConfig& cfg, int num_tasks,
                       const std::optional<std::filesystem::path>& out_dir,
                       std::vector<AttackRecord>* records_out = nullptr);

inline constexpr int kRecordSchemaVersion = 1;

std::string record_to_json_line(const AttackRecord& record);
std::string summary_to_csv(const SuiteSummary& summary);

}  // namespace zeroprompt
