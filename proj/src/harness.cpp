#include "zeroprompt/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace zeroprompt {

using nlohmann::json;

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::pla: return "pla";
    case Mode::pla_no_la: return "pla_no_la";
    case Mode::pla_no_lb: return "pla_no_lb";
    case Mode::g_zoo: return "g_zoo";
    case Mode::g_re: return "g_re";
    case Mode::random_search: return "random_search";
  }
  throw std::logic_error("mode_name: unreachable");
}

std::optional<Mode> parse_mode(const std::string& name) {
  for (Mode m : {Mode::pla, Mode::pla_no_la, Mode::pla_no_lb, Mode::g_zoo,
                 Mode::g_re, Mode::random_search})
    if (mode_name(m) == name) return m;
  return std::nullopt;
}

VictimSetup make_victim_setup(const HarnessConfig& cfg) {
  if (cfg.blocklist.empty())
    throw std::invalid_argument("make_victim_setup: blocklist must be nonempty");
  VictimSetup setup{
      make_semantic_space(cfg.dims, mix_seed(cfg.seed, "space"), cfg.noise_scale),
      SemanticSpace{}, PromptFilterConfig{}, CheckerConfig{}, Decoder{}};
  setup.aux_space =
      make_auxiliary_space(setup.space, cfg.aux_mismatch, mix_seed(cfg.seed, "aux"));
  setup.filter.blocklist.insert(cfg.blocklist.begin(), cfg.blocklist.end());
  setup.checker =
      make_checker_config(setup.space, setup.filter.blocklist, cfg.checker_threshold);
  setup.decoder = make_decoder(setup.space, cfg.encoder.hidden_dim, cfg.decoder_out_len,
                               mix_seed(cfg.seed, "decoder"), cfg.decoder_gains);
  return setup;
}

namespace {

std::vector<int> non_blocked_tokens(const SemanticSpace& space,
                                    const PromptFilterConfig& filter) {
  std::vector<int> pool;
  for (int t = 0; t < space.dims.vocab_size; ++t)
    if (filter.blocklist.count(t) == 0) pool.push_back(t);
  return pool;
}

}  // namespace

AttackTask make_attack_task(const HarnessConfig& cfg, const VictimSetup& setup,
                            int task_index) {
  AttackTask task;
  task.task_index = task_index;
  task.task_seed = mix_seed(cfg.seed, "task", static_cast<std::uint64_t>(task_index));

  const std::vector<int> pool = non_blocked_tokens(setup.space, setup.filter);
  if (pool.empty())
    throw std::invalid_argument("make_attack_task: every token is blocklisted");
  if (cfg.target_len < 1)
    throw std::invalid_argument("make_attack_task: target_len must be >= 1");

  Rng rng(mix_seed(task.task_seed, "target"));
  std::vector<int> blocked(setup.filter.blocklist.begin(), setup.filter.blocklist.end());
  task.blocked_token = blocked[rng.below(blocked.size())];

  task.target_prompt.resize(static_cast<std::size_t>(cfg.target_len));
  for (auto& t : task.target_prompt) t = pool[rng.below(pool.size())];
  const std::size_t pos = rng.below(static_cast<std::uint64_t>(cfg.target_len));
  task.target_prompt[pos] = task.blocked_token;

  task.target_image = auxiliary_generate(task.target_prompt,
                                         mix_seed(task.task_seed, "aux_gen"),
                                         setup.aux_space);
  return task;
}

AsrResult evaluate_asr(const TokenSequence& p_adv, const AttackTask& task, int n,
                       QueryLedger& ledger, const VictimSetup& setup,
                       double retention_threshold) {
  if (n < 1) throw std::invalid_argument("evaluate_asr: n must be >= 1");
  AsrResult result;
  const ImageEmbedding target_emb = image_encode(task.target_image, setup.space);
  for (int i = 1; i <= n; ++i) {
    AsrOutcome outcome;
    outcome.gen_seed = task.task_seed + static_cast<std::uint64_t>(i);
    try {
      const VictimResponse resp = victim_query(p_adv, outcome.gen_seed, ledger,
                                               setup.filter, setup.checker, setup.space);
      if (!resp.blocked()) {
        outcome.passed_gates = true;
        const auto cos =
            cosine(image_encode(resp.image, setup.space).values, target_emb.values);
        outcome.retention = cos.value_or(0.0);
        outcome.counted = cos.has_value() && *cos >= retention_threshold;
      }
    } catch (const BudgetExhausted&) {
      result.exhausted = true;  // remaining seeds count as failures
      result.outcomes.push_back(outcome);
      break;
    }
    result.outcomes.push_back(outcome);
  }
  result.success_first = !result.outcomes.empty() && result.outcomes.front().counted;
  for (const auto& o : result.outcomes) result.success = result.success || o.counted;
  return result;
}

namespace {

ZooConfig zoo_config_for_mode(const HarnessConfig& cfg) {
  ZooConfig zoo = cfg.zoo;
  switch (cfg.mode) {
    case Mode::pla:
    case Mode::pla_no_la:
    case Mode::pla_no_lb:
      zoo.variant = GradientVariant::momentum;
      zoo.use_restart = true;
      break;
    case Mode::g_zoo:
      zoo.variant = GradientVariant::plain;
      zoo.use_restart = true;
      break;
    case Mode::g_re:
      zoo.variant = GradientVariant::momentum;
      zoo.use_restart = false;
      break;
    case Mode::random_search:
      break;
  }
  return zoo;
}

LossTerms loss_terms_for_mode(Mode mode) {
  LossTerms terms;
  if (mode == Mode::pla_no_la) terms.text_image = false;
  if (mode == Mode::pla_no_lb) terms.image_image = false;
  return terms;
}

AttackRecord base_record(const AttackTask& task, const HarnessConfig& cfg) {
  AttackRecord rec;
  rec.task_index = task.task_index;
  rec.task_seed = task.task_seed;
  rec.mode = mode_name(cfg.mode);
  rec.target_prompt = task.target_prompt;
  rec.blocked_token = task.blocked_token;
  return rec;
}

void finish_with_asr(AttackRecord& rec, const AttackTask& task, const HarnessConfig& cfg,
                     const VictimSetup& setup) {
  QueryLedger asr_ledger{0, cfg.asr_n};
  rec.asr = evaluate_asr(rec.adversarial_prompt, task, cfg.asr_n, asr_ledger, setup,
                         cfg.retention_threshold);
  rec.asr_queries = asr_ledger.count;
  rec.success = rec.asr.success;
}

}  // namespace

AttackRecord random_search_baseline(const AttackTask& task, const HarnessConfig& cfg,
                                    const VictimSetup& setup) {
  AttackRecord rec = base_record(task, cfg);
  const std::vector<int> pool = non_blocked_tokens(setup.space, setup.filter);
  if (pool.empty()) {
    std::cerr << "[zeroprompt] warning: random_search with a fully blocklisted "
                 "vocabulary; recording failure\n";
    rec.error = "degenerate config: every token blocklisted";
    return rec;
  }

  QueryLedger ledger{0, cfg.query_budget};
  Rng rng(mix_seed(task.task_seed, "random_search"));
  const std::size_t len = static_cast<std::size_t>(cfg.decoder_out_len);
  int step = 0;
  bool have_best = false;
  while (ledger.count < ledger.budget) {
    TokenSequence candidate(len);
    for (auto& t : candidate) t = pool[rng.below(pool.size())];
    const VictimResponse resp =
        victim_query(candidate, mix_seed(task.task_seed, "rs_gen", static_cast<std::uint64_t>(step)),
                     ledger, setup.filter, setup.checker, setup.space);
    const LossBreakdown lb =
        multimodal_loss(resp, task.target_prompt, task.target_image, setup.space);
    if (!have_best || lb.total < rec.final_loss) {
      have_best = true;
      rec.final_loss = lb.total;
      rec.adversarial_prompt = candidate;
    }
    rec.steps.push_back(StepTrace{step, lb.total, resp.blocked(), false, ledger.count});
    ++step;
  }
  rec.opt_queries = ledger.count;
  if (!have_best) return rec;  // zero budget: no queries, plain failure
  finish_with_asr(rec, task, cfg, setup);
  return rec;
}

AttackRecord run_task(const AttackTask& task, const HarnessConfig& cfg,
                      const VictimSetup& setup) {
  if (cfg.mode == Mode::random_search) return random_search_baseline(task, cfg, setup);

  AttackRecord rec = base_record(task, cfg);

  AttackPipeline pipe;
  pipe.projection = make_sensitive_projection(cfg.dims.text_dim, cfg.encoder,
                                              mix_seed(task.task_seed, "projection"));
  TokenSequence random_prompt(static_cast<std::size_t>(cfg.encoder.prompt_len));
  {
    Rng rng(mix_seed(task.task_seed, "random_prompt"));
    for (auto& t : random_prompt)
      t = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.dims.vocab_size)));
  }
  pipe.encoder = make_prompt_encoder(cfg.encoder, cfg.dims.vocab_size,
                                     std::move(random_prompt),
                                     mix_seed(task.task_seed, "encoder"),
                                     cfg.injection_weight, cfg.encoder_init_stddev);
  pipe.decoder = setup.decoder;
  pipe.space = setup.space;
  pipe.target_prompt = task.target_prompt;
  pipe.target_image = task.target_image;
  pipe.terms = loss_terms_for_mode(cfg.mode);
  pipe.seed = mix_seed(task.task_seed, "optimize");
  pipe.train_projection = cfg.train_projection;

  QueryLedger ledger{0, cfg.query_budget};
  pipe.query = [&ledger, &setup](const TokenSequence& p, std::uint64_t gen_seed) {
    return victim_query(p, gen_seed, ledger, setup.filter, setup.checker, setup.space);
  };

  const OptimizeResult opt = optimize_attack(pipe, zoo_config_for_mode(cfg));
  rec.steps = opt.trace;
  rec.opt_queries = ledger.count;
  rec.adversarial_prompt = opt.best_prompt;
  // With a zero budget nothing was ever scored; report the blocked ceiling.
  rec.final_loss = std::isfinite(opt.best_loss)
                       ? opt.best_loss
                       : kBlockedTermLoss * pipe.terms.active();
  finish_with_asr(rec, task, cfg, setup);
  return rec;
}

SuiteSummary summarize(const std::vector<AttackRecord>& records, int asr_n) {
  SuiteSummary s;
  s.num_tasks = static_cast<int>(records.size());
  s.asr_n = asr_n;
  if (records.empty()) return s;
  s.mode = records.front().mode;
  double successes = 0, first = 0, queries = 0, loss = 0;
  for (const auto& r : records) {
    successes += r.success ? 1 : 0;
    first += r.asr.success_first ? 1 : 0;
    queries += static_cast<double>(r.opt_queries);
    loss += r.final_loss;
  }
  const double n = static_cast<double>(records.size());
  s.asr_rate_n = successes / n;
  s.asr_rate_1 = first / n;
  s.mean_opt_queries = queries / n;
  s.mean_final_loss = loss / n;
  return s;
}

namespace {

json step_to_json(const StepTrace& t) {
  return json{{"step", t.step},
              {"loss", t.loss},
              {"blocked", t.all_blocked},
              {"restarted", t.restarted},
              {"queries", t.queries}};
}

json asr_to_json(const AsrResult& a) {
  json outcomes = json::array();
  for (const auto& o : a.outcomes)
    outcomes.push_back(json{{"gen_seed", o.gen_seed},
                            {"passed_gates", o.passed_gates},
                            {"retention", o.retention},
                            {"counted", o.counted}});
  return json{{"success", a.success},
              {"success_first", a.success_first},
              {"exhausted", a.exhausted},
              {"outcomes", std::move(outcomes)}};
}

}  // namespace

std::string record_to_json_line(const AttackRecord& rec) {
  json steps = json::array();
  for (const auto& t : rec.steps) steps.push_back(step_to_json(t));
  const json j{{"schema_version", kRecordSchemaVersion},
               {"task_index", rec.task_index},
               {"task_seed", rec.task_seed},
               {"mode", rec.mode},
               {"target_prompt", rec.target_prompt},
               {"blocked_token", rec.blocked_token},
               {"steps", std::move(steps)},
               {"adversarial_prompt", rec.adversarial_prompt},
               {"final_loss", rec.final_loss},
               {"opt_queries", rec.opt_queries},
               {"asr_queries", rec.asr_queries},
               {"asr", asr_to_json(rec.asr)},
               {"success", rec.success},
               {"error", rec.error}};
  return j.dump();
}

std::string summary_to_csv(const SuiteSummary& s) {
  std::ostringstream out;
  out << "schema_version,mode,num_tasks,asr_n,asr_rate_n,asr_rate_1,"
         "mean_opt_queries,mean_final_loss\n";
  out << kRecordSchemaVersion << ',' << s.mode << ',' << s.num_tasks << ',' << s.asr_n
      << ',' << s.asr_rate_n << ',' << s.asr_rate_1 << ',' << s.mean_opt_queries << ','
      << s.mean_final_loss << "\n";
  return out.str();
}

SuiteSummary run_suite(const HarnessConfig& cfg, int num_tasks,
                       const std::optional<std::filesystem::path>& out_dir,
                       std::vector<AttackRecord>* records_out) {
  if (num_tasks < 0) throw std::invalid_argument("run_suite: num_tasks must be >= 0");
  const VictimSetup setup = make_victim_setup(cfg);

  std::vector<AttackRecord> records;
  records.reserve(static_cast<std::size_t>(num_tasks));
  for (int i = 0; i < num_tasks; ++i) {
    AttackTask task;
    try {
      task = make_attack_task(cfg, setup, i);
      records.push_back(run_task(task, cfg, setup));
    } catch (const std::exception& e) {
      AttackRecord rec;
      rec.task_index = i;
      rec.task_seed = task.task_seed;
      rec.mode = mode_name(cfg.mode);
      rec.error = e.what();
      records.push_back(std::move(rec));
    }
  }

  const SuiteSummary summary = summarize(records, cfg.asr_n);
  if (out_dir.has_value()) {
    std::filesystem::create_directories(*out_dir);
    {
      std::ofstream f(*out_dir / "records.jsonl", std::ios::binary);
      for (const auto& r : records) f << record_to_json_line(r) << "\n";
    }
    {
      std::ofstream f(*out_dir / "summary.csv", std::ios::binary);
      f << summary_to_csv(summary);
    }
    {
      // The only file with a timestamp, so records.jsonl stays byte-stable.
      const auto now = std::chrono::system_clock::now().time_since_epoch();
      const json meta{
          {"schema_version", kRecordSchemaVersion},
          {"mode", mode_name(cfg.mode)},
          {"num_tasks", num_tasks},
          {"unix_time_ms",
           std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
      std::ofstream f(*out_dir / "meta.json", std::ios::binary);
      f << meta.dump(2) << "\n";
    }
  }
  if (records_out != nullptr) *records_out = std::move(records);
  return summary;
}

}  // namespace zeroprompt
