#include "zeroprompt/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace zeroprompt {

using nlohmann::json;

namespace {

std::vector<int> seeded_blocklist(std::uint64_t seed, Index vocab_size, int count) {
  Rng rng(mix_seed(seed, "blocklist"));
  std::set<int> ids;
  while (static_cast<int>(ids.size()) < count)
    ids.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size))));
  return {ids.begin(), ids.end()};
}

}  // namespace

HarnessConfig default_config() {
  HarnessConfig cfg;
  cfg.blocklist = seeded_blocklist(cfg.seed, cfg.dims.vocab_size, 8);
  // Committed output of `calibrate` (2000 samples) for the default seed and
  // dimensions: a 30% two-gate pass rate for random non-blocklisted prompts,
  // and the 0.6 retention floor (the same-prompt retention 5th percentile
  // sits well above it). Rerun `calibrate` after changing seed, dimensions
  // or noise_scale.
  cfg.checker_threshold = 0.1761973575640596;
  cfg.retention_threshold = 0.6;
  return cfg;
}

std::string config_to_json(const HarnessConfig& cfg) {
  const json j{
      {"seed", cfg.seed},
      {"space",
       {{"vocab_size", cfg.dims.vocab_size},
        {"text_dim", cfg.dims.text_dim},
        {"image_dim", cfg.dims.image_dim},
        {"embed_dim", cfg.dims.embed_dim},
        {"noise_scale", cfg.noise_scale}}},
      {"encoder",
       {{"num_layers", cfg.encoder.num_layers},
        {"injection_layer", cfg.encoder.injection_layer},
        {"prompt_len", cfg.encoder.prompt_len},
        {"hidden_dim", cfg.encoder.hidden_dim},
        {"low_dim", cfg.encoder.low_dim},
        {"injection_weight", cfg.injection_weight},
        {"init_stddev", cfg.encoder_init_stddev},
        {"train_projection", cfg.train_projection}}},
      {"decoder",
       {{"out_len", cfg.decoder_out_len},
        {"target_gain", cfg.decoder_gains.target},
        {"learnable_gain", cfg.decoder_gains.learnable},
        {"offset_gain", cfg.decoder_gains.offset}}},
      {"victim",
       {{"blocklist", cfg.blocklist},
        {"checker_threshold", cfg.checker_threshold},
        {"aux_mismatch", cfg.aux_mismatch}}},
      {"optimizer",
       {{"probe_scale", cfg.zoo.probe_scale},
        {"history_ratio", cfg.zoo.history_ratio},
        {"learning_rate", cfg.zoo.learning_rate},
        {"num_probe_pairs", cfg.zoo.num_probe_pairs},
        {"max_steps", cfg.zoo.max_steps},
        {"strict_recurrence", cfg.zoo.strict_recurrence},
        {"perturbation_dist",
         cfg.zoo.dist == PerturbationDist::rademacher ? "rademacher" : "gaussian"}}},
      {"attack",
       {{"target_len", cfg.target_len},
        {"query_budget", cfg.query_budget},
        {"asr_n", cfg.asr_n},
        {"retention_threshold", cfg.retention_threshold},
        {"mode", mode_name(cfg.mode)}}}};
  return j.dump(2) + "\n";
}

HarnessConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  HarnessConfig cfg = default_config();

  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("space")) {
    const auto& s = j.at("space");
    cfg.dims.vocab_size = s.value("vocab_size", cfg.dims.vocab_size);
    cfg.dims.text_dim = s.value("text_dim", cfg.dims.text_dim);
    cfg.dims.image_dim = s.value("image_dim", cfg.dims.image_dim);
    cfg.dims.embed_dim = s.value("embed_dim", cfg.dims.embed_dim);
    cfg.noise_scale = s.value("noise_scale", cfg.noise_scale);
  }
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    cfg.encoder.num_layers = e.value("num_layers", cfg.encoder.num_layers);
    cfg.encoder.injection_layer = e.value("injection_layer", cfg.encoder.injection_layer);
    cfg.encoder.prompt_len = e.value("prompt_len", cfg.encoder.prompt_len);
    cfg.encoder.hidden_dim = e.value("hidden_dim", cfg.encoder.hidden_dim);
    cfg.encoder.low_dim = e.value("low_dim", cfg.encoder.low_dim);
    cfg.injection_weight = e.value("injection_weight", cfg.injection_weight);
    cfg.encoder_init_stddev = e.value("init_stddev", cfg.encoder_init_stddev);
    cfg.train_projection = e.value("train_projection", cfg.train_projection);
  }
  if (j.contains("decoder")) {
    const auto& d = j.at("decoder");
    cfg.decoder_out_len = d.value("out_len", cfg.decoder_out_len);
    cfg.decoder_gains.target = d.value("target_gain", cfg.decoder_gains.target);
    cfg.decoder_gains.learnable = d.value("learnable_gain", cfg.decoder_gains.learnable);
    cfg.decoder_gains.offset = d.value("offset_gain", cfg.decoder_gains.offset);
  }
  if (j.contains("victim")) {
    const auto& v = j.at("victim");
    if (v.contains("blocklist")) cfg.blocklist = v.at("blocklist").get<std::vector<int>>();
    cfg.checker_threshold = v.value("checker_threshold", cfg.checker_threshold);
    cfg.aux_mismatch = v.value("aux_mismatch", cfg.aux_mismatch);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    cfg.zoo.probe_scale = o.value("probe_scale", cfg.zoo.probe_scale);
    cfg.zoo.history_ratio = o.value("history_ratio", cfg.zoo.history_ratio);
    cfg.zoo.learning_rate = o.value("learning_rate", cfg.zoo.learning_rate);
    cfg.zoo.num_probe_pairs = o.value("num_probe_pairs", cfg.zoo.num_probe_pairs);
    cfg.zoo.max_steps = o.value("max_steps", cfg.zoo.max_steps);
    cfg.zoo.strict_recurrence = o.value("strict_recurrence", cfg.zoo.strict_recurrence);
    const std::string dist = o.value("perturbation_dist", std::string("rademacher"));
    if (dist == "rademacher") {
      cfg.zoo.dist = PerturbationDist::rademacher;
    } else if (dist == "gaussian") {
      cfg.zoo.dist = PerturbationDist::gaussian;
    } else {
      throw std::invalid_argument("config: unknown perturbation_dist '" + dist + "'");
    }
  }
  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    cfg.target_len = a.value("target_len", cfg.target_len);
    cfg.query_budget = a.value("query_budget", cfg.query_budget);
    cfg.asr_n = a.value("asr_n", cfg.asr_n);
    cfg.retention_threshold = a.value("retention_threshold", cfg.retention_threshold);
    if (a.contains("mode")) {
      const auto mode = parse_mode(a.at("mode").get<std::string>());
      if (!mode.has_value())
        throw std::invalid_argument("config: unknown mode '" +
                                    a.at("mode").get<std::string>() + "'");
      cfg.mode = *mode;
    }
  }

  if (cfg.asr_n < 1) throw std::invalid_argument("config: asr_n must be >= 1");
  if (cfg.retention_threshold <= 0.0 || cfg.retention_threshold >= 1.0)
    throw std::invalid_argument("config: retention_threshold must lie in (0,1)");
  if (cfg.zoo.probe_scale <= 0.0 || cfg.zoo.probe_scale > 1.0)
    throw std::invalid_argument("config: probe_scale must lie in (0,1]");
  if (cfg.zoo.history_ratio < 0.0 || cfg.zoo.history_ratio >= 1.0)
    throw std::invalid_argument("config: history_ratio must lie in [0,1)");
  if (cfg.zoo.learning_rate <= 0.0)
    throw std::invalid_argument("config: learning_rate must be positive");
  return cfg;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  HarnessConfig cfg = config_from_json(buf.str());
  if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env != '\0') {
    cfg.seed = std::stoull(env);
  }
  return cfg;
}

void save_config(const HarnessConfig& cfg, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write config file: " + path.string());
  f << config_to_json(cfg);
}

namespace {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(
      std::floor(q * static_cast<double>(values.size() - 1)));
  return values[idx];
}

}  // namespace

CalibrationReport calibrate(HarnessConfig& cfg, int num_samples) {
  if (num_samples < 10) throw std::invalid_argument("calibrate: too few samples");
  const std::uint64_t cal_seed = mix_seed(cfg.seed, "calibrate");
  const SemanticSpace space =
      make_semantic_space(cfg.dims, mix_seed(cfg.seed, "space"), cfg.noise_scale);
  const SemanticSpace aux =
      make_auxiliary_space(space, cfg.aux_mismatch, mix_seed(cfg.seed, "aux"));
  PromptFilterConfig filter;
  filter.blocklist.insert(cfg.blocklist.begin(), cfg.blocklist.end());
  // Concepts do not depend on the threshold being calibrated.
  const CheckerConfig concepts = make_checker_config(space, filter.blocklist, 0.5);

  std::vector<int> pool;
  for (int t = 0; t < space.dims.vocab_size; ++t)
    if (filter.blocklist.count(t) == 0) pool.push_back(t);
  if (pool.empty()) throw std::invalid_argument("calibrate: every token blocklisted");

  Rng rng(cal_seed);
  std::vector<double> max_sims;
  std::vector<double> retentions;
  max_sims.reserve(static_cast<std::size_t>(num_samples));
  retentions.reserve(static_cast<std::size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) {
    TokenSequence p(static_cast<std::size_t>(cfg.decoder_out_len));
    for (auto& t : p) t = pool[rng.below(pool.size())];

    const Image img = generate_image(text_encode(p, space),
                                     mix_seed(cal_seed, "gen", static_cast<std::uint64_t>(i)),
                                     space);
    const ImageEmbedding emb = image_encode(img, space);
    double max_sim = -1.0;
    for (const auto& c : concepts.concepts)
      max_sim = std::max(max_sim, cosine(emb.values, c).value_or(-1.0));
    max_sims.push_back(max_sim);

    const Image again = generate_image(
        text_encode(p, space), mix_seed(cal_seed, "gen2", static_cast<std::uint64_t>(i)),
        space);
    const Image via_aux = auxiliary_generate(
        p, mix_seed(cal_seed, "aux_gen", static_cast<std::uint64_t>(i)), aux);
    retentions.push_back(cosine(image_encode(again, space).values,
                                image_encode(via_aux, space).values)
                             .value_or(0.0));
  }

  CalibrationReport report;
  report.samples = num_samples;
  // Pass iff max similarity <= tau, so tau at the 0.30 quantile yields a
  // ~30% pass rate, inside the required 20-40% band.
  report.checker_threshold = quantile(max_sims, 0.30);
  report.random_pass_rate =
      static_cast<double>(std::count_if(max_sims.begin(), max_sims.end(),
                                        [&](double v) { return v <= report.checker_threshold; })) /
      static_cast<double>(num_samples);
  report.same_prompt_retention_q05 = quantile(retentions, 0.05);
  report.retention_threshold = std::min(0.6, report.same_prompt_retention_q05);

  cfg.checker_threshold = report.checker_threshold;
  cfg.retention_threshold = report.retention_threshold;
  return report;
}

}  // namespace zeroprompt
