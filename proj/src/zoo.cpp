#include "zeroprompt/zoo.hpp"

#include <utility>

namespace zeroprompt {

GradientState make_gradient_state(Index dim) {
  return GradientState{Vector::Zero(dim), 0, 0};
}

Vector sample_perturbation(Index dim, PerturbationDist dist, std::uint64_t rng_seed) {
  if (dim < 1) throw std::invalid_argument("sample_perturbation: dim must be >= 1");
  if (dist == PerturbationDist::gaussian)
    throw std::invalid_argument(
        "sample_perturbation: gaussian perturbations are incompatible with the "
        "componentwise-division estimator (no finite inverse moment)");
  Rng rng(rng_seed);
  Vector delta(dim);
  for (Index i = 0; i < dim; ++i) delta[i] = rng.rademacher();
  return delta;
}

Vector two_point_estimate(const ScalarOracle& loss_at, const ParamVector& sigma,
                          double probe_scale, const Vector& delta) {
  if (delta.size() != sigma.size())
    throw std::invalid_argument("two_point_estimate: perturbation length disagrees");
  if (!(probe_scale > 0.0))
    throw std::invalid_argument("two_point_estimate: probe_scale must be positive");
  if ((delta.array() == 0.0).any())
    throw std::invalid_argument("two_point_estimate: perturbation entries must be nonzero");

  const ParamVector up{sigma.values + probe_scale * delta, sigma.layout};
  const ParamVector down{sigma.values - probe_scale * delta, sigma.layout};
  const double diff = loss_at(up) - loss_at(down);
  return (diff / (2.0 * probe_scale)) * delta.cwiseInverse();
}

StepResult momentum_step(const GradientState& state, const ParamVector& sigma,
                         const ScalarOracle& loss_at, const ZooConfig& cfg,
                         std::uint64_t rng_seed) {
  if (state.history.size() != sigma.size())
    throw std::invalid_argument("momentum_step: state dimension disagrees");
  if (cfg.num_probe_pairs < 1)
    throw std::invalid_argument("momentum_step: num_probe_pairs must be >= 1");

  const bool momentum = cfg.variant == GradientVariant::momentum;
  ParamVector probe_point = sigma;
  if (momentum) probe_point.values += state.history;  // lookahead along history

  Vector estimate = Vector::Zero(sigma.size());
  try {
    for (int p = 0; p < cfg.num_probe_pairs; ++p) {
      const Vector delta = sample_perturbation(
          sigma.size(), cfg.dist, mix_seed(rng_seed, "probe", static_cast<std::uint64_t>(p)));
      estimate += two_point_estimate(loss_at, probe_point, cfg.probe_scale, delta);
    }
  } catch (const BudgetExhausted&) {
    StepResult aborted{sigma, state, Vector::Zero(sigma.size()),
                       Vector::Zero(sigma.size()), false, true};
    return aborted;
  }
  estimate /= static_cast<double>(cfg.num_probe_pairs);

  const bool vanished = (estimate.array() == 0.0).all();
  const bool has_history = !(state.history.array() == 0.0).all();

  Vector update;
  if (!momentum) {
    update = cfg.learning_rate * estimate;
  } else if (vanished && has_history && !cfg.strict_recurrence) {
    // Blocked streak: keep riding the previous direction at full magnitude.
    update = state.history;
  } else {
    update = cfg.history_ratio * state.history +
             (1.0 - cfg.history_ratio) * cfg.learning_rate * estimate;
  }

  StepResult out;
  out.sigma = ParamVector{sigma.values - update, sigma.layout};
  out.state = GradientState{update, state.step + 1,
                            vanished ? state.vanished_streak + 1 : 0};
  out.estimate = std::move(estimate);
  out.update = out.state.history;
  out.vanished = vanished;
  return out;
}

Image restart_substitute(const VictimResponse& resp, std::uint64_t rng_seed,
                         const SemanticSpace& space) {
  if (!resp.blocked())
    throw std::invalid_argument("restart_substitute: response was not blocked");
  return Image{normal_vector(rng_seed, space.dims.image_dim), false};
}

TokenSequence decode_at(const ParamVector& sigma, const AttackPipeline& pipe) {
  SensitiveProjection proj = pipe.projection;
  PromptEncoder enc = pipe.encoder;
  unflatten_params(sigma, proj, enc);
  const TextEmbedding e_tar = text_encode(pipe.target_prompt, pipe.space);
  const SensitiveEmbedding e_sen =
      project_sensitive(e_tar, proj, enc.prompt_rows(), enc.width());
  const LearnableEmbedding e_pe = encode_with_injection(enc, e_sen);
  return decode_adversarial(e_pe, pipe.target_prompt, pipe.decoder, pipe.space);
}

namespace {

struct EvalRecord {
  VictimResponse response;
  double loss = 0.0;
};

}  // namespace

OptimizeResult optimize_attack(const AttackPipeline& pipe, const ZooConfig& cfg) {
  OptimizeResult result;
  result.sigma = flatten_params(pipe.projection, pipe.encoder, pipe.train_projection);
  result.state = make_gradient_state(result.sigma.size());

  for (int step = 0; step < cfg.max_steps; ++step) {
    const std::uint64_t step_seed = mix_seed(pipe.seed, "step", static_cast<std::uint64_t>(step));
    // Common generation seed across the step's evaluations, so probe pairs
    // difference out the generator noise instead of measuring it.
    const std::uint64_t gen_seed = mix_seed(pipe.seed, "gen", static_cast<std::uint64_t>(step));

    std::vector<EvalRecord> evals;
    const ScalarOracle oracle = [&](const ParamVector& s) -> double {
      const TokenSequence prompt = decode_at(s, pipe);
      VictimResponse resp = pipe.query(prompt, gen_seed);
      const LossBreakdown lb =
          multimodal_loss(resp, pipe.target_prompt, pipe.target_image, pipe.space, pipe.terms);
      if (lb.total < result.best_loss) {
        result.best_loss = lb.total;
        result.best_prompt = prompt;
      }
      evals.push_back(EvalRecord{std::move(resp), lb.total});
      return lb.total;
    };

    StepResult sr = momentum_step(result.state, result.sigma, oracle, cfg, step_seed);
    result.queries += static_cast<std::int64_t>(evals.size());

    StepTrace trace;
    trace.step = step;
    trace.queries = result.queries;
    trace.all_blocked = !evals.empty();
    double loss_sum = 0.0;
    for (const auto& e : evals) {
      loss_sum += e.loss;
      trace.all_blocked = trace.all_blocked && e.response.blocked();
    }
    trace.loss = evals.empty() ? 0.0 : loss_sum / static_cast<double>(evals.size());

    if (sr.exhausted) {
      // Record whatever the aborted step consumed so the trace accounts for
      // every query, then stop; parameters and state stay untouched.
      result.exhausted = true;
      if (!evals.empty()) result.trace.push_back(trace);
      break;
    }

    const bool zero_history = (result.state.history.array() == 0.0).all();
    if (cfg.use_restart && trace.all_blocked &&
        (result.state.step == 0 || zero_history)) {
      // Recompute the step on noise substitutes for the cached responses.
      // Same seed, same perturbations, same evaluation order; no re-query.
      std::size_t next = 0;
      const ScalarOracle substitute_oracle = [&](const ParamVector&) -> double {
        const EvalRecord& rec = evals.at(next);
        const Image img =
            rec.response.blocked()
                ? restart_substitute(rec.response,
                                     mix_seed(step_seed, "restart", next), pipe.space)
                : rec.response.image;
        ++next;
        return multimodal_loss_on_image(img, pipe.target_prompt, pipe.target_image,
                                        pipe.space, pipe.terms)
            .total;
      };
      sr = momentum_step(result.state, result.sigma, substitute_oracle, cfg, step_seed);
      trace.restarted = true;
    }

    result.sigma = std::move(sr.sigma);
    result.state = std::move(sr.state);
    result.trace.push_back(trace);
  }

  result.final_prompt = decode_at(result.sigma, pipe);
  if (result.best_prompt.empty()) result.best_prompt = result.final_prompt;
  return result;
}

}  // namespace zeroprompt
