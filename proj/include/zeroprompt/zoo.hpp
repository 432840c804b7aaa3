#pragma once

#include "zeroprompt/decoder.hpp"
#include "zeroprompt/loss.hpp"
#include "zeroprompt/prompt_encoder.hpp"
#include "zeroprompt/semantic_space.hpp"
#include "zeroprompt/victim.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace zeroprompt {

enum class PerturbationDist { rademacher, gaussian };

/// Which update rule drives the search.
///  momentum: lookahead two-point estimate blended with the history vector,
///            plus the vanishing override that coasts through blocked
///            streaks on the previous direction.
///  plain:    classic two-point descent evaluated at the current point with
///            no history at all.
enum class GradientVariant { momentum, plain };

struct ZooConfig {
  double probe_scale = 0.05;    // finite-difference radius, in (0,1]
  double history_ratio = 0.9;   // weight on the previous update, in [0,1)
  double learning_rate = 0.5;   // scales the fresh estimate, > 0
  PerturbationDist dist = PerturbationDist::rademacher;
  int num_probe_pairs = 4;      // two-point estimates averaged per step
  int max_steps = 60;
  GradientVariant variant = GradientVariant::momentum;
  /// Apply the literal blended recurrence even when the fresh estimate is
  /// exactly zero (so a blocked streak decays the update geometrically
  /// instead of holding it). Ablation switch.
  bool strict_recurrence = false;
  /// Substitute noise images for blocked responses when the very first
  /// probes (or any zero-history state) are fully blocked.
  bool use_restart = true;
};

/// Carried between steps. history is the previous update vector; it is all
/// zeros at step 0.
struct GradientState {
  Vector history;
  int step = 0;
  int vanished_streak = 0;
};

GradientState make_gradient_state(Index dim);

/// A Rademacher probe direction (every entry +1 or -1). The Gaussian option
/// is rejected at runtime: the estimator divides componentwise by the
/// perturbation, and a Gaussian there has no finite inverse moments.
Vector sample_perturbation(Index dim, PerturbationDist dist, std::uint64_t rng_seed);

using ScalarOracle = std::function<double(const ParamVector&)>;

/// Two-point simultaneous-perturbation estimate:
///   [loss(sigma + c*delta) - loss(sigma - c*delta)] / (2c * delta_i)
/// componentwise. Costs exactly two oracle evaluations. Equal losses (for
/// instance, two blocked responses) give the exact zero vector.
Vector two_point_estimate(const ScalarOracle& loss_at, const ParamVector& sigma,
                          double probe_scale, const Vector& delta);

struct StepResult {
  ParamVector sigma;    // updated parameters (unchanged when exhausted)
  GradientState state;  // updated state (unchanged when exhausted)
  Vector estimate;      // averaged two-point estimate
  Vector update;        // applied update vector (new history)
  bool vanished = false;   // estimate was exactly the zero vector
  bool exhausted = false;  // oracle ran out of budget mid-step
};

/// One optimizer step. Draws num_probe_pairs perturbations from rng_seed,
/// averages their two-point estimates (momentum variant evaluates at
/// sigma + history), applies the recurrence
///   update = history_ratio * history + (1 - history_ratio) * learning_rate * estimate
/// with the vanishing override (estimate == 0 and history != 0 keeps the
/// history vector unchanged unless strict_recurrence), then descends:
/// sigma' = sigma - update. BudgetExhausted from the oracle aborts the step
/// and returns the inputs with the exhausted flag set.
StepResult momentum_step(const GradientState& state, const ParamVector& sigma,
                         const ScalarOracle& loss_at, const ZooConfig& cfg,
                         std::uint64_t rng_seed);

/// A fresh standard-normal image standing in for a blocked response during
/// restart, mirroring how diffusion samplers start from pure noise. Throws
/// std::invalid_argument if the response was not blocked.
Image restart_substitute(const VictimResponse& resp, std::uint64_t rng_seed,
                         const SemanticSpace& space);

/// Everything the attacker owns, plus the black box. The optimizer touches
/// the victim only through `query`; gates and generator internals stay on
/// the other side of that function.
struct AttackPipeline {
  SensitiveProjection projection;
  PromptEncoder encoder;
  Decoder decoder;
  SemanticSpace space;
  TokenSequence target_prompt;
  Image target_image;
  LossTerms terms;
  std::function<VictimResponse(const TokenSequence&, std::uint64_t)> query;
  std::uint64_t seed = 0;
  bool train_projection = false;
};

struct StepTrace {
  int step = 0;
  double loss = 0.0;        // mean loss over this step's real oracle evaluations
  bool all_blocked = false; // every evaluation this step came back blocked
  bool restarted = false;   // noise substitution was applied this step
  std::int64_t queries = 0; // cumulative victim queries after this step
};

struct OptimizeResult {
  ParamVector sigma;
  GradientState state;
  std::vector<StepTrace> trace;
  bool exhausted = false;
  std::int64_t queries = 0;      // total victim queries consumed
  TokenSequence final_prompt;    // decoded at the final parameters (no query)
  TokenSequence best_prompt;     // lowest-loss prompt actually sent to the victim
  double best_loss = std::numeric_limits<double>::infinity();
};

/// Decodes the adversarial prompt for a given parameter vector: unflatten,
/// project the target embedding, encode with injection, decode.
TokenSequence decode_at(const ParamVector& sigma, const AttackPipeline& pipe);

/// The full attack loop. Per step, every oracle evaluation decodes a prompt
/// and queries the victim with a step-specific generation seed. When the
/// restart condition holds (zero history and every probe of the step came
/// back blocked), the step is recomputed from the cached responses with
/// noise images substituted; no additional queries are spent.
OptimizeResult optimize_attack(const AttackPipeline& pipe, const ZooConfig& cfg);

}  // namespace zeroprompt
