#pragma once

#include "zeroprompt/semantic_space.hpp"

#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

namespace zeroprompt {

/// Input-stage gate: blocks any prompt containing a blocklisted token.
struct PromptFilterConfig {
  std::set<int> blocklist;
};

/// Output-stage gate: blocks an image whose embedding is too close to any
/// forbidden concept direction. Concepts are unit norm; the boundary is
/// strict (cos == threshold passes).
struct CheckerConfig {
  std::vector<Vector> concepts;  // embed_dim each, unit norm
  double threshold = 0.5;        // tau, in (0,1)
};

enum class VictimOutcome { image, blocked_by_filter, blocked_by_checker };

/// What the black box returns. Blocked outcomes carry a black image
/// (all-zero latent), which is the only thing a caller may learn from them.
struct VictimResponse {
  VictimOutcome outcome = VictimOutcome::image;
  Image image;

  bool blocked() const { return outcome != VictimOutcome::image; }
};

struct BudgetExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-task query accounting. count never exceeds budget.
struct QueryLedger {
  std::int64_t count = 0;
  std::int64_t budget = 0;

  std::int64_t remaining() const { return budget - count; }
};

bool prompt_filter_blocks(const TokenSequence& p, const PromptFilterConfig& cfg);

/// Throws std::invalid_argument on a black image; the checker only ever
/// sees generated images.
bool safety_checker_blocks(const Image& img, const CheckerConfig& cfg,
                           const SemanticSpace& space);

/// One black-box query: charge the ledger, run the filter, generate, run
/// the checker. Blocked outcomes return a black image. Throws
/// BudgetExhausted when the ledger has no room left.
VictimResponse victim_query(const TokenSequence& p_adv, std::uint64_t gen_seed,
                            QueryLedger& ledger, const PromptFilterConfig& filter,
                            const CheckerConfig& checker, const SemanticSpace& space);

/// The ungated auxiliary model: generates from any prompt, never blocks,
/// never returns black, and does not touch any ledger.
Image auxiliary_generate(const TokenSequence& p_tar, std::uint64_t gen_seed,
                         const SemanticSpace& space);

/// Forbidden-concept directions derived from the blocklisted tokens pushed
/// through the (noise-free) generator and image encoder, so the checker and
/// the semantic space agree about what "sensitive" means.
CheckerConfig make_checker_config(const SemanticSpace& space,
                                  const std::set<int>& blocklist, double threshold);

/// The auxiliary model's space: same encoders; the generator matrix is
/// perturbed by `mismatch` times seeded noise (0 keeps it identical, which
/// is the default victim/auxiliary relationship).
SemanticSpace make_auxiliary_space(const SemanticSpace& victim_space, double mismatch,
                                   std::uint64_t seed);

}  // namespace zeroprompt
