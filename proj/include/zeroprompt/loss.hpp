#pragma once

#include "zeroprompt/semantic_space.hpp"
#include "zeroprompt/victim.hpp"

namespace zeroprompt {

/// Which similarity terms participate in the objective. Both by default;
/// the ablation modes switch one off.
struct LossTerms {
  bool text_image = true;
  bool image_image = true;

  int active() const { return (text_image ? 1 : 0) + (image_image ? 1 : 0); }
};

/// Per-term maximum: 1 - cos ranges over [0, 2], and a blocked response
/// scores exactly this per active term. Equal losses across blocked
/// evaluations are what make finite differences vanish.
inline constexpr double kBlockedTermLoss = 2.0;

struct LossBreakdown {
  double text_image = 0.0;   // in [0,2]; 2.0 sentinel when blocked
  double image_image = 0.0;  // in [0,2]; 2.0 sentinel when blocked
  double total = 0.0;        // sum of active terms; 2 * active() when blocked
  bool blocked = false;
};

/// 1 - cos(text_encode(p_tar), image_encode(i_gen)). Throws
/// std::invalid_argument on a black image. A degenerate (near-zero-norm)
/// embedding scores the 2.0 sentinel and logs a warning.
double text_image_loss(const TokenSequence& p_tar, const Image& i_gen,
                       const SemanticSpace& space);

/// 1 - cos(image_encode(i_tar), image_encode(i_gen)). Symmetric in its two
/// images. Throws std::invalid_argument if either image is black.
double image_image_loss(const Image& i_tar, const Image& i_gen,
                        const SemanticSpace& space);

/// The full objective over a victim response. Blocked responses never touch
/// the cosines: every active term scores the 2.0 sentinel, so any two
/// blocked evaluations compare equal.
LossBreakdown multimodal_loss(const VictimResponse& resp, const TokenSequence& p_tar,
                              const Image& i_tar, const SemanticSpace& space,
                              const LossTerms& terms = {});

/// Same objective evaluated on an explicit generated image (used when a
/// blocked response has been substituted by a noise image).
LossBreakdown multimodal_loss_on_image(const Image& i_gen, const TokenSequence& p_tar,
                                       const Image& i_tar, const SemanticSpace& space,
                                       const LossTerms& terms = {});

}  // namespace zeroprompt
