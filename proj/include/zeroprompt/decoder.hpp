#pragma once

#include "zeroprompt/prompt_encoder.hpp"
#include "zeroprompt/semantic_space.hpp"

#include <cstdint>
#include <vector>

namespace zeroprompt {

/// Frozen surrogate for a pretrained language model: per output position, a
/// linear logit map over [pooled learnable embedding ; pooled target prompt]
/// followed by greedy argmax with lowest-id tie break. Deterministic, and
/// piecewise constant in its continuous inputs, which is what forces the
/// optimizer upstream to be zeroth-order.
struct Decoder {
  std::uint64_t seed = 0;
  Index out_len = 12;
  std::vector<Matrix> proj;    // out_len matrices, vocab x (d_s + d)
  std::vector<Vector> offset;  // out_len vectors, vocab
};

struct DecoderGains {
  /// Couples the target-prompt half of the context to token similarity, so
  /// decoded tokens start out semantically near the target prompt.
  double target = 0.7;
  /// Scale of the learnable-embedding half; controls how far the optimizer
  /// can move the decoded tokens.
  double learnable = 0.8;
  /// Per-position logit offsets; keeps the positions from all decoding the
  /// same token.
  double offset = 0.05;
};

Decoder make_decoder(const SemanticSpace& space, Index hidden_dim, Index out_len,
                     std::uint64_t seed, const DecoderGains& gains = {});

/// context = [row-mean(e_pe) ; text_encode(p_tar)]; position k emits
/// argmax(proj[k] * context + offset[k]), ties to the lowest token id.
TokenSequence decode_adversarial(const LearnableEmbedding& e_pe,
                                 const TokenSequence& p_tar, const Decoder& dec,
                                 const SemanticSpace& space);

}  // namespace zeroprompt
