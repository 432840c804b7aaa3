#include "zeroprompt/decoder.hpp"

#include <cmath>

namespace zeroprompt {

Decoder make_decoder(const SemanticSpace& space, Index hidden_dim, Index out_len,
                     std::uint64_t seed, const DecoderGains& gains) {
  if (out_len < 1) throw std::invalid_argument("make_decoder: out_len must be >= 1");
  Decoder dec;
  dec.seed = seed;
  dec.out_len = out_len;
  dec.proj.reserve(static_cast<std::size_t>(out_len));
  dec.offset.reserve(static_cast<std::size_t>(out_len));
  const Index vocab = space.dims.vocab_size;
  const Index d = space.dims.text_dim;
  for (Index k = 0; k < out_len; ++k) {
    Matrix m(vocab, hidden_dim + d);
    m.leftCols(hidden_dim) = normal_matrix(
        mix_seed(seed, "proj_pe", static_cast<std::uint64_t>(k)), vocab, hidden_dim,
        gains.learnable / std::sqrt(static_cast<double>(hidden_dim)));
    m.rightCols(d) = gains.target * space.token_table;
    dec.proj.push_back(std::move(m));
    dec.offset.push_back(normal_vector(
        mix_seed(seed, "offset", static_cast<std::uint64_t>(k)), vocab, gains.offset));
  }
  return dec;
}

TokenSequence decode_adversarial(const LearnableEmbedding& e_pe,
                                 const TokenSequence& p_tar, const Decoder& dec,
                                 const SemanticSpace& space) {
  if (dec.proj.empty() || dec.proj.size() != dec.offset.size())
    throw std::invalid_argument("decode_adversarial: decoder is empty or inconsistent");
  const Index ctx_len = dec.proj.front().cols();
  const Index hidden = ctx_len - space.dims.text_dim;
  if (e_pe.values.cols() != hidden)
    throw std::invalid_argument("decode_adversarial: embedding width disagrees");
  if (e_pe.values.rows() < 1)
    throw std::invalid_argument("decode_adversarial: empty embedding");

  Vector ctx(ctx_len);
  ctx.head(hidden) = e_pe.values.colwise().mean();
  ctx.tail(space.dims.text_dim) = text_encode(p_tar, space).values;

  TokenSequence out;
  out.reserve(static_cast<std::size_t>(dec.out_len));
  for (Index k = 0; k < dec.out_len; ++k) {
    const Vector logits = dec.proj[static_cast<std::size_t>(k)] * ctx +
                          dec.offset[static_cast<std::size_t>(k)];
    // Strict > keeps the lowest id on ties.
    Index best = 0;
    for (Index t = 1; t < logits.size(); ++t)
      if (logits[t] > logits[best]) best = t;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace zeroprompt
