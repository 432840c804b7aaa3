#include "zeroprompt/victim.hpp"

namespace zeroprompt {

bool prompt_filter_blocks(const TokenSequence& p, const PromptFilterConfig& cfg) {
  for (int t : p)
    if (cfg.blocklist.count(t) > 0) return true;
  return false;
}

bool safety_checker_blocks(const Image& img, const CheckerConfig& cfg,
                           const SemanticSpace& space) {
  if (img.is_black)
    throw std::invalid_argument("safety_checker_blocks: checker never sees black images");
  const ImageEmbedding emb = image_encode(img, space);
  for (const Vector& concept_dir : cfg.concepts) {
    const auto cos = cosine(emb.values, concept_dir);
    if (cos.has_value() && *cos > cfg.threshold) return true;
  }
  return false;
}

VictimResponse victim_query(const TokenSequence& p_adv, std::uint64_t gen_seed,
                            QueryLedger& ledger, const PromptFilterConfig& filter,
                            const CheckerConfig& checker, const SemanticSpace& space) {
  if (ledger.count >= ledger.budget)
    throw BudgetExhausted("victim_query: query budget exhausted");
  ledger.count += 1;

  if (prompt_filter_blocks(p_adv, filter))
    return VictimResponse{VictimOutcome::blocked_by_filter,
                          black_image(space.dims.image_dim)};

  Image img = generate_image(text_encode(p_adv, space), gen_seed, space);
  if (safety_checker_blocks(img, checker, space))
    return VictimResponse{VictimOutcome::blocked_by_checker,
                          black_image(space.dims.image_dim)};
  return VictimResponse{VictimOutcome::image, std::move(img)};
}

Image auxiliary_generate(const TokenSequence& p_tar, std::uint64_t gen_seed,
                         const SemanticSpace& space) {
  return generate_image(text_encode(p_tar, space), gen_seed, space);
}

CheckerConfig make_checker_config(const SemanticSpace& space,
                                  const std::set<int>& blocklist, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("make_checker_config: threshold must lie in (0,1)");
  CheckerConfig cfg;
  cfg.threshold = threshold;
  for (int t : blocklist) {
    if (t < 0 || t >= space.dims.vocab_size)
      throw std::out_of_range("make_checker_config: blocklisted token outside vocabulary");
    Vector dir = space.image_enc_matrix *
                 (space.image_gen_matrix * space.token_table.row(t).transpose());
    const double norm = dir.norm();
    if (norm < kNormEpsilon)
      throw std::invalid_argument("make_checker_config: degenerate concept direction");
    cfg.concepts.push_back(dir / norm);
  }
  return cfg;
}

SemanticSpace make_auxiliary_space(const SemanticSpace& victim_space, double mismatch,
                                   std::uint64_t seed) {
  SemanticSpace aux = victim_space;
  if (mismatch != 0.0) {
    aux.image_gen_matrix +=
        mismatch * normal_matrix(mix_seed(seed, "aux_gen_mismatch"),
                                 aux.image_gen_matrix.rows(), aux.image_gen_matrix.cols());
  }
  return aux;
}

}  // namespace zeroprompt
