#include "zeroprompt/loss.hpp"

#include <iostream>

namespace zeroprompt {

namespace {

double one_minus_cosine(const Vector& a, const Vector& b, const char* what) {
  const auto cos = cosine(a, b);
  if (!cos.has_value()) {
    std::cerr << "[zeroprompt] warning: near-zero-norm embedding in " << what
              << "; scoring sentinel " << kBlockedTermLoss << "\n";
    return kBlockedTermLoss;
  }
  return 1.0 - *cos;
}

}  // namespace

double text_image_loss(const TokenSequence& p_tar, const Image& i_gen,
                       const SemanticSpace& space) {
  if (i_gen.is_black)
    throw std::invalid_argument("text_image_loss: black image; use multimodal_loss");
  return one_minus_cosine(text_encode(p_tar, space).values,
                          image_encode(i_gen, space).values, "text_image_loss");
}

double image_image_loss(const Image& i_tar, const Image& i_gen,
                        const SemanticSpace& space) {
  if (i_tar.is_black || i_gen.is_black)
    throw std::invalid_argument("image_image_loss: black image; use multimodal_loss");
  return one_minus_cosine(image_encode(i_tar, space).values,
                          image_encode(i_gen, space).values, "image_image_loss");
}

LossBreakdown multimodal_loss(const VictimResponse& resp, const TokenSequence& p_tar,
                              const Image& i_tar, const SemanticSpace& space,
                              const LossTerms& terms) {
  if (i_tar.is_black)
    throw std::invalid_argument("multimodal_loss: target image must not be black");
  if (resp.blocked()) {
    LossBreakdown out;
    out.blocked = true;
    out.text_image = terms.text_image ? kBlockedTermLoss : 0.0;
    out.image_image = terms.image_image ? kBlockedTermLoss : 0.0;
    out.total = kBlockedTermLoss * terms.active();
    return out;
  }
  return multimodal_loss_on_image(resp.image, p_tar, i_tar, space, terms);
}

LossBreakdown multimodal_loss_on_image(const Image& i_gen, const TokenSequence& p_tar,
                                       const Image& i_tar, const SemanticSpace& space,
                                       const LossTerms& terms) {
  LossBreakdown out;
  if (terms.text_image) out.text_image = text_image_loss(p_tar, i_gen, space);
  if (terms.image_image) out.image_image = image_image_loss(i_tar, i_gen, space);
  out.total = out.text_image + out.image_image;
  return out;
}

}  // namespace zeroprompt
