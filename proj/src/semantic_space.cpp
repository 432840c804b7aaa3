#include "zeroprompt/semantic_space.hpp"

#include <cmath>

namespace zeroprompt {

SemanticSpace make_semantic_space(const SpaceDims& dims, std::uint64_t seed,
                                  double noise_scale) {
  if (dims.vocab_size < 1 || dims.text_dim < 1 || dims.image_dim < 1 ||
      dims.embed_dim < 1)
    throw std::invalid_argument("make_semantic_space: dimensions must be positive");
  if (noise_scale < 0.0)
    throw std::invalid_argument("make_semantic_space: noise_scale must be nonnegative");

  if (dims.embed_dim != dims.text_dim)
    throw std::invalid_argument(
        "make_semantic_space: embed_dim must equal text_dim (the text and image "
        "embeddings share one space)");
  if (dims.image_dim < dims.text_dim)
    throw std::invalid_argument(
        "make_semantic_space: image_dim must be at least text_dim");

  SemanticSpace space;
  space.seed = seed;
  space.dims = dims;
  space.noise_scale = noise_scale;
  space.token_table =
      normal_matrix(mix_seed(seed, "token_table"), dims.vocab_size, dims.text_dim);
  space.token_table.rowwise().normalize();
  space.image_gen_matrix =
      normal_matrix(mix_seed(seed, "image_gen"), dims.image_dim, dims.text_dim);
  // The image encoder inverts the generator (enc * gen == identity), so text
  // and image embeddings live in one shared space, the way jointly trained
  // encoder pairs behave. Without this the text-image similarity would
  // compare unrelated coordinate systems.
  space.image_enc_matrix = space.image_gen_matrix.completeOrthogonalDecomposition()
                               .pseudoInverse();
  return space;
}

Image black_image(Index image_dim) {
  return Image{Vector::Zero(image_dim), true};
}

TextEmbedding text_encode(const TokenSequence& tokens, const SemanticSpace& space) {
  if (tokens.empty())
    throw std::invalid_argument("text_encode: empty token sequence");
  Vector sum = Vector::Zero(space.dims.text_dim);
  for (int t : tokens) {
    if (t < 0 || t >= space.dims.vocab_size)
      throw std::out_of_range("text_encode: token id outside vocabulary");
    sum += space.token_table.row(t);
  }
  return TextEmbedding{sum / static_cast<double>(tokens.size())};
}

Image generate_image(const TextEmbedding& e, std::uint64_t gen_seed,
                     const SemanticSpace& space) {
  if (e.values.size() != space.dims.text_dim)
    throw std::invalid_argument("generate_image: embedding has wrong length");
  if (!e.values.allFinite())
    throw std::invalid_argument("generate_image: embedding must be finite");
  Vector latent = space.image_gen_matrix * e.values;
  if (space.noise_scale > 0.0)
    latent += space.noise_scale * normal_vector(gen_seed, space.dims.image_dim);
  if (!latent.allFinite())
    throw std::overflow_error("generate_image: non-finite latent");
  return Image{std::move(latent), false};
}

ImageEmbedding image_encode(const Image& img, const SemanticSpace& space) {
  if (img.latent.size() != space.dims.image_dim)
    throw std::invalid_argument("image_encode: latent has wrong length");
  return ImageEmbedding{space.image_enc_matrix * img.latent};
}

}  // namespace zeroprompt
