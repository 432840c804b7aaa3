#pragma once

#include "zeroprompt/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace zeroprompt {

/// Token ids into the shared vocabulary. Always nonempty when fed to an
/// encoder; ids live in [0, vocab_size).
using TokenSequence = std::vector<int>;

struct SpaceDims {
  Index vocab_size = 256;  // V
  Index text_dim = 32;     // d
  Index image_dim = 48;    // latent dimension
  Index embed_dim = 32;    // image-embedding dimension
};

/// The shared toy semantic space: a frozen text encoder over a token table,
/// a linear image generator, and a linear image encoder. All matrices are a
/// pure function of the seed; everything downstream treats this as opaque.
struct SemanticSpace {
  std::uint64_t seed = 0;
  SpaceDims dims;
  Matrix token_table;       // V x d, rows unit-norm
  Matrix image_gen_matrix;  // image_dim x d
  Matrix image_enc_matrix;  // embed_dim x image_dim
  double noise_scale = 0.05;
};

/// Builds the space from a seed. Same seed, bit-identical matrices. The
/// image encoder is the generator's pseudoinverse, so encoding a generated
/// image lands next to the text embedding that produced it (a shared
/// text-image embedding space). Requires embed_dim == text_dim and
/// image_dim >= text_dim.
SemanticSpace make_semantic_space(const SpaceDims& dims, std::uint64_t seed,
                                  double noise_scale = 0.05);

struct TextEmbedding {
  Vector values;  // length d
};

struct Image {
  Vector latent;  // length image_dim
  bool is_black = false;
};

/// The canonical blocked output: all-zero latent.
Image black_image(Index image_dim);

struct ImageEmbedding {
  Vector values;  // length embed_dim
};

/// Mean-pools the token-table rows selected by `tokens`.
/// Throws std::invalid_argument on an empty sequence and std::out_of_range
/// on a token id outside [0, V).
TextEmbedding text_encode(const TokenSequence& tokens, const SemanticSpace& space);

/// latent = G * e + noise_scale * eta(gen_seed), eta ~ N(0, I).
/// Deterministic given (e, gen_seed). Throws std::invalid_argument on a
/// non-finite embedding and std::overflow_error if the result is non-finite.
Image generate_image(const TextEmbedding& e, std::uint64_t gen_seed,
                     const SemanticSpace& space);

/// values = E * latent. A black image maps to the exact zero vector.
ImageEmbedding image_encode(const Image& img, const SemanticSpace& space);

inline constexpr double kNormEpsilon = 1e-12;

/// Cosine similarity, or nullopt when either norm falls below eps (the
/// caller decides what "undefined" means; see the loss module's sentinel
/// policy). Throws std::invalid_argument on length mismatch. Accepts any
/// dense Eigen expressions.
template <typename DerivedA, typename DerivedB>
std::optional<double> cosine(const Eigen::MatrixBase<DerivedA>& a,
                             const Eigen::MatrixBase<DerivedB>& b,
                             double eps = kNormEpsilon) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na < eps || nb < eps) return std::nullopt;
  return a.reshaped().dot(b.reshaped()) / (na * nb);
}

}  // namespace zeroprompt
