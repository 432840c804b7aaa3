#pragma once

#include "zeroprompt/semantic_space.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace zeroprompt {

/// Two-stage linear projection that distills a target-prompt embedding into
/// an injection matrix for the prompt encoder. Kept out of the trainable
/// parameter vector unless `trainable` is set.
struct SensitiveProjection {
  Matrix low;   // d x d_low
  Matrix high;  // d_low x (rows * cols of the sensitive embedding)
  bool trainable = false;
};

struct SensitiveEmbedding {
  Matrix values;  // M x d_s
};

enum class Activation { tanh, identity };

/// A small layered encoder over a fixed random prompt. The sensitive
/// embedding is added after `injection_layer` with weight
/// `injection_weight`, then the remaining layers run as usual.
struct PromptEncoder {
  struct Layer {
    Matrix weight;  // d_s x d_s
    Vector bias;    // d_s
  };
  std::vector<Layer> layers;        // N blocks
  int injection_layer = 1;          // l, in [1, N-1]
  double injection_weight = 1.0;    // omega
  TokenSequence random_prompt;      // length L == M
  Matrix input_embed;               // vocab x d_s lookup, frozen
  Activation activation = Activation::tanh;

  int num_layers() const { return static_cast<int>(layers.size()); }
  Index width() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  Index prompt_rows() const { return static_cast<Index>(random_prompt.size()); }
};

struct LearnableEmbedding {
  Matrix values;  // M x d_s
};

struct EncoderDims {
  int num_layers = 4;      // N
  int injection_layer = 2; // l
  Index prompt_len = 8;    // L == M
  Index hidden_dim = 16;   // d_s
  Index low_dim = 16;      // d_low
};

SensitiveProjection make_sensitive_projection(Index text_dim, const EncoderDims& dims,
                                              std::uint64_t seed);

/// Layer weights/biases ~ N(0, init_stddev^2); the input embedding table is
/// seeded separately and is not trainable.
PromptEncoder make_prompt_encoder(const EncoderDims& dims, Index vocab_size,
                                  TokenSequence random_prompt, std::uint64_t seed,
                                  double injection_weight = 1.0,
                                  double init_stddev = 0.1);

/// reshape(high^T (low^T e_tar)) row-major into the M x d_s injection shape.
/// Linear in e_tar.
SensitiveEmbedding project_sensitive(const TextEmbedding& e_tar,
                                     const SensitiveProjection& proj,
                                     Index rows, Index cols);

/// Runs the full encoder with the sensitive embedding added after the
/// injection layer. With injection_weight == 0 the result is bit-identical
/// to encode_plain.
LearnableEmbedding encode_with_injection(const PromptEncoder& enc,
                                         const SensitiveEmbedding& e_sen);

/// The same encoder with no injection at all.
LearnableEmbedding encode_plain(const PromptEncoder& enc);

/// Describes how trainable fields map into the flat vector. Slices are laid
/// out in declaration order; matrices are stored row-major.
struct ParamLayout {
  struct Slice {
    std::string field;
    Index offset = 0;
    Index rows = 0;
    Index cols = 0;
  };
  std::vector<Slice> slices;
  bool includes_projection = false;
  Index size = 0;
};

/// The optimizer's sole state: a flat view of every trainable parameter.
/// Copies share the immutable layout. `layout` may be null for raw vectors
/// used in algebraic tests.
struct ParamVector {
  Vector values;
  std::shared_ptr<const ParamLayout> layout;

  Index size() const { return values.size(); }
};

/// Flattens encoder layers (and optionally the projection) into one vector.
/// unflatten_params(flatten_params(...)) restores the inputs bit-exactly.
ParamVector flatten_params(const SensitiveProjection& proj, const PromptEncoder& enc,
                           bool include_projection);

/// Writes the trainable slices of `v` back into `proj` / `enc`. Fields not
/// covered by the layout (prompt, input table, hyperparameters) are left
/// untouched. Throws std::invalid_argument if the layout is missing or the
/// shapes disagree.
void unflatten_params(const ParamVector& v, SensitiveProjection& proj,
                      PromptEncoder& enc);

}  // namespace zeroprompt
