#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

namespace zeroprompt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Deterministic 64-bit generator (splitmix64). Every stochastic quantity in
/// this project is drawn from one of these, seeded explicitly, so that two
/// runs with the same seeds are bit-identical. No library distributions are
/// used anywhere: normals come from Box-Muller over 53-bit uniforms, which
/// pins the exact bit pattern of every draw to the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();

  /// Standard normal via Box-Muller. Draws are produced in pairs; the spare
  /// is cached, so a single Rng yields a fixed sequence regardless of call
  /// sites.
  double normal();

  /// +1 or -1, equiprobable.
  double rademacher();

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent child seed from a parent seed and a tag. Used to
/// give every matrix, task, step and probe its own stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index);

/// Matrix with i.i.d. N(0, stddev^2) entries, filled row-major from a fresh
/// stream seeded by `seed`.
Matrix normal_matrix(std::uint64_t seed, Index rows, Index cols, double stddev = 1.0);

/// Vector with i.i.d. N(0, stddev^2) entries.
Vector normal_vector(std::uint64_t seed, Index n, double stddev = 1.0);

}  // namespace zeroprompt
