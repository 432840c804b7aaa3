#include "zeroprompt/zoo.hpp"

#include <doctest.h>

#include <cmath>

using namespace zeroprompt;

namespace {

ParamVector raw(Vector v) { return ParamVector{std::move(v), nullptr}; }

ScalarOracle quadratic() {
  return [](const ParamVector& x) { return x.values.squaredNorm(); };
}

// Enumerates every sign vector of dimension d, lowest bit = coordinate 0.
Vector sign_vector(unsigned bits, Index d) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = (bits >> i) & 1u ? 1.0 : -1.0;
  return v;
}

}  // namespace

TEST_CASE("perturbations are Rademacher and seeded") {
  const Vector d1 = sample_perturbation(64, PerturbationDist::rademacher, 5);
  const Vector d2 = sample_perturbation(64, PerturbationDist::rademacher, 5);
  CHECK(d1 == d2);
  CHECK(d1 != sample_perturbation(64, PerturbationDist::rademacher, 6));
  for (Index i = 0; i < d1.size(); ++i) CHECK(std::abs(d1[i]) == 1.0);
}

TEST_CASE("gaussian perturbations are rejected for this estimator") {
  CHECK_THROWS_AS(sample_perturbation(8, PerturbationDist::gaussian, 1),
                  std::invalid_argument);
}

TEST_CASE("perturbation coordinates are mean-zero empirically") {
  const Index d = 8;
  Vector mean = Vector::Zero(d);
  for (int i = 0; i < 10000; ++i)
    mean += sample_perturbation(d, PerturbationDist::rademacher,
                                mix_seed(400, "clt", static_cast<std::uint64_t>(i)));
  mean /= 10000.0;
  // 5-sigma bound for a mean of 10^4 Rademacher draws.
  CHECK(mean.lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("two-point estimate on the hand-worked quadratic") {
  const Vector delta = Vector::Ones(2);
  const Vector g = two_point_estimate(quadratic(), raw(Vector{{1.0, 0.0}}), 0.1, delta);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("equal losses give the exact zero vector") {
  SUBCASE("blocked-style constant sentinel") {
    const ScalarOracle blocked = [](const ParamVector&) { return 4.0; };
    const Vector g = two_point_estimate(blocked, raw(Vector::Zero(6)), 0.05,
                                        sample_perturbation(6, PerturbationDist::rademacher, 3));
    CHECK((g.array() == 0.0).all());
  }
  SUBCASE("any constant loss") {
    const ScalarOracle constant = [](const ParamVector&) { return 1.2345; };
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Vector g = two_point_estimate(constant, raw(Vector::Zero(4)), 0.3,
                                          sample_perturbation(4, PerturbationDist::rademacher, s));
      CHECK((g.array() == 0.0).all());
    }
  }
}

TEST_CASE("the estimate costs exactly two evaluations") {
  int calls = 0;
  const ScalarOracle counter = [&calls](const ParamVector& x) {
    ++calls;
    return x.values.sum();
  };
  (void)two_point_estimate(counter, raw(Vector::Zero(5)), 0.1,
                           sample_perturbation(5, PerturbationDist::rademacher, 1));
  CHECK(calls == 2);
}

TEST_CASE("linear objectives: zero truncation error at any radius") {
  // For L(x) = a.x the centered difference is exact, so the estimate equals
  // delta * (a.delta) exactly -- the rank-one projection of a, not a itself.
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector a = normal_vector(rng.next_u64(), 16);
    const ScalarOracle linear = [&a](const ParamVector& x) { return a.dot(x.values); };
    const Vector delta = sample_perturbation(16, PerturbationDist::rademacher, rng.next_u64());
    const double c = 0.01 + rng.uniform01();
    const Vector g =
        two_point_estimate(linear, raw(normal_vector(rng.next_u64(), 16)), c, delta);
    const Vector analytic = delta * a.dot(delta);
    CHECK((g - analytic).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("linear objectives: exactly unbiased over the full sign enumeration") {
  const Index d = 8;
  const Vector a = normal_vector(99, d);
  const ScalarOracle linear = [&a](const ParamVector& x) { return a.dot(x.values); };
  const ParamVector at = raw(normal_vector(100, d));
  Vector mean = Vector::Zero(d);
  for (unsigned bits = 0; bits < (1u << d); ++bits)
    mean += two_point_estimate(linear, at, 0.37, sign_vector(bits, d));
  mean /= static_cast<double>(1u << d);
  CHECK((mean - a).lpNorm<Eigen::Infinity>() < 1e-12);
}

namespace {

// Smallest seed whose first probe draw is the all-ones sign vector, so the
// recurrence checks below see an exactly known estimate.
std::uint64_t seed_with_all_ones_delta(Index d) {
  for (std::uint64_t seed = 0;; ++seed) {
    const Vector delta = sample_perturbation(d, PerturbationDist::rademacher,
                                             mix_seed(seed, "probe", std::uint64_t{0}));
    if ((delta.array() == 1.0).all()) return seed;
  }
}

}  // namespace

TEST_CASE("hand recurrence: history (1,1), estimate (2,2), update (1.0,1.0)") {
  ZooConfig cfg;
  cfg.history_ratio = 0.9;
  cfg.learning_rate = 0.5;
  cfg.num_probe_pairs = 1;
  cfg.probe_scale = 0.25;  // dyadic radius keeps the arithmetic exact
  // L(x) = sum(x): with delta = (1,1) the estimate is delta*(grad.delta) = (2,2).
  const ScalarOracle linear = [](const ParamVector& x) { return x.values.sum(); };
  const std::uint64_t seed = seed_with_all_ones_delta(2);
  GradientState state{Vector::Ones(2), 0, 0};
  const StepResult r = momentum_step(state, raw(Vector::Zero(2)), linear, cfg, seed);
  // update = 0.9*(1,1) + 0.1*0.5*(2,2) = (1.0,1.0) exactly.
  CHECK(r.estimate == Vector::Constant(2, 2.0));
  CHECK(r.update == Vector::Constant(2, 1.0));
  CHECK(r.sigma.values == Vector::Constant(2, -1.0));
  CHECK(r.state.history == r.update);
  CHECK(r.state.step == 1);
  CHECK_FALSE(r.vanished);
}

TEST_CASE("vanishing estimate keeps the history vector exactly") {
  ZooConfig cfg;
  cfg.num_probe_pairs = 2;
  const ScalarOracle blocked = [](const ParamVector&) { return 4.0; };
  GradientState state{Vector::Ones(3), 5, 2};

  const StepResult r = momentum_step(state, raw(Vector::Zero(3)), blocked, cfg, 9);
  CHECK(r.vanished);
  CHECK(r.update == Vector::Ones(3));            // g2 == history, not beta*history
  CHECK(r.sigma.values == Vector::Constant(3, -1.0));
  CHECK(r.state.vanished_streak == 3);

  SUBCASE("strict recurrence decays it instead") {
    cfg.strict_recurrence = true;
    const StepResult s = momentum_step(state, raw(Vector::Zero(3)), blocked, cfg, 9);
    CHECK(s.vanished);
    CHECK(s.update == Vector::Constant(3, 0.9));  // beta * history
  }
  SUBCASE("plain variant has no history to keep") {
    cfg.variant = GradientVariant::plain;
    const StepResult s = momentum_step(state, raw(Vector::Zero(3)), blocked, cfg, 9);
    CHECK(s.vanished);
    CHECK((s.update.array() == 0.0).all());
    CHECK(s.sigma.values == Vector::Zero(3));
  }
}

TEST_CASE("zero history and zero estimate leave the point stationary") {
  ZooConfig cfg;
  const ScalarOracle blocked = [](const ParamVector&) { return 4.0; };
  GradientState state = make_gradient_state(4);
  const StepResult r = momentum_step(state, raw(Vector::Ones(4)), blocked, cfg, 1);
  CHECK(r.vanished);
  CHECK(r.sigma.values == Vector::Ones(4));
  CHECK((r.state.history.array() == 0.0).all());
}

TEST_CASE("budget exhaustion aborts the step and returns the inputs") {
  ZooConfig cfg;
  cfg.num_probe_pairs = 3;
  int calls = 0;
  const ScalarOracle stingy = [&calls](const ParamVector&) -> double {
    if (++calls > 3) throw BudgetExhausted("out");
    return 1.0;
  };
  GradientState state{Vector::Ones(2), 7, 1};
  const StepResult r = momentum_step(state, raw(Vector{{5.0, 6.0}}), stingy, cfg, 2);
  CHECK(r.exhausted);
  CHECK(r.sigma.values == Vector{{5.0, 6.0}});
  CHECK(r.state.step == 7);
  CHECK(r.state.history == Vector::Ones(2));
}

TEST_CASE("momentum lookahead probes at sigma + history") {
  ZooConfig cfg;
  cfg.num_probe_pairs = 1;
  cfg.probe_scale = 0.5;
  std::vector<Vector> seen;
  const ScalarOracle spy = [&seen](const ParamVector& x) {
    seen.push_back(x.values);
    return 0.0;
  };
  GradientState state{Vector::Constant(2, 10.0), 1, 0};
  (void)momentum_step(state, raw(Vector::Zero(2)), spy, cfg, 3);
  REQUIRE(seen.size() == 2);
  // Both probe points center on (10,10), not on the current sigma.
  CHECK((seen[0] + seen[1]) / 2.0 == Vector::Constant(2, 10.0));

  SUBCASE("plain variant probes at sigma itself") {
    seen.clear();
    cfg.variant = GradientVariant::plain;
    (void)momentum_step(state, raw(Vector::Zero(2)), spy, cfg, 3);
    REQUIRE(seen.size() == 2);
    CHECK((seen[0] + seen[1]) / 2.0 == Vector::Zero(2));
  }
}

TEST_CASE("restart substitute returns seeded non-black noise") {
  const auto space = make_semantic_space(SpaceDims{}, 12);
  const VictimResponse blocked{VictimOutcome::blocked_by_filter,
                               black_image(space.dims.image_dim)};
  const Image a = restart_substitute(blocked, 5, space);
  const Image b = restart_substitute(blocked, 5, space);
  const Image c = restart_substitute(blocked, 6, space);
  CHECK_FALSE(a.is_black);
  CHECK(a.latent == b.latent);
  CHECK(a.latent != c.latent);

  const VictimResponse ok{VictimOutcome::image, Image{Vector::Ones(space.dims.image_dim), false}};
  CHECK_THROWS_AS(restart_substitute(ok, 1, space), std::invalid_argument);
}

TEST_CASE("restart substitute latents are mean-zero empirically") {
  const auto space = make_semantic_space(SpaceDims{}, 12);
  const VictimResponse blocked{VictimOutcome::blocked_by_filter,
                               black_image(space.dims.image_dim)};
  double sum = 0.0;
  long n = 0;
  for (int i = 0; i < 10000; ++i) {
    const Image img = restart_substitute(blocked, mix_seed(3, "clt", static_cast<std::uint64_t>(i)), space);
    sum += img.latent.sum();
    n += img.latent.size();
  }
  CHECK(std::abs(sum / static_cast<double>(n)) < 0.05);
}

namespace {

// A compact end-to-end pipeline over a stub black box. This is also the
// visibility check: nothing here ever touches filter or checker configs.
AttackPipeline stub_pipeline(
    std::uint64_t seed,
    std::function<VictimResponse(const TokenSequence&, std::uint64_t)> query) {
  const SpaceDims dims{64, 16, 24, 16};
  const EncoderDims enc_dims{3, 1, 4, 8, 8};
  AttackPipeline pipe;
  pipe.space = make_semantic_space(dims, mix_seed(seed, "space"));
  pipe.projection = make_sensitive_projection(dims.text_dim, enc_dims, mix_seed(seed, "proj"));
  pipe.encoder = make_prompt_encoder(enc_dims, dims.vocab_size, {1, 2, 3, 4},
                                     mix_seed(seed, "enc"));
  pipe.decoder = make_decoder(pipe.space, enc_dims.hidden_dim, 6, mix_seed(seed, "dec"));
  pipe.target_prompt = {5, 9, 11};
  pipe.target_image = auxiliary_generate(pipe.target_prompt, mix_seed(seed, "aux"), pipe.space);
  pipe.seed = mix_seed(seed, "opt");
  pipe.query = std::move(query);
  return pipe;
}

VictimResponse blocked_response(const SemanticSpace& space) {
  return VictimResponse{VictimOutcome::blocked_by_filter, black_image(space.dims.image_dim)};
}

}  // namespace

TEST_CASE("optimize: budget for one probe pair gives a single-step trace") {
  QueryLedger ledger{0, 2};
  AttackPipeline pipe = stub_pipeline(21, nullptr);
  const SemanticSpace space = pipe.space;
  pipe.query = [&ledger, space](const TokenSequence& p, std::uint64_t gen_seed) {
    if (ledger.count >= ledger.budget) throw BudgetExhausted("stub budget");
    ledger.count += 1;
    return VictimResponse{VictimOutcome::image,
                          generate_image(text_encode(p, space), gen_seed, space)};
  };
  ZooConfig cfg;
  cfg.num_probe_pairs = 1;
  cfg.max_steps = 10;
  const OptimizeResult r = optimize_attack(pipe, cfg);
  CHECK(r.trace.size() == 1);
  CHECK(r.queries == 2);
  CHECK(r.exhausted);
  CHECK(ledger.count == 2);
}

TEST_CASE("optimize: a mid-step abort still accounts for its queries") {
  QueryLedger ledger{0, 3};
  AttackPipeline pipe = stub_pipeline(25, nullptr);
  const SemanticSpace space = pipe.space;
  pipe.query = [&ledger, space](const TokenSequence& p, std::uint64_t gen_seed) {
    if (ledger.count >= ledger.budget) throw BudgetExhausted("stub budget");
    ledger.count += 1;
    return VictimResponse{VictimOutcome::image,
                          generate_image(text_encode(p, space), gen_seed, space)};
  };
  ZooConfig cfg;
  cfg.num_probe_pairs = 2;  // 4 evaluations needed, only 3 available
  cfg.max_steps = 10;

  const ParamVector initial = flatten_params(pipe.projection, pipe.encoder, false);
  const OptimizeResult r = optimize_attack(pipe, cfg);
  CHECK(r.exhausted);
  CHECK(r.queries == 3);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].queries == 3);     // partial step is on the record
  CHECK(r.sigma.values == initial.values);  // but no update was applied
}

TEST_CASE("optimize: always-blocked victim with no restart is stationary") {
  AttackPipeline pipe = stub_pipeline(22, nullptr);
  const SemanticSpace space = pipe.space;
  int calls = 0;
  pipe.query = [&calls, space](const TokenSequence&, std::uint64_t) {
    ++calls;
    return blocked_response(space);
  };
  ZooConfig cfg;
  cfg.max_steps = 5;
  cfg.num_probe_pairs = 2;
  cfg.use_restart = false;

  const ParamVector initial = flatten_params(pipe.projection, pipe.encoder, false);
  const OptimizeResult r = optimize_attack(pipe, cfg);
  CHECK(r.sigma.values == initial.values);  // zero estimate, zero history, no motion
  CHECK((r.state.history.array() == 0.0).all());
  for (const auto& t : r.trace) {
    CHECK(t.all_blocked);
    CHECK_FALSE(t.restarted);
    CHECK(t.loss == 4.0);
  }
  CHECK(r.queries == calls);
  CHECK(r.queries == 5 * 2 * 2);
}

TEST_CASE("optimize: restart breaks the all-blocked deadlock without re-querying") {
  AttackPipeline pipe = stub_pipeline(23, nullptr);
  const SemanticSpace space = pipe.space;
  int calls = 0;
  pipe.query = [&calls, space](const TokenSequence&, std::uint64_t) {
    ++calls;
    return blocked_response(space);
  };
  ZooConfig cfg;
  cfg.max_steps = 5;
  cfg.num_probe_pairs = 2;

  const OptimizeResult r = optimize_attack(pipe, cfg);
  REQUIRE(r.trace.size() == 5);
  CHECK(r.trace[0].restarted);
  CHECK(r.trace[0].all_blocked);
  // Substituted losses differ across probes, so the step moved.
  CHECK_FALSE((r.state.history.array() == 0.0).all());
  // Restart substitutes never cost queries: exactly 2 per pair per step.
  CHECK(r.queries == calls);
  CHECK(r.queries == 5 * 2 * 2);

  // Once the history is nonzero, later blocked steps ride it unchanged:
  // re-run with max_steps = 1 (same seeds) and replay the constant update.
  ZooConfig one = cfg;
  one.max_steps = 1;
  calls = 0;
  const OptimizeResult first = optimize_attack(pipe, one);
  CHECK(first.state.history == r.state.history);
  Vector expected = first.sigma.values;
  for (int s = 1; s < 5; ++s) expected -= first.state.history;
  CHECK(r.sigma.values == expected);
}

TEST_CASE("optimize: full trace is bit-identical across runs") {
  auto make = [](int* calls) {
    AttackPipeline pipe = stub_pipeline(24, nullptr);
    const SemanticSpace space = pipe.space;
    pipe.query = [calls, space](const TokenSequence& p, std::uint64_t gen_seed) {
      if (calls != nullptr) ++*calls;
      // Gate on a fixed token to exercise both outcomes deterministically.
      if (!p.empty() && p.front() % 2 == 0)
        return VictimResponse{VictimOutcome::blocked_by_checker,
                              black_image(space.dims.image_dim)};
      return VictimResponse{VictimOutcome::image,
                            generate_image(text_encode(p, space), gen_seed, space)};
    };
    return pipe;
  };
  ZooConfig cfg;
  cfg.max_steps = 8;
  cfg.num_probe_pairs = 2;
  int calls_a = 0, calls_b = 0;
  const OptimizeResult a = optimize_attack(make(&calls_a), cfg);
  const OptimizeResult b = optimize_attack(make(&calls_b), cfg);
  CHECK(a.sigma.values == b.sigma.values);
  CHECK(a.final_prompt == b.final_prompt);
  CHECK(a.best_prompt == b.best_prompt);
  CHECK(a.best_loss == b.best_loss);
  CHECK(calls_a == calls_b);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].loss == b.trace[i].loss);
    CHECK(a.trace[i].queries == b.trace[i].queries);
    CHECK(a.trace[i].all_blocked == b.trace[i].all_blocked);
  }
}

TEST_CASE("quadratic descent: the loss trace mostly decreases") {
  // Empirically calibrated smoke test of the full update rule on a smooth
  // stub objective: over 50 seeds, at least 70% of steps must not increase
  // the (probe-averaged) loss.
  ZooConfig cfg;
  cfg.probe_scale = 0.01;
  cfg.learning_rate = 0.02;
  cfg.history_ratio = 0.9;
  cfg.num_probe_pairs = 4;
  cfg.max_steps = 30;

  long good = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ParamVector sigma = raw(normal_vector(mix_seed(seed, "x0"), 16).normalized());
    GradientState state = make_gradient_state(16);
    double prev = sigma.values.squaredNorm();
    for (int step = 0; step < cfg.max_steps; ++step) {
      const StepResult r = momentum_step(state, sigma, quadratic(), cfg,
                                         mix_seed(seed, "step", static_cast<std::uint64_t>(step)));
      sigma = r.sigma;
      state = r.state;
      const double now = sigma.values.squaredNorm();
      total += 1;
      good += (now <= prev) ? 1 : 0;
      prev = now;
    }
  }
  CHECK(static_cast<double>(good) / static_cast<double>(total) >= 0.70);
}
