#pragma once

#include <cstdint>
#include <optional>

#include "dso/dynamics.hpp"

namespace dso {

enum class InitialProfilePolicy { Explicit, ShortestDistance, Random };

struct RunConfig {
  DynamicsSpec dynamics;
  std::optional<BetaSchedule> schedule;  // stochastic runs
  InitialProfilePolicy init = InitialProfilePolicy::Random;
  RouteProfile explicit_initial;
  std::int64_t max_iters = 100000;
  std::uint64_t seed = 1;
  // Best-response termination: converged once total cost has been flat and
  // the state Nash for this many consecutive iterations (0 -> 10 * users).
  std::int64_t best_window = 0;
  // Draw only among users that can actually improve (variant selection
  // rule); default draws uniformly over everyone with no-op steps.
  bool select_only_improvers = false;
  int nbr_every = 0;  // record the non-best-response count every k steps; 0 = never
};

struct RunResult {
  Trace trace;
  RouteProfile final_profile;
  RouteProfile best_profile;  // minimum total cost visited
  double best_tc_s = 0.0;
  double final_tc_s = 0.0;
  bool converged = false;
  std::int64_t iterations = 0;
};

RouteProfile initial_profile(const Game& game, const RunConfig& config, Rng& rng);

// Better/best response iteration to a (set of) equilibria.
RunResult run_deterministic(const Game& game, const RunConfig& config);

// Logit iteration under a noise schedule; tracks the best state visited.
RunResult run_stochastic(const Game& game, const RunConfig& config);

// Single origin and exactly one capacitated link on every available route.
bool is_sbpr1(const Scenario& scn, std::string* why = nullptr);

struct EquilibrationResult {
  RouteProfile profile;
  std::vector<StepOutcome> moves;  // one entry per processed user, in departure order
  std::int64_t outer_iterations = 0;
};

// Processes users in departure-time order, moving each to a best response
// (or keeping an already-best route). In fixed-toll games on networks that
// pass is_sbpr1 this reaches a Nash state in exactly one pass and the move
// sequence is a better-response path.
EquilibrationResult departure_order_equilibration(const Game& game, const RouteProfile& initial);

}  // namespace dso
