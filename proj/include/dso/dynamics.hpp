#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "dso/game.hpp"
#include "dso/rng.hpp"

namespace dso {

enum class DynamicsKind { Better, Best, Logit };

// How a better-responding user picks among several improving routes.
enum class BetterChoiceWeighting { Uniform, UtilityProportional };

struct DynamicsSpec {
  DynamicsKind kind = DynamicsKind::Better;
  double beta = 1.0;  // fixed noise parameter, Logit only
  BetterChoiceWeighting better_weighting = BetterChoiceWeighting::Uniform;
  // Offer staying off the network as an extra strategy, priced at the
  // opt-out cost. Off by default: travelers in the bundled studies always
  // travel.
  bool include_null_route = false;
  double null_route_cost_s = 0.0;
};

// Per-step route-choice distribution of a revising user, over the user's
// route set (plus one trailing entry for the null route when enabled).
// beta is ignored except for Logit. This is the single source of truth:
// the sampling steps and the exact chain builder both use it.
std::vector<double> choice_distribution(const Game& game, const RouteProfile& profile, UserId user,
                                        const DynamicsSpec& spec);

struct StepOutcome {
  UserId user = -1;
  int old_route = kNullRoute;
  int new_route = kNullRoute;
  bool changed = false;
};

// One revision: a uniformly drawn user re-chooses per the distribution.
// Consumes exactly two draws from the generator (user, route), so paired
// runs sharing a generator stay aligned step for step.
StepOutcome dynamics_step(const Game& game, RouteProfile& profile, const DynamicsSpec& spec,
                          Rng& rng);

StepOutcome better_response_step(const Game& game, RouteProfile& profile, Rng& rng);
StepOutcome best_response_step(const Game& game, RouteProfile& profile, Rng& rng);
StepOutcome logit_step(const Game& game, RouteProfile& profile, double beta, Rng& rng);

enum class BetaScheduleKind { TheoreticalLog, Log, Linear, Fixed };

// Noise schedules for the stochastic search. TheoreticalLog is
// ln(tau+1)/ceil(P/2), the setting with a convergence guarantee; Log and
// Linear are the practical variants; Fixed holds beta constant.
struct BetaSchedule {
  BetaScheduleKind kind = BetaScheduleKind::Fixed;
  double param = 1.0;  // divisor for Log/Linear, beta for Fixed; unused for TheoreticalLog

  double value(double tau, int num_users) const;
  static BetaSchedule parse(const std::string& text);
  std::string describe() const;
};

struct TraceRow {
  std::int64_t tau = 0;
  double tc_s = 0.0;
  UserId revising_user = -1;
  int chosen_route = kNullRoute;
  bool changed = false;
  int nbr_count = -1;  // users off their best response; -1 when not sampled
};

struct Trace {
  std::uint64_t seed = 0;
  RouteProfile initial;
  std::vector<TraceRow> rows;  // rows[0] is the initial state at tau = 0
};

void write_trace_csv(const Trace& trace, std::ostream& out);

// Exact transition matrix of the one-user-per-step revision chain over the
// fully enumerated profile space.
struct ChainMatrix {
  Eigen::MatrixXd P;                     // row-stochastic
  std::vector<RouteProfile> profiles;    // row/column index -> profile
  std::vector<int> radices;              // per-user route counts

  std::size_t index_of(const RouteProfile& p) const;
};

ChainMatrix build_chain_matrix(const Game& game, const DynamicsSpec& spec,
                               std::size_t max_profiles = 20000);

void write_chain_csv(const ChainMatrix& chain, std::ostream& out);

// Stationary distribution pi with pi P = pi, sum pi = 1. Direct solve for
// desk-scale chains, power iteration beyond. Throws on non-ergodic chains
// or residual above 1e-10.
Eigen::VectorXd stationary_distribution(const ChainMatrix& chain);

void write_distribution_csv(const ChainMatrix& chain, const Eigen::VectorXd& pi, std::ostream& out);

// 0/1 reachability pattern: support of the revision chain at beta = 0,
// i.e. profiles differing in at most one coordinate.
struct BoolMatrix {
  std::size_t n = 0;
  std::vector<std::uint64_t> words;  // row-major bitset, ceil(n/64) words per row

  bool get(std::size_t r, std::size_t c) const;
  void set(std::size_t r, std::size_t c);
};

BoolMatrix mutation_pattern(const Game& game, std::size_t max_profiles = 20000);
BoolMatrix chain_support(const ChainMatrix& chain);

// Smallest n such that pattern^n is scrambling: every pair of rows shares a
// positive column. Throws when no such n exists up to the cap.
int scrambling_exponent(const BoolMatrix& pattern, int cap = 64);

}  // namespace dso
