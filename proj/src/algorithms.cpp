#include "dso/algorithms.hpp"

#include <algorithm>
#include <cmath>

namespace dso {

RouteProfile initial_profile(const Game& game, const RunConfig& config, Rng& rng) {
  const Scenario& scn = game.scenario();
  const int n = scn.num_users();
  switch (config.init) {
    case InitialProfilePolicy::Explicit: {
      if (static_cast<int>(config.explicit_initial.size()) != n)
        throw ValidationError("explicit initial profile has the wrong size");
      return config.explicit_initial;
    }
    case InitialProfilePolicy::ShortestDistance: {
      RouteProfile p(static_cast<std::size_t>(n), 0);
      for (int u = 0; u < n; ++u) {
        const RouteSet& rs = scn.route_sets[static_cast<std::size_t>(u)];
        if (rs.size() == 0) throw ValidationError("user " + std::to_string(u) + " has no routes");
        std::size_t best = 0;
        for (std::size_t r = 1; r < rs.size(); ++r)
          if (rs.at(static_cast<int>(r)).fftt_s < rs.at(static_cast<int>(best)).fftt_s) best = r;
        p[static_cast<std::size_t>(u)] = static_cast<int>(best);
      }
      return p;
    }
    case InitialProfilePolicy::Random: {
      RouteProfile p(static_cast<std::size_t>(n), 0);
      for (int u = 0; u < n; ++u) {
        const std::size_t k = scn.route_sets[static_cast<std::size_t>(u)].size();
        if (k == 0) throw ValidationError("user " + std::to_string(u) + " has no routes");
        p[static_cast<std::size_t>(u)] = static_cast<int>(rng.uniform_index(k));
      }
      return p;
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

int count_non_best(const Game& game, const RouteProfile& profile) {
  const NashReport rep = game.is_nash(profile);
  int k = 0;
  for (double g : rep.gaps)
    if (g > kUtilityEps) ++k;
  return k;
}

StepOutcome improver_step(const Game& game, RouteProfile& profile, const DynamicsSpec& spec,
                          Rng& rng) {
  // Variant selection: draw uniformly among users that can improve (or,
  // under best response, switch). Falls back to a no-op when nobody can.
  std::vector<UserId> movers;
  std::vector<std::vector<double>> dists;
  for (int u = 0; u < game.num_users(); ++u) {
    std::vector<double> p = choice_distribution(game, profile, u, spec);
    const int cur = profile[static_cast<std::size_t>(u)];
    const bool can_move =
        cur == kNullRoute || p[static_cast<std::size_t>(cur)] < 1.0;
    if (can_move) {
      movers.push_back(u);
      dists.push_back(std::move(p));
    }
  }
  StepOutcome out;
  if (movers.empty()) {
    out.user = static_cast<UserId>(rng.uniform_index(static_cast<std::size_t>(game.num_users())));
    rng.next_double();
    out.old_route = out.new_route = profile[static_cast<std::size_t>(out.user)];
    return out;
  }
  const std::size_t k = rng.uniform_index(movers.size());
  const double u01 = rng.next_double();
  out.user = movers[k];
  out.old_route = profile[static_cast<std::size_t>(out.user)];
  double acc = 0.0;
  std::size_t pick = dists[k].size() - 1;
  for (std::size_t r = 0; r < dists[k].size(); ++r) {
    acc += dists[k][r];
    if (u01 < acc) {
      pick = r;
      break;
    }
  }
  out.new_route = static_cast<int>(pick);
  out.changed = out.new_route != out.old_route;
  profile[static_cast<std::size_t>(out.user)] = out.new_route;
  return out;
}

}  // namespace

RunResult run_deterministic(const Game& game, const RunConfig& config) {
  if (config.dynamics.kind == DynamicsKind::Logit)
    throw ValidationError("deterministic runs use better or best response dynamics");
  const bool best_mode = config.dynamics.kind == DynamicsKind::Best;
  const int n_users = game.num_users();
  const std::int64_t window =
      config.best_window > 0 ? config.best_window : static_cast<std::int64_t>(10) * n_users;

  Rng rng(config.seed);
  RunResult res;
  res.trace.seed = config.seed;
  res.trace.initial = initial_profile(game, config, rng);

  RouteProfile profile = res.trace.initial;
  double tc = game.total_cost(profile);
  res.best_profile = profile;
  res.best_tc_s = tc;
  res.trace.rows.push_back(TraceRow{0, tc, -1, kNullRoute, false,
                                    config.nbr_every > 0 ? count_non_best(game, profile) : -1});

  if (game.is_nash(profile).nash && !best_mode) {
    // Already absorbed; better response can never leave a Nash state.
    res.final_profile = profile;
    res.final_tc_s = tc;
    res.converged = true;
    return res;
  }

  std::int64_t flat_streak = 0;   // iterations since total cost last moved
  std::int64_t quiet_streak = 0;  // iterations since the profile last changed
  for (std::int64_t tau = 1; tau <= config.max_iters; ++tau) {
    const StepOutcome step = config.select_only_improvers
                                 ? improver_step(game, profile, config.dynamics, rng)
                                 : dynamics_step(game, profile, config.dynamics, rng);
    const double new_tc = step.changed ? game.total_cost(profile) : tc;
    const bool tc_moved = std::abs(new_tc - tc) > kUtilityEps;
    tc = new_tc;
    flat_streak = tc_moved ? 0 : flat_streak + 1;
    quiet_streak = step.changed ? 0 : quiet_streak + 1;
    res.trace.rows.push_back(
        TraceRow{tau, tc, step.user, step.new_route, step.changed,
                 config.nbr_every > 0 && tau % config.nbr_every == 0 ? count_non_best(game, profile)
                                                                     : -1});
    if (tc < res.best_tc_s) {
      res.best_tc_s = tc;
      res.best_profile = profile;
    }
    res.iterations = tau;

    if (!best_mode) {
      if (quiet_streak >= n_users && quiet_streak % n_users == 0 && game.is_nash(profile).nash) {
        res.converged = true;
        break;
      }
    } else {
      if (flat_streak >= window && (flat_streak - window) % window == 0 &&
          game.is_nash(profile).nash) {
        res.converged = true;
        break;
      }
    }
  }
  res.final_profile = profile;
  res.final_tc_s = tc;
  return res;
}

RunResult run_stochastic(const Game& game, const RunConfig& config) {
  if (config.dynamics.kind != DynamicsKind::Logit)
    throw ValidationError("the stochastic run uses logit response dynamics");
  if (!config.schedule) throw ValidationError("stochastic run needs a beta schedule");
  const int n_users = game.num_users();

  Rng rng(config.seed);
  RunResult res;
  res.trace.seed = config.seed;
  res.trace.initial = initial_profile(game, config, rng);

  RouteProfile profile = res.trace.initial;
  double tc = game.total_cost(profile);
  res.best_profile = profile;
  res.best_tc_s = tc;
  res.trace.rows.push_back(TraceRow{0, tc, -1, kNullRoute, false,
                                    config.nbr_every > 0 ? count_non_best(game, profile) : -1});

  DynamicsSpec spec = config.dynamics;
  for (std::int64_t tau = 1; tau <= config.max_iters; ++tau) {
    spec.beta = config.schedule->value(static_cast<double>(tau - 1), n_users);
    const StepOutcome step = dynamics_step(game, profile, spec, rng);
    if (step.changed) tc = game.total_cost(profile);
    res.trace.rows.push_back(
        TraceRow{tau, tc, step.user, step.new_route, step.changed,
                 config.nbr_every > 0 && tau % config.nbr_every == 0 ? count_non_best(game, profile)
                                                                     : -1});
    if (tc < res.best_tc_s) {
      res.best_tc_s = tc;
      res.best_profile = profile;
    }
    res.iterations = tau;
  }
  res.final_profile = profile;
  res.final_tc_s = tc;
  return res;
}

bool is_sbpr1(const Scenario& scn, std::string* why) {
  NodeId origin = scn.users.empty() ? -1 : scn.users.front().origin;
  for (const UserSpec& u : scn.users) {
    if (u.origin != origin) {
      if (why) *why = "more than one origin node";
      return false;
    }
  }
  for (int u = 0; u < scn.num_users(); ++u) {
    const RouteSet& rs = scn.route_sets[static_cast<std::size_t>(u)];
    for (std::size_t r = 0; r < rs.size(); ++r) {
      int capacitated = 0;
      for (LinkId id : rs.at(static_cast<int>(r)).links)
        if (scn.network.link_by_id(id).capacitated) ++capacitated;
      if (capacitated != 1) {
        if (why)
          *why = "user " + std::to_string(u) + " route " + std::to_string(r) + " has " +
                 std::to_string(capacitated) + " capacitated links";
        return false;
      }
    }
  }
  return true;
}

EquilibrationResult departure_order_equilibration(const Game& game, const RouteProfile& initial) {
  const Scenario& scn = game.scenario();
  std::string why;
  if (!is_sbpr1(scn, &why))
    throw ValidationError("departure-order equilibration needs a single-bottleneck-per-route "
                          "network with one origin: " + why);
  if (static_cast<int>(initial.size()) != scn.num_users())
    throw std::invalid_argument("initial profile has the wrong size");

  std::vector<UserId> order(static_cast<std::size_t>(scn.num_users()));
  for (int u = 0; u < scn.num_users(); ++u) order[static_cast<std::size_t>(u)] = u;
  std::sort(order.begin(), order.end(), [&](UserId a, UserId b) {
    return scn.users[static_cast<std::size_t>(a)].depart_s <
           scn.users[static_cast<std::size_t>(b)].depart_s;
  });

  EquilibrationResult res;
  res.profile = initial;
  for (UserId u : order) {
    const std::vector<double> vals = game.route_values(res.profile, u);
    std::size_t best = 0;
    for (std::size_t r = 1; r < vals.size(); ++r)
      if (vals[r] > vals[best]) best = r;
    const int cur = res.profile[static_cast<std::size_t>(u)];
    StepOutcome move;
    move.user = u;
    move.old_route = cur;
    move.new_route = cur;
    const double cur_val = cur == kNullRoute ? -kInf : vals[static_cast<std::size_t>(cur)];
    if (vals[best] > cur_val + kUtilityEps) {
      res.profile[static_cast<std::size_t>(u)] = static_cast<int>(best);
      move.new_route = static_cast<int>(best);
      move.changed = true;
    }
    res.moves.push_back(move);
    res.outer_iterations++;
  }
  return res;
}

}  // namespace dso
