// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Every threshold is pinned here; nothing defers to later calibration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dso/algorithms.hpp"
#include "dso/experiments.hpp"
#include "support.hpp"

using namespace dso;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_minus(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// ---- 1: potential identity on random deviations -----------------------

Outcome potential_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0xC1);
  double worst = 0.0;
  int done = 0;
  while (done < 500) {
    auto scn = test::random_parallel_scenario(rng, 3, 5, 2, 4);
    Game game(scn, GameMode::Dso);
    for (int k = 0; k < 10 && done < 500; ++k, ++done) {
      const RouteProfile p = test::random_profile(*scn, rng);
      const int u = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(scn->num_users())));
      const std::size_t nr = scn->route_sets[static_cast<std::size_t>(u)].size();
      const int a = static_cast<int>(rng.uniform_index(nr));
      const int b = static_cast<int>(rng.uniform_index(nr));
      worst = std::max(worst, game.potential_identity_residual(p, u, a, b));
    }
  }
  const double wall = now_minus(t0);
  return {worst <= 1e-9 && wall <= 60.0,
          fmt("500 deviations, max residual %.3g s, %.1f s", worst, wall)};
}

// ---- 2: loading physics on the Nguyen-Dupuis scenario ------------------

Outcome loading_physics() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioOptions sopts;
  sopts.demand_scale = 0.05;  // 200 users
  auto scn = std::make_shared<const Scenario>(
      load_scenario_file(test::scenario_dir() + "/nguyen_dupuis.json", sopts));
  Rng rng(0xC2);
  LoadOptions opts;
  opts.record_visits = true;
  opts.record_trajectories = true;

  double worst_headway_slack = kInf, worst_box_slack = kInf;
  for (int trial = 0; trial < 200; ++trial) {
    const RouteProfile p = test::random_profile(*scn, rng);
    const LoadingResult res = load(*scn, p, opts);
    const LoadingResult res2 = load(*scn, p, opts);

    // bit-identical repetition
    if (res.costs_s != res2.costs_s) return {false, "repeated loading changed costs"};
    std::ostringstream ca, cb;
    write_trajectory_csv(res, ca);
    write_trajectory_csv(res2, cb);
    if (ca.str() != cb.str()) return {false, "repeated loading changed event times"};

    // FIFO and exit headway per link
    std::map<LinkId, std::vector<std::pair<double, double>>> by_link;
    for (const auto& visits : res.visits)
      for (const LinkVisit& v : visits) by_link[v.link].push_back({v.t_arrival, v.t_departure});
    for (auto& [id, evs] : by_link) {
      const DerivedLinkParams prm = derived_link_params(scn->network.link_by_id(id));
      std::sort(evs.begin(), evs.end());
      for (std::size_t i = 1; i < evs.size(); ++i) {
        if (evs[i].second <= evs[i - 1].second) return {false, fmt("FIFO violated on link %d", id)};
        worst_headway_slack = std::min(
            worst_headway_slack, evs[i].second - evs[i - 1].second - prm.min_exit_headway_s);
      }
    }
    if (worst_headway_slack < -1e-9)
      return {false, fmt("exit headway slack %.3g", worst_headway_slack)};

    // Newell box on reconstructed trajectories
    std::map<LinkId, std::vector<const TrajectoryRecord*>> curves;
    for (const TrajectoryRecord& tr : res.trajectories) curves[tr.link].push_back(&tr);
    for (auto& [id, recs] : curves) {
      const Link& l = scn->network.link_by_id(id);
      const DerivedLinkParams prm = derived_link_params(l);
      for (std::size_t i = 0; i < recs.size(); ++i) {
        for (const auto& pt : recs[i]->curve.pts) {
          if (i > 0) {
            const double bound =
                recs[i - 1]->curve.eval(pt.t - prm.reaction_s, l.vff_mps) - prm.jam_spacing_m;
            worst_box_slack = std::min(worst_box_slack, bound - pt.x);
          }
          const double free_bound = l.vff_mps * (pt.t - recs[i]->curve.arrival_s());
          worst_box_slack = std::min(worst_box_slack, free_bound - pt.x);
        }
      }
    }
    if (worst_box_slack < -1e-9) return {false, fmt("spacing slack %.3g m", worst_box_slack)};
  }
  const double wall = now_minus(t0);
  return {wall <= 120.0, fmt("200 profiles, headway slack >= %.3g s, box slack >= %.3g m, %.1f s",
                             worst_headway_slack, worst_box_slack, wall)};
}

// ---- 3: better/best response convergence -------------------------------

Outcome convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioOptions sopts;
  sopts.demand_scale = 0.1;  // 40 users
  auto scn = std::make_shared<const Scenario>(
      load_scenario_file(test::scenario_dir() + "/simple_two_route.json", sopts));
  int converged = 0, nash = 0, improved = 0;
  const int per_kind = 200;
  for (const DynamicsKind kind : {DynamicsKind::Better, DynamicsKind::Best}) {
    Game game(scn, GameMode::Dso);
    for (int s = 0; s < per_kind; ++s) {
      RunConfig rc;
      rc.dynamics.kind = kind;
      rc.init = InitialProfilePolicy::Random;
      rc.seed = 0xC30000 + static_cast<std::uint64_t>(s);
      rc.max_iters = 20000;
      const RunResult rr = run_deterministic(game, rc);
      converged += rr.converged ? 1 : 0;
      nash += game.is_nash(rr.final_profile).nash ? 1 : 0;
      improved += rr.final_tc_s <= rr.trace.rows.front().tc_s + kUtilityEps ? 1 : 0;
    }
    game.clear_cache();
  }
  const double wall = now_minus(t0);
  const int total = 2 * per_kind;
  return {converged == total && nash == total && improved == total && wall <= 300.0,
          fmt("%d/%d converged, %d/%d Nash, %d/%d no worse than start, %.1f s", converged, total,
              nash, total, improved, total, wall)};
}

// ---- 4: multiple optima with spread ------------------------------------

Outcome multiple_optima() {
  auto scn = std::make_shared<const Scenario>(
      load_scenario_file(test::scenario_dir() + "/simple_two_route.json"));
  Game game(scn, GameMode::Dso);
  std::set<long long> levels;
  double best = kInf, worst = -kInf;
  for (int s = 0; s < 16; ++s) {
    RunConfig rc;
    rc.dynamics.kind = DynamicsKind::Better;
    rc.init = InitialProfilePolicy::Random;
    rc.seed = 0xC40000 + static_cast<std::uint64_t>(s);
    rc.max_iters = 100000;
    const RunResult rr = run_deterministic(game, rc);
    if (!rr.converged) return {false, "a better-response run failed to converge"};
    levels.insert(llround(rr.final_tc_s * 1000.0));
    best = std::min(best, rr.final_tc_s);
    worst = std::max(worst, rr.final_tc_s);
    game.clear_cache();
  }
  const double spread = (worst - best) / best;
  return {levels.size() >= 2 && spread >= 0.03,
          fmt("%zu distinct optima, TC %.1f .. %.1f, spread %.2f%%", levels.size(), best, worst,
              100.0 * spread)};
}

// ---- 5: algorithm ordering with bootstrap ------------------------------

double bootstrap_leq(const std::vector<double>& a, const std::vector<double>& b, Rng& rng) {
  int ok = 0;
  const int reps = 4000;
  for (int rep = 0; rep < reps; ++rep) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::size_t j = rng.uniform_index(a.size());
      sa += a[j];
      sb += b[j];
    }
    if (sa <= sb + 1e-9 * static_cast<double>(a.size())) ++ok;
  }
  return static_cast<double>(ok) / reps;
}

Outcome algorithm_ordering() {
  ScenarioOptions sopts;
  sopts.demand_scale = 0.1;
  auto scn = std::make_shared<const Scenario>(
      load_scenario_file(test::scenario_dir() + "/simple_two_route.json", sopts));
  const int seeds = 120;
  std::vector<double> better, best, logit;
  for (int kind = 0; kind < 3; ++kind) {
    Game game(scn, GameMode::Dso);
    for (int s = 0; s < seeds; ++s) {
      RunConfig rc;
      rc.init = InitialProfilePolicy::Random;
      rc.seed = 5000 + static_cast<std::uint64_t>(s);
      rc.max_iters = 4000;
      RunResult rr;
      if (kind == 0) {
        rc.dynamics.kind = DynamicsKind::Better;
        rr = run_deterministic(game, rc);
      } else if (kind == 1) {
        rc.dynamics.kind = DynamicsKind::Best;
        rr = run_deterministic(game, rc);
      } else {
        rc.dynamics.kind = DynamicsKind::Logit;
        rc.schedule = BetaSchedule{BetaScheduleKind::Linear, 1000.0};
        rr = run_stochastic(game, rc);
      }
      (kind == 0 ? better : kind == 1 ? best : logit).push_back(rr.best_tc_s);
      game.clear_cache();
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double ml = mean(logit), mb = mean(best), mbe = mean(better);
  Rng rng(0xC5);
  const double p_lb = bootstrap_leq(logit, best, rng);
  const double p_bb = bootstrap_leq(best, better, rng);
  const bool ordered = ml <= mb + 1e-9 && mb <= mbe + 1e-9;
  return {ordered && p_lb >= 0.95 && p_bb >= 0.95,
          fmt("means logit %.2f <= best %.2f <= better %.2f, bootstrap %.3f / %.3f", ml, mb, mbe,
              p_lb, p_bb)};
}

// ---- 6: stochastic stability oracle ------------------------------------

Outcome stationary_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  test::ParallelSpec ps;
  ps.fftt_s = {30.0, 32.0, 35.0};
  ps.cap_vps = {0.5, 0.5, 0.5};
  ps.users = 3;
  ps.headway_s = 1.0;
  Game game(test::parallel_scenario(ps), GameMode::Dso);
  const auto optima = test::brute_global_optima(game);

  DynamicsSpec spec;
  spec.kind = DynamicsKind::Logit;
  double prev = -1.0, final_mass = 0.0;
  bool monotone = true;
  std::string masses;
  for (const double beta : {1.0, 5.0, 10.0, 50.0}) {
    spec.beta = beta;
    const ChainMatrix chain = build_chain_matrix(game, spec);
    const Eigen::VectorXd pi = stationary_distribution(chain);
    double mass = 0.0;
    for (const RouteProfile& p : optima)
      mass += pi(static_cast<Eigen::Index>(chain.index_of(p)));
    monotone = monotone && mass > prev;
    prev = mass;
    final_mass = mass;
    masses += fmt(" %.4f", mass);
  }
  const double wall = now_minus(t0);
  return {monotone && final_mass > 0.99 && wall <= 60.0,
          fmt("optimum mass over beta {1,5,10,50}:%s, %.1f s", masses.c_str(), wall)};
}

// ---- 7: scrambling exponent -------------------------------------------

Outcome scrambling() {
  std::string detail;
  bool ok = true;
  for (int users = 1; users <= 4; ++users) {
    test::ParallelSpec ps;
    ps.fftt_s = {30.0, 40.0};
    ps.cap_vps = {0.5, 0.5};
    ps.users = users;
    ps.headway_s = 1.0;
    Game game(test::parallel_scenario(ps), GameMode::Dso);
    const int n = scrambling_exponent(mutation_pattern(game));
    const int expect = (users + 1) / 2;
    ok = ok && n == expect;
    detail += fmt(" |P|=%d: %d", users, n);
  }
  return {ok, "exponents" + detail};
}

// ---- 8: toll construction ----------------------------------------------

Outcome tolls() {
  Rng rng(0xC8);
  int strict_ok = 0, unique_ok = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    auto scn = test::random_parallel_scenario(rng, 3, 4, 2, 3);
    Game dso_game(scn, GameMode::Dso);
    const RouteProfile target = test::random_profile(*scn, rng);
    auto schedule = std::make_shared<const TollSchedule>(dso_game.derive_tolls(target, 1e-3));
    Game fcp(scn, GameMode::DueFcp, schedule);
    if (fcp.is_nash(target, true).strict) ++strict_ok;
    int nash_states = 0;
    for (const RouteProfile& p : test::all_profiles(*scn))
      if (test::brute_is_nash(fcp, p)) ++nash_states;
    if (nash_states == 1) ++unique_ok;
  }
  return {strict_ok == trials && unique_ok == trials,
          fmt("%d/%d strict at target, %d/%d unique equilibrium", strict_ok, trials, unique_ok,
              trials)};
}

// ---- 9: departure-order equilibration ----------------------------------

Outcome equilibration() {
  Rng rng(0xC9);
  int nash_ok = 0, length_ok = 0, path_ok = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    auto scn = test::random_parallel_scenario(rng, 3, 5, 2, 3);
    Game dso_game(scn, GameMode::Dso);
    std::shared_ptr<const TollSchedule> schedule;
    if (trial % 2 == 0) {
      auto zero = std::make_shared<TollSchedule>();
      zero->tolls_s.resize(static_cast<std::size_t>(scn->num_users()));
      for (int u = 0; u < scn->num_users(); ++u)
        zero->tolls_s[static_cast<std::size_t>(u)].assign(
            scn->route_sets[static_cast<std::size_t>(u)].size(), 0.0);
      schedule = zero;
    } else {
      schedule = std::make_shared<const TollSchedule>(
          dso_game.derive_tolls(test::random_profile(*scn, rng), 1e-3));
    }
    Game fcp(scn, GameMode::DueFcp, schedule);
    const RouteProfile initial = test::random_profile(*scn, rng);
    const EquilibrationResult res = departure_order_equilibration(fcp, initial);

    if (res.outer_iterations == scn->num_users()) ++length_ok;
    if (test::brute_is_nash(fcp, res.profile)) ++nash_ok;

    bool valid = true;
    RouteProfile replay = initial;
    for (const StepOutcome& mv : res.moves) {
      if (!mv.changed) continue;
      const double before = fcp.utility(replay, mv.user, mv.old_route).utility;
      const double after = fcp.utility(replay, mv.user, mv.new_route).utility;
      if (!(after > before + kUtilityEps)) valid = false;
      replay[static_cast<std::size_t>(mv.user)] = mv.new_route;
    }
    if (valid && replay == res.profile) ++path_ok;
  }
  return {nash_ok == trials && length_ok == trials && path_ok == trials,
          fmt("%d/%d Nash, %d/%d exact length, %d/%d valid paths", nash_ok, trials, length_ok,
              trials, path_ok, trials)};
}

// ---- 10: evolutionary vs fixed pricing robustness -----------------------

Outcome scheme_robustness() {
  ScenarioOptions sopts;
  sopts.demand_scale = 0.1;
  auto scn = std::make_shared<const Scenario>(
      load_scenario_file(test::scenario_dir() + "/simple_two_route.json", sopts));
  Game dso_game(scn, GameMode::Dso);

  // Target: stochastic search, then better-response polish to a Nash state.
  RunConfig search;
  search.dynamics.kind = DynamicsKind::Logit;
  search.schedule = BetaSchedule{BetaScheduleKind::Linear, 1000.0};
  search.init = InitialProfilePolicy::Random;
  search.max_iters = 4000;
  search.seed = 0xCA0;
  const RunResult found = run_stochastic(dso_game, search);
  RunConfig polish;
  polish.dynamics.kind = DynamicsKind::Better;
  polish.init = InitialProfilePolicy::Explicit;
  polish.explicit_initial = found.best_profile;
  polish.max_iters = 100000;
  polish.seed = 0xCA1;
  const RunResult polished = run_deterministic(dso_game, polish);
  if (!polished.converged) return {false, "target polish did not converge"};
  const RouteProfile target = polished.final_profile;

  auto schedule = std::make_shared<const TollSchedule>(dso_game.derive_tolls(target, 1e-6));
  Game evo(scn, GameMode::Dso);
  Game fcp(scn, GameMode::DueFcp, schedule);

  auto stddev = [](const Trace& tr) {
    double s = 0.0;
    for (const TraceRow& r : tr.rows) s += r.tc_s;
    const double mean = s / static_cast<double>(tr.rows.size());
    double v = 0.0;
    for (const TraceRow& r : tr.rows) v += (r.tc_s - mean) * (r.tc_s - mean);
    return std::sqrt(v / static_cast<double>(tr.rows.size()));
  };

  int fixed_noisier = 0;
  const int pairs = 100;
  for (int s = 0; s < pairs; ++s) {
    RunConfig rc;
    rc.dynamics.kind = DynamicsKind::Logit;
    rc.schedule = BetaSchedule{BetaScheduleKind::Fixed, 0.5};
    rc.init = InitialProfilePolicy::Explicit;
    rc.explicit_initial = target;
    rc.max_iters = 3000;
    rc.seed = 0xCA2000 + static_cast<std::uint64_t>(s);
    const RunResult a = run_stochastic(evo, rc);
    const RunResult b = run_stochastic(fcp, rc);
    if (stddev(b.trace) > stddev(a.trace)) ++fixed_noisier;
    evo.clear_cache();
    fcp.clear_cache();
  }
  return {fixed_noisier >= 70,
          fmt("fixed scheme noisier in %d/100 paired seeds (beta 0.5)", fixed_noisier)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"potential identity (residual <= 1e-9 over 500 deviations)", potential_identity},
      {"loading physics on Nguyen-Dupuis (FIFO, headways, spacing, determinism)", loading_physics},
      {"better/best response convergence to equilibria", convergence},
      {"multiple local optima with >= 3% spread", multiple_optima},
      {"mean best-TC ordering logit <= best <= better (95% bootstrap)", algorithm_ordering},
      {"stationary mass concentrates on the global optimum", stationary_oracle},
      {"scrambling exponent equals ceil(|P|/2)", scrambling},
      {"margin tolls make targets strict and unique equilibria", tolls},
      {"departure-order equilibration reaches Nash in |P| passes", equilibration},
      {"evolutionary pricing is less noisy than fixed pricing", scheme_robustness},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("CRITERION %zu %s: %s (%s)\n", i + 1, out.pass ? "PASS" : "FAIL",
                criteria[i].name, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
