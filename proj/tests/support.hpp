#pragma once

// Shared test helpers: tiny scenario builders, random instance generators
// and brute-force oracles that stay independent of the library's solver
// paths.

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dso/game.hpp"
#include "dso/rng.hpp"
#include "dso/scenario.hpp"

namespace dso::test {

inline std::string scenario_dir() { return DSO_SCENARIO_DIR; }

// Single link A->B shared by all users. Saturation flow 2 veh/s gives the
// 0.5 s entry headway used throughout the hand examples.
inline std::shared_ptr<const Scenario> single_link_scenario(int users, double headway_s = 0.5,
                                                            double fftt_s = 42.0,
                                                            double cap_vps = 1.25) {
  std::ostringstream os;
  os << R"({"name":"single","nodes":[0,1],"links":[{"id":0,"tail":0,"head":1,"fftt_s":)" << fftt_s
     << R"(,"satflow_vps":2.0,"cap_vps":)" << cap_vps << R"(}],"demand":[)"
     << R"({"origin":0,"destination":1,"count":)" << users << R"(,"headway_s":)" << headway_s
     << R"(,"start_s":0.0}]})";
  return std::make_shared<const Scenario>(parse_scenario(os.str()));
}

// Single origin/destination with k parallel capacitated links. Every route
// is one link, so the network is trivially single-bottleneck-per-route.
struct ParallelSpec {
  std::vector<double> fftt_s;
  std::vector<double> cap_vps;
  int users = 3;
  double headway_s = 1.0;
  double satflow_vps = 2.0;
};

inline std::shared_ptr<const Scenario> parallel_scenario(const ParallelSpec& ps) {
  std::ostringstream os;
  os << R"({"name":"parallel","nodes":[0,1],"links":[)";
  for (std::size_t i = 0; i < ps.fftt_s.size(); ++i) {
    if (i) os << ",";
    os << R"({"id":)" << i << R"(,"tail":0,"head":1,"fftt_s":)" << ps.fftt_s[i]
       << R"(,"satflow_vps":)" << ps.satflow_vps << R"(,"cap_vps":)" << ps.cap_vps[i] << "}";
  }
  os << R"(],"demand":[{"origin":0,"destination":1,"count":)" << ps.users << R"(,"headway_s":)"
     << ps.headway_s << R"(,"start_s":0.0}]})";
  return std::make_shared<const Scenario>(parse_scenario(os.str()));
}

// Random parallel-bottleneck instance. Saturation flows are picked so the
// jam spacing is a dyadic rational, which keeps queue positions exact in
// floating point. Used for the potential-identity and toll properties.
inline std::shared_ptr<const Scenario> random_parallel_scenario(Rng& rng, int min_users = 3,
                                                                int max_users = 5,
                                                                int min_routes = 2,
                                                                int max_routes = 4) {
  const int users =
      min_users + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_users - min_users + 1)));
  const int routes =
      min_routes + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_routes - min_routes + 1)));
  static const double sats[] = {1.0, 1.6, 2.0, 4.0};
  ParallelSpec ps;
  ps.users = users;
  ps.headway_s = 0.5 + 0.25 * static_cast<double>(rng.uniform_index(7));
  ps.satflow_vps = sats[rng.uniform_index(4)];
  for (int r = 0; r < routes; ++r) {
    ps.fftt_s.push_back(10.0 + static_cast<double>(rng.uniform_index(41)));
    // Strictly below the saturation flow so every route has exactly one
    // binding bottleneck.
    ps.cap_vps.push_back(0.25 + 0.25 * static_cast<double>(rng.uniform_index(3)));
  }
  return parallel_scenario(ps);
}

// Enumerates the whole profile space (no null routes).
inline std::vector<RouteProfile> all_profiles(const Scenario& scn) {
  std::vector<RouteProfile> out;
  RouteProfile p(static_cast<std::size_t>(scn.num_users()), 0);
  while (true) {
    out.push_back(p);
    std::size_t u = 0;
    for (; u < p.size(); ++u) {
      if (++p[u] < static_cast<int>(scn.route_sets[u].size())) break;
      p[u] = 0;
    }
    if (u == p.size()) break;
  }
  return out;
}

// Brute-force Nash check by exhaustive unilateral deviation scan, written
// against Game::utility directly rather than is_nash.
inline bool brute_is_nash(const Game& game, const RouteProfile& profile) {
  for (int u = 0; u < game.num_users(); ++u) {
    const double cur = game.utility(profile, u, profile[static_cast<std::size_t>(u)]).utility;
    const std::size_t k = game.scenario().route_sets[static_cast<std::size_t>(u)].size();
    for (std::size_t r = 0; r < k; ++r)
      if (game.utility(profile, u, static_cast<int>(r)).utility > cur + kUtilityEps) return false;
  }
  return true;
}

inline std::vector<RouteProfile> brute_nash_set(const Game& game) {
  std::vector<RouteProfile> out;
  for (const RouteProfile& p : all_profiles(game.scenario()))
    if (brute_is_nash(game, p)) out.push_back(p);
  return out;
}

// Globally minimal total-cost profiles by enumeration.
inline std::vector<RouteProfile> brute_global_optima(const Game& game, double tie_eps = 1e-9) {
  double best = kInf;
  std::vector<RouteProfile> out;
  for (const RouteProfile& p : all_profiles(game.scenario())) {
    const double tc = game.total_cost(p);
    if (tc < best - tie_eps) {
      best = tc;
      out.clear();
    }
    if (tc <= best + tie_eps) out.push_back(p);
  }
  return out;
}

inline RouteProfile random_profile(const Scenario& scn, Rng& rng) {
  RouteProfile p(static_cast<std::size_t>(scn.num_users()), 0);
  for (std::size_t u = 0; u < p.size(); ++u)
    p[u] = static_cast<int>(rng.uniform_index(scn.route_sets[u].size()));
  return p;
}

}  // namespace dso::test
