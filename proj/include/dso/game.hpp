#pragma once

#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <vector>

#include "dso/loading.hpp"
#include "dso/scenario.hpp"

namespace dso {

enum class GameMode { Dso, DueFcp };

// Fixed per-user, per-route tolls in time-equivalent seconds.
struct TollSchedule {
  std::vector<std::vector<double>> tolls_s;  // [user][route index]

  double at(UserId u, int route) const { return tolls_s[static_cast<std::size_t>(u)][static_cast<std::size_t>(route)]; }
};

void write_toll_csv(const TollSchedule& tolls, std::ostream& out);
TollSchedule read_toll_csv(std::istream& in, const Scenario& scn);

struct UtilityBreakdown {
  double private_cost_s = 0.0;   // the user's own route travel time
  double external_cost_s = 0.0;  // induced change in everyone else's times (marginal-cost games)
  double toll_s = 0.0;           // fixed-pricing games
  double utility = 0.0;
};

struct NashReport {
  bool nash = false;
  bool strict = false;
  std::vector<double> gaps;      // per user: best achievable utility minus current
  std::vector<int> best_routes;  // a utility-maximizing route per user
};

// One game instance: the scenario plus the utility regime. Owns a loading
// memo cache, so copies are cheap handles sharing the immutable scenario
// but caching independently (one Game per worker thread in parallel runs).
class Game {
 public:
  Game(std::shared_ptr<const Scenario> scn, GameMode mode,
       std::shared_ptr<const TollSchedule> tolls = nullptr);

  const Scenario& scenario() const { return *scn_; }
  GameMode mode() const { return mode_; }
  const TollSchedule* tolls() const { return tolls_.get(); }
  int num_users() const { return scn_->num_users(); }

  // Per-user travel times for a profile, loading on a cache miss.
  const std::vector<double>& costs(const RouteProfile& profile) const;
  double total_cost(const RouteProfile& profile) const;
  static double total_cost(const LoadingResult& loading);

  // Marginal-cost utility: private travel time plus the externality the
  // user imposes, measured against the counterfactual where the user stays
  // off the network.
  UtilityBreakdown dso_utility(const RouteProfile& profile, UserId user, int route) const;

  // Fixed-toll utility: own travel time plus the route's toll.
  UtilityBreakdown fcp_utility(const RouteProfile& profile, UserId user, int route) const;

  UtilityBreakdown utility(const RouteProfile& profile, UserId user, int route) const;

  // Mode-consistent route values for one user, comparable across the user's
  // routes (equal to utility up to a per-profile constant in marginal-cost
  // mode, which cancels in comparisons and in logit weights).
  std::vector<double> route_values(const RouteProfile& profile, UserId user) const;

  NashReport is_nash(const RouteProfile& profile, bool strict_check = false) const;

  // Tolls equal to each user's externality at the target (others fixed at
  // the target). With margin > 0, non-target routes are additionally
  // penalized by the margin plus whatever deficit is needed to make the
  // target route the strict argmax even when the target is not a
  // marginal-cost equilibrium. Per-user constant shifts keep tolls >= 0.
  TollSchedule derive_tolls(const RouteProfile& target, double strict_margin_s = 0.0) const;

  // |[U_i(a) - U_i(b)] + [TC(a) - TC(b)]| for a unilateral deviation.
  double potential_identity_residual(const RouteProfile& profile, UserId user, int route_a,
                                     int route_b) const;

  void clear_cache() const;
  std::size_t cache_size() const { return cache_.map.size(); }
  void set_cache_cap(std::size_t entries) { cache_.cap = entries; }

 private:
  struct ProfileHash {
    std::size_t operator()(const RouteProfile& p) const {
      std::size_t h = 1469598103934665603ull;
      for (int v : p) {
        h ^= static_cast<std::size_t>(static_cast<unsigned>(v)) + 0x9E3779B9u;
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  struct Cache {
    mutable std::unordered_map<RouteProfile, std::shared_ptr<const std::vector<double>>, ProfileHash>
        map;
    std::size_t cap = 1u << 22;
  };

  std::shared_ptr<const Scenario> scn_;
  GameMode mode_;
  std::shared_ptr<const TollSchedule> tolls_;
  mutable Cache cache_;
};

}  // namespace dso
