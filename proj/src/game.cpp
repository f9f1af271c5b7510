#include "dso/game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dso/common.hpp"

namespace dso {

Game::Game(std::shared_ptr<const Scenario> scn, GameMode mode,
           std::shared_ptr<const TollSchedule> tolls)
    : scn_(std::move(scn)), mode_(mode), tolls_(std::move(tolls)) {
  if (mode_ == GameMode::DueFcp) {
    if (!tolls_) throw ValidationError("fixed-pricing game needs a toll schedule");
    if (tolls_->tolls_s.size() != static_cast<std::size_t>(scn_->num_users()))
      throw ValidationError("toll schedule does not cover all users");
    for (int u = 0; u < scn_->num_users(); ++u)
      if (tolls_->tolls_s[static_cast<std::size_t>(u)].size() !=
          scn_->route_sets[static_cast<std::size_t>(u)].size())
        throw ValidationError("toll schedule missing routes for user " + std::to_string(u));
  }
}

const std::vector<double>& Game::costs(const RouteProfile& profile) const {
  auto it = cache_.map.find(profile);
  if (it != cache_.map.end()) return *it->second;
  if (cache_.map.size() >= cache_.cap) cache_.map.clear();
  LoadOptions opts;
  opts.record_visits = false;
  auto costs = std::make_shared<std::vector<double>>(load(*scn_, profile, opts).costs_s);
  auto ins = cache_.map.emplace(profile, std::move(costs));
  return *ins.first->second;
}

double Game::total_cost(const RouteProfile& profile) const {
  const auto& c = costs(profile);
  return std::accumulate(c.begin(), c.end(), 0.0);
}

double Game::total_cost(const LoadingResult& loading) {
  return std::accumulate(loading.costs_s.begin(), loading.costs_s.end(), 0.0);
}

UtilityBreakdown Game::dso_utility(const RouteProfile& profile, UserId user, int route) const {
  RouteProfile with = profile;
  with[static_cast<std::size_t>(user)] = route;
  RouteProfile without = profile;
  without[static_cast<std::size_t>(user)] = kNullRoute;
  const auto& cw = costs(with);
  const auto& co = costs(without);
  UtilityBreakdown b;
  b.private_cost_s = route == kNullRoute ? 0.0 : cw[static_cast<std::size_t>(user)];
  double ext = 0.0;
  for (std::size_t i = 0; i < cw.size(); ++i) {
    if (static_cast<UserId>(i) == user) continue;
    ext += cw[i] - co[i];
  }
  b.external_cost_s = ext;
  b.utility = -b.private_cost_s - b.external_cost_s;
  return b;
}

UtilityBreakdown Game::fcp_utility(const RouteProfile& profile, UserId user, int route) const {
  if (!tolls_) throw ValidationError("fcp_utility needs a toll schedule");
  RouteProfile with = profile;
  with[static_cast<std::size_t>(user)] = route;
  UtilityBreakdown b;
  b.private_cost_s =
      route == kNullRoute ? 0.0 : costs(with)[static_cast<std::size_t>(user)];
  b.toll_s = route == kNullRoute ? 0.0 : tolls_->at(user, route);
  b.utility = -b.private_cost_s - b.toll_s;
  return b;
}

UtilityBreakdown Game::utility(const RouteProfile& profile, UserId user, int route) const {
  return mode_ == GameMode::Dso ? dso_utility(profile, user, route)
                                : fcp_utility(profile, user, route);
}

std::vector<double> Game::route_values(const RouteProfile& profile, UserId user) const {
  const std::size_t n_routes = scn_->route_sets[static_cast<std::size_t>(user)].size();
  std::vector<double> vals(n_routes);
  RouteProfile probe = profile;
  for (std::size_t r = 0; r < n_routes; ++r) {
    probe[static_cast<std::size_t>(user)] = static_cast<int>(r);
    if (mode_ == GameMode::Dso) {
      // -TC(r, rest); differs from the marginal-cost utility by the
      // counterfactual total, which is the same for every candidate route.
      vals[r] = -total_cost(probe);
    } else {
      vals[r] = -costs(probe)[static_cast<std::size_t>(user)] -
                tolls_->at(user, static_cast<int>(r));
    }
  }
  return vals;
}

NashReport Game::is_nash(const RouteProfile& profile, bool strict_check) const {
  const int n = num_users();
  NashReport rep;
  rep.gaps.assign(static_cast<std::size_t>(n), 0.0);
  rep.best_routes.assign(static_cast<std::size_t>(n), kNullRoute);
  rep.nash = true;
  rep.strict = true;
  for (int u = 0; u < n; ++u) {
    const int cur = profile[static_cast<std::size_t>(u)];
    const std::vector<double> vals = route_values(profile, u);
    if (vals.empty()) continue;
    std::size_t best = 0;
    for (std::size_t r = 1; r < vals.size(); ++r)
      if (vals[r] > vals[best]) best = r;
    rep.best_routes[static_cast<std::size_t>(u)] = static_cast<int>(best);
    const double cur_val = cur == kNullRoute ? -kInf : vals[static_cast<std::size_t>(cur)];
    const double gap = vals[best] - cur_val;
    rep.gaps[static_cast<std::size_t>(u)] = gap;
    if (gap > kUtilityEps) rep.nash = false;
    if (strict_check) {
      std::size_t near_best = 0;
      for (double v : vals)
        if (v >= vals[best] - kUtilityEps) ++near_best;
      if (near_best != 1 || cur != static_cast<int>(best)) rep.strict = false;
    }
  }
  if (!strict_check) rep.strict = false;
  return rep;
}

TollSchedule Game::derive_tolls(const RouteProfile& target, double strict_margin_s) const {
  const int n = num_users();
  TollSchedule out;
  out.tolls_s.resize(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    const std::size_t n_routes = scn_->route_sets[static_cast<std::size_t>(u)].size();
    std::vector<double> toll(n_routes, 0.0);
    std::vector<double> util(n_routes, 0.0);
    for (std::size_t r = 0; r < n_routes; ++r) {
      const UtilityBreakdown b = dso_utility(target, u, static_cast<int>(r));
      toll[r] = b.external_cost_s;
      util[r] = b.utility;
    }
    const int tr = target[static_cast<std::size_t>(u)];
    if (strict_margin_s > 0.0 && tr != kNullRoute) {
      double deficit = 0.0;
      for (std::size_t r = 0; r < n_routes; ++r)
        if (static_cast<int>(r) != tr)
          deficit = std::max(deficit, util[r] - util[static_cast<std::size_t>(tr)]);
      for (std::size_t r = 0; r < n_routes; ++r)
        if (static_cast<int>(r) != tr) toll[r] += deficit + strict_margin_s;
    }
    if (!toll.empty()) {
      const double lo = *std::min_element(toll.begin(), toll.end());
      if (lo < 0.0)
        for (double& t : toll) t -= lo;
    }
    out.tolls_s[static_cast<std::size_t>(u)] = std::move(toll);
  }
  return out;
}

double Game::potential_identity_residual(const RouteProfile& profile, UserId user, int route_a,
                                         int route_b) const {
  const double ua = dso_utility(profile, user, route_a).utility;
  const double ub = dso_utility(profile, user, route_b).utility;
  RouteProfile pa = profile;
  pa[static_cast<std::size_t>(user)] = route_a;
  RouteProfile pb = profile;
  pb[static_cast<std::size_t>(user)] = route_b;
  return std::abs((ua - ub) + (total_cost(pa) - total_cost(pb)));
}

void Game::clear_cache() const { cache_.map.clear(); }

void write_toll_csv(const TollSchedule& tolls, std::ostream& out) {
  out << "user,route_index,toll_s\n";
  char buf[96];
  for (std::size_t u = 0; u < tolls.tolls_s.size(); ++u)
    for (std::size_t r = 0; r < tolls.tolls_s[u].size(); ++r) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.12g\n", u, r, tolls.tolls_s[u][r]);
      out << buf;
    }
}

TollSchedule read_toll_csv(std::istream& in, const Scenario& scn) {
  TollSchedule t;
  t.tolls_s.resize(static_cast<std::size_t>(scn.num_users()));
  for (int u = 0; u < scn.num_users(); ++u)
    t.tolls_s[static_cast<std::size_t>(u)].assign(scn.route_sets[static_cast<std::size_t>(u)].size(),
                                                  0.0);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty toll csv");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw ValidationError("bad toll csv row: " + line);
    const int u = std::stoi(a);
    const int r = std::stoi(b);
    if (u < 0 || u >= scn.num_users() ||
        r < 0 || static_cast<std::size_t>(r) >= scn.route_sets[static_cast<std::size_t>(u)].size())
      throw ValidationError("toll csv row out of range: " + line);
    t.tolls_s[static_cast<std::size_t>(u)][static_cast<std::size_t>(r)] = std::stod(c);
  }
  return t;
}

}  // namespace dso
