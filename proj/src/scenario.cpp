#include "dso/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dso {

using nlohmann::json;

namespace {

double require_positive(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + ": missing " + key);
  const double v = j.at(key).get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(ctx + ": " + key + " must be positive");
  return v;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const ScenarioOptions& opts) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }

  Scenario scn;
  scn.name = doc.value("name", std::string("scenario"));

  double default_vff = 20.0, default_wback = 5.0;
  if (doc.contains("defaults")) {
    const json& d = doc.at("defaults");
    default_vff = d.value("vff_mps", default_vff);
    default_wback = d.value("wback_mps", default_wback);
    scn.uncap_vps = d.value("uncap_vps", scn.uncap_vps);
    scn.route_cap = d.value("route_cap", scn.route_cap);
  }

  if (!doc.contains("nodes") || !doc.contains("links"))
    throw ValidationError("scenario needs 'nodes' and 'links' sections");

  for (const json& jn : doc.at("nodes")) {
    if (jn.is_number_integer())
      scn.network.node_ids.push_back(jn.get<int>());
    else
      scn.network.node_ids.push_back(jn.at("id").get<int>());
  }

  for (const json& jl : doc.at("links")) {
    Link l;
    l.id = jl.at("id").get<int>();
    const std::string ctx = "link " + std::to_string(l.id);
    l.tail = jl.at("tail").get<int>();
    l.head = jl.at("head").get<int>();
    l.vff_mps = jl.value("vff_mps", default_vff);
    l.wback_mps = jl.value("wback_mps", default_wback);
    if (jl.contains("length_m"))
      l.length_m = require_positive(jl, "length_m", ctx);
    else
      l.length_m = l.vff_mps * require_positive(jl, "fftt_s", ctx);
    if (jl.contains("cap_vps")) {
      l.cap_vps = require_positive(jl, "cap_vps", ctx);
      l.satflow_vps = jl.contains("satflow_vps") ? require_positive(jl, "satflow_vps", ctx) : l.cap_vps;
      l.capacitated = jl.value("capacitated", l.cap_vps < l.satflow_vps);
    } else {
      // No bottleneck given: exit and saturation capacities large enough
      // that no queue forms at design demand.
      l.cap_vps = l.satflow_vps = scn.uncap_vps;
      l.capacitated = jl.value("capacitated", false);
    }
    scn.network.links.push_back(l);
  }
  scn.network.finalize();

  struct DemandRow {
    NodeId origin, destination;
    int count;
    double headway_s, start_s;
  };
  std::vector<DemandRow> demand;
  if (doc.contains("demand")) {
    for (const json& jd : doc.at("demand")) {
      DemandRow r;
      r.origin = jd.at("origin").get<int>();
      r.destination = jd.at("destination").get<int>();
      const int raw = jd.at("count").get<int>();
      if (raw < 1) throw ValidationError("demand count must be >= 1");
      r.count = std::max(1, static_cast<int>(std::lround(raw * opts.demand_scale)));
      r.headway_s = require_positive(jd, "headway_s", "demand row");
      r.start_s = jd.value("start_s", 0.0);
      demand.push_back(r);
    }
  }

  for (const DemandRow& r : demand) {
    for (int k = 0; k < r.count; ++k) {
      UserSpec u;
      u.origin = r.origin;
      u.destination = r.destination;
      u.depart_s = r.start_s + r.headway_s * k;
      scn.users.push_back(u);
    }
  }
  if (doc.contains("users")) {
    for (const json& ju : doc.at("users")) {
      UserSpec u;
      u.origin = ju.at("origin").get<int>();
      u.destination = ju.at("destination").get<int>();
      u.depart_s = ju.at("depart_s").get<double>();
      scn.users.push_back(u);
    }
  }
  if (scn.users.empty()) throw ValidationError("scenario has no users");
  for (std::size_t i = 0; i < scn.users.size(); ++i) {
    scn.users[i].id = static_cast<int>(i);
    scn.network.node_index(scn.users[i].origin);
    scn.network.node_index(scn.users[i].destination);
    if (scn.users[i].origin == scn.users[i].destination)
      throw ValidationError("user " + std::to_string(i) + " has origin == destination");
  }

  // Users sharing an origin must have pairwise distinct departure times;
  // loading order at the origin would otherwise be ambiguous.
  {
    std::map<NodeId, std::set<double>> seen;
    for (const UserSpec& u : scn.users)
      if (!seen[u.origin].insert(u.depart_s).second)
        throw ValidationError("duplicate departure time " + std::to_string(u.depart_s) +
                              " at origin " + std::to_string(u.origin));
  }

  // Route sets: explicit per-OD lists win, otherwise enumerate. One shared
  // set per OD pair.
  std::map<std::pair<NodeId, NodeId>, std::shared_ptr<const std::vector<Route>>> od_routes;
  if (doc.contains("routes")) {
    for (const json& jr : doc.at("routes")) {
      const NodeId o = jr.at("origin").get<int>();
      const NodeId d = jr.at("destination").get<int>();
      auto routes = std::make_shared<std::vector<Route>>();
      for (const json& jlist : jr.at("links_lists")) {
        Route route;
        NodeId at = o;
        route.nodes.push_back(o);
        for (const json& jid : jlist) {
          const Link& l = scn.network.link_by_id(jid.get<int>());
          if (l.tail != at)
            throw ValidationError("explicit route for OD " + std::to_string(o) + "->" +
                                  std::to_string(d) + " is not connected");
          route.links.push_back(l.id);
          route.nodes.push_back(l.head);
          route.fftt_s += l.fftt_s();
          at = l.head;
        }
        if (at != d) throw ValidationError("explicit route does not end at its destination");
        std::set<NodeId> uniq(route.nodes.begin(), route.nodes.end());
        if (uniq.size() != route.nodes.size())
          throw ValidationError("explicit route revisits a node");
        routes->push_back(std::move(route));
      }
      od_routes[{o, d}] = routes;
    }
  }
  for (const UserSpec& u : scn.users) {
    auto key = std::make_pair(u.origin, u.destination);
    auto it = od_routes.find(key);
    if (it == od_routes.end()) {
      auto routes = std::make_shared<std::vector<Route>>(
          enumerate_routes(scn.network, u.origin, u.destination, scn.route_cap));
      it = od_routes.emplace(key, std::move(routes)).first;
    }
    scn.route_sets.push_back(RouteSet{it->second});
  }
  return scn;
}

Scenario load_scenario_file(const std::string& path, const ScenarioOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), opts);
}

}  // namespace dso
