#include "dso/loading.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace dso {

std::size_t merge_priority(const std::vector<long long>& counts,
                           const std::vector<double>& capacities_vps) {
  std::size_t best = 0;
  double best_ratio = kInf;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double ratio = static_cast<double>(counts[i]) / capacities_vps[i];
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = i;
    }
  }
  return best;
}

NodeDecision resolve_node(const std::vector<NodeCandidate>& candidates, MergeLedger& ledger,
                          int node_index, const std::vector<double>& slot_capacities_vps) {
  std::size_t lead = 0;
  double lead_ready = kInf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double ready = std::max(candidates[i].t_pd, candidates[i].t_pa_downstream);
    if (ready < lead_ready ||
        (ready == lead_ready && candidates[i].slot < candidates[lead].slot)) {
      lead_ready = ready;
      lead = i;
    }
  }

  // Exact-time contenders for the same downstream link; near-equal times
  // are ordinary sequential events, not contention.
  std::vector<std::size_t> group;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double ready = std::max(candidates[i].t_pd, candidates[i].t_pa_downstream);
    if (ready == lead_ready && candidates[i].downstream == candidates[lead].downstream)
      group.push_back(i);
  }

  std::size_t pick = lead;
  if (group.size() > 1 && candidates[lead].downstream >= 0) {
    std::vector<long long> counts;
    std::vector<double> caps;
    for (std::size_t g : group) {
      counts.push_back(ledger.counts[static_cast<std::size_t>(node_index)]
                                    [static_cast<std::size_t>(candidates[g].slot)]);
      caps.push_back(slot_capacities_vps[static_cast<std::size_t>(candidates[g].slot)]);
    }
    pick = group[merge_priority(counts, caps)];
  }
  ledger.counts[static_cast<std::size_t>(node_index)]
               [static_cast<std::size_t>(candidates[pick].slot)]++;
  return NodeDecision{pick, lead_ready};
}

namespace {

constexpr int kNoBlock = std::numeric_limits<int>::max();

struct LinkState {
  DerivedLinkParams prm;
  double entry_lag = 0.0;  // d/v + tau, minimum spacing behind the last entrant
  int m0 = kNoBlock;       // entrants that fit bumper-to-bumper; kNoBlock if never binding
  int entered = 0;
  std::vector<double> t_arr;       // by entrant index
  std::vector<double> t_dep;       // by entrant index; size() == departed count
  std::vector<UserId> entrant;     // by entrant index
  double extension_s = 0.0;        // (m0*d - L)/v, valid when m0 != kNoBlock

  int departed() const { return static_cast<int>(t_dep.size()); }
  int on_link() const { return entered - departed(); }

  // Earliest feasible next entry. Derived from the Newell recursion: only
  // the immediate leader's free-flow passage of the jam-spacing position
  // and the exit of the vehicle m0 positions back can bind; everything in
  // between is dominated.
  double next_entry_bound() const {
    if (entered == 0) return -kInf;
    if (on_link() >= m0) return kInf;  // queue reaches the entrance
    double bound = t_arr[static_cast<std::size_t>(entered - 1)] + entry_lag;
    if (entered >= m0) {
      const double t = t_dep[static_cast<std::size_t>(entered - m0)] +
                       m0 * prm.reaction_s + extension_s;
      bound = std::max(bound, t);
    }
    return bound;
  }
};

struct UserState {
  const Route* route = nullptr;  // null for the off-network strategy
  int leg = -1;                  // -1 waiting at origin, otherwise index into route links
  double t_arr = 0.0;            // arrival at the current link
  bool done = false;
};

}  // namespace

LoadingResult load(const Scenario& scn, const RouteProfile& profile, const LoadOptions& opts) {
  const Network& net = scn.network;
  const int n_users = scn.num_users();
  const int n_links = net.num_links();
  if (static_cast<int>(profile.size()) != n_users)
    throw std::invalid_argument("profile size does not match user count");

  LoadingResult res;
  res.costs_s.assign(static_cast<std::size_t>(n_users), 0.0);
  if (opts.record_visits) res.visits.assign(static_cast<std::size_t>(n_users), {});

  std::vector<LinkState> ls(static_cast<std::size_t>(n_links));
  for (int li = 0; li < n_links; ++li) {
    const Link& l = net.links[static_cast<std::size_t>(li)];
    LinkState& s = ls[static_cast<std::size_t>(li)];
    s.prm = derived_link_params(l);
    s.entry_lag = s.prm.jam_spacing_m / l.vff_mps + s.prm.reaction_s;
    double m = std::ceil(l.length_m / s.prm.jam_spacing_m);
    // Nudge to the smallest integer with m*d >= L despite fp rounding.
    while (m > 1.0 && (m - 1.0) * s.prm.jam_spacing_m >= l.length_m) m -= 1.0;
    while (m * s.prm.jam_spacing_m < l.length_m) m += 1.0;
    if (m <= static_cast<double>(n_users)) {
      s.m0 = static_cast<int>(m);
      s.extension_s = (s.m0 * s.prm.jam_spacing_m - l.length_m) / l.vff_mps;
    }
  }

  std::vector<UserState> us(static_cast<std::size_t>(n_users));
  int remaining = 0;
  for (int u = 0; u < n_users; ++u) {
    const int r = profile[static_cast<std::size_t>(u)];
    if (r == kNullRoute) continue;
    const RouteSet& rs = scn.route_sets[static_cast<std::size_t>(u)];
    if (r < 0 || static_cast<std::size_t>(r) >= rs.size())
      throw std::invalid_argument("route index out of range for user " + std::to_string(u));
    us[static_cast<std::size_t>(u)].route = &rs.at(r);
    ++remaining;
  }

  // Per-origin FIFO of pending departures, ordered by departure time.
  std::vector<std::vector<UserId>> origin_queue(static_cast<std::size_t>(net.num_nodes()));
  std::vector<std::size_t> origin_next(static_cast<std::size_t>(net.num_nodes()), 0);
  std::vector<int> origin_nodes;
  for (int u = 0; u < n_users; ++u) {
    if (us[static_cast<std::size_t>(u)].route == nullptr) continue;
    const int o = net.node_index(scn.users[static_cast<std::size_t>(u)].origin);
    if (origin_queue[static_cast<std::size_t>(o)].empty()) origin_nodes.push_back(o);
    origin_queue[static_cast<std::size_t>(o)].push_back(u);
  }
  std::sort(origin_nodes.begin(), origin_nodes.end());
  for (int o : origin_nodes) {
    auto& q = origin_queue[static_cast<std::size_t>(o)];
    std::sort(q.begin(), q.end(), [&](UserId a, UserId b) {
      return scn.users[static_cast<std::size_t>(a)].depart_s <
             scn.users[static_cast<std::size_t>(b)].depart_s;
    });
  }

  // Ledger slots: in-links in id order, then one source slot at origins.
  MergeLedger ledger;
  ledger.counts.assign(static_cast<std::size_t>(net.num_nodes()), {});
  std::vector<std::vector<double>> slot_caps(static_cast<std::size_t>(net.num_nodes()));
  std::vector<std::vector<int>> slot_of_link(static_cast<std::size_t>(net.num_nodes()));
  for (int n = 0; n < net.num_nodes(); ++n) {
    const auto& in = net.in_links[static_cast<std::size_t>(n)];
    slot_of_link[static_cast<std::size_t>(n)].assign(in.size(), 0);
    for (std::size_t k = 0; k < in.size(); ++k) {
      slot_of_link[static_cast<std::size_t>(n)][k] = static_cast<int>(k);
      slot_caps[static_cast<std::size_t>(n)].push_back(
          net.links[static_cast<std::size_t>(in[k])].cap_vps);
    }
    if (!origin_queue[static_cast<std::size_t>(n)].empty())
      slot_caps[static_cast<std::size_t>(n)].push_back(1e18);  // virtual source
    ledger.counts[static_cast<std::size_t>(n)].assign(slot_caps[static_cast<std::size_t>(n)].size(),
                                                      0);
  }
  auto source_slot = [&](int node) {
    return static_cast<int>(slot_caps[static_cast<std::size_t>(node)].size()) - 1;
  };
  auto link_slot = [&](int node, int link_index) {
    const auto& in = net.in_links[static_cast<std::size_t>(node)];
    for (std::size_t k = 0; k < in.size(); ++k)
      if (in[k] == link_index) return static_cast<int>(k);
    throw std::logic_error("link not incident to node");
  };

  struct Pending {
    double ready;
    int node;     // node index where the move resolves
    int order;    // upstream ordering key: link index, or n_links + origin for sources
    int link;     // upstream link index, -1 for source
    UserId user;
    double pd, pa;
    int downstream;  // link index, -1 when the user finishes
  };

  auto downstream_of = [&](const UserState& s) -> int {
    const std::size_t next_leg = static_cast<std::size_t>(s.leg + 1);
    if (next_leg >= s.route->links.size()) return -1;
    return net.link_index(s.route->links[next_leg]);
  };

  auto open_visit = [&](UserId u, int li, double t, double pa) {
    if (!opts.record_visits) return;
    LinkVisit v;
    v.link = net.links[static_cast<std::size_t>(li)].id;
    v.t_arrival = t;
    v.t_pa = pa;
    res.visits[static_cast<std::size_t>(u)].push_back(v);
  };

  std::vector<Pending> cands;
  cands.reserve(static_cast<std::size_t>(n_links) + origin_nodes.size());

  while (remaining > 0) {
    cands.clear();

    for (int li = 0; li < n_links; ++li) {
      LinkState& s = ls[static_cast<std::size_t>(li)];
      if (s.on_link() == 0) continue;
      const UserId u = s.entrant[static_cast<std::size_t>(s.departed())];
      UserState& st = us[static_cast<std::size_t>(u)];
      const double pd =
          possible_departure(s.departed() > 0 ? std::optional<double>(s.t_dep.back()) : std::nullopt,
                             s.t_arr[static_cast<std::size_t>(s.departed())], s.prm);
      const int dn = downstream_of(st);
      const double pa = dn >= 0 ? ls[static_cast<std::size_t>(dn)].next_entry_bound() : -kInf;
      const double ready = std::max(pd, pa);
      const int node = net.node_index(net.links[static_cast<std::size_t>(li)].head);
      cands.push_back(Pending{ready, node, li, li, u, pd, pa, dn});
    }
    for (int o : origin_nodes) {
      const auto& q = origin_queue[static_cast<std::size_t>(o)];
      const std::size_t next = origin_next[static_cast<std::size_t>(o)];
      if (next >= q.size()) continue;
      const UserId u = q[next];
      const UserState& st = us[static_cast<std::size_t>(u)];
      const int dn = downstream_of(st);  // leg == -1: first route link
      const double pd = scn.users[static_cast<std::size_t>(u)].depart_s;
      const double pa = ls[static_cast<std::size_t>(dn)].next_entry_bound();
      cands.push_back(Pending{std::max(pd, pa), o, n_links + o, -1, u, pd, pa, dn});
    }

    const Pending* best = nullptr;
    for (const Pending& c : cands) {
      if (c.ready == kInf) continue;
      if (best == nullptr || c.ready < best->ready ||
          (c.ready == best->ready &&
           (c.node < best->node || (c.node == best->node && c.order < best->order))))
        best = &c;
    }
    if (best == nullptr) {
      // Nothing can move: walk the blocking chain to name the cycle.
      std::vector<int> chain;
      std::vector<char> seen(static_cast<std::size_t>(n_links), 0);
      int li = -1;
      for (const Pending& c : cands)
        if (c.downstream >= 0) {
          li = c.downstream;
          break;
        }
      while (li >= 0 && !seen[static_cast<std::size_t>(li)]) {
        seen[static_cast<std::size_t>(li)] = 1;
        chain.push_back(net.links[static_cast<std::size_t>(li)].id);
        const LinkState& s = ls[static_cast<std::size_t>(li)];
        const UserState& st = us[static_cast<std::size_t>(s.entrant[static_cast<std::size_t>(s.departed())])];
        li = downstream_of(st);
      }
      std::string msg = "gridlock: blocked cycle";
      for (int id : chain) msg += " " + std::to_string(id);
      throw GridlockError(msg, chain);
    }

    // Resolve the node the winning move passes through, honoring merge
    // priority among exact-time contenders for the same downstream link.
    std::vector<NodeCandidate> node_cands;
    std::vector<const Pending*> node_pending;
    for (const Pending& c : cands) {
      if (c.node != best->node || c.ready != best->ready) continue;
      NodeCandidate nc;
      nc.slot = c.link >= 0 ? link_slot(c.node, c.link) : source_slot(c.node);
      nc.user = c.user;
      nc.t_pd = c.pd;
      nc.t_pa_downstream = c.pa;
      nc.downstream = c.downstream;
      node_cands.push_back(nc);
      node_pending.push_back(&c);
    }
    const NodeDecision dec =
        resolve_node(node_cands, ledger, best->node, slot_caps[static_cast<std::size_t>(best->node)]);
    const Pending& win = *node_pending[dec.pick];
    const double t = dec.t_depart;

    UserState& st = us[static_cast<std::size_t>(win.user)];
    if (win.link >= 0) {
      LinkState& s = ls[static_cast<std::size_t>(win.link)];
      if (opts.record_visits) {
        LinkVisit& v = res.visits[static_cast<std::size_t>(win.user)].back();
        v.t_departure = t;
        v.t_pd = win.pd;
      }
      s.t_dep.push_back(t);
    } else {
      origin_next[static_cast<std::size_t>(best->node)]++;
    }

    if (win.downstream >= 0) {
      LinkState& d = ls[static_cast<std::size_t>(win.downstream)];
      d.t_arr.push_back(t);
      d.entrant.push_back(win.user);
      d.entered++;
      st.leg++;
      st.t_arr = t;
      open_visit(win.user, win.downstream, t, win.pa);
    } else {
      st.done = true;
      res.costs_s[static_cast<std::size_t>(win.user)] =
          t - scn.users[static_cast<std::size_t>(win.user)].depart_s;
      --remaining;
    }
  }

  if (opts.record_trajectories) {
    for (int li = 0; li < n_links; ++li) {
      const LinkState& s = ls[static_cast<std::size_t>(li)];
      const Link& l = net.links[static_cast<std::size_t>(li)];
      const Trajectory* lead = nullptr;
      for (int e = 0; e < s.entered; ++e) {
        Trajectory curve =
            follower_trajectory(lead, s.t_arr[static_cast<std::size_t>(e)], l, s.prm);
        curve.finalize_at(s.t_dep[static_cast<std::size_t>(e)], l.length_m);
        res.trajectories.push_back(
            TrajectoryRecord{s.entrant[static_cast<std::size_t>(e)], l.id, std::move(curve)});
        lead = &res.trajectories.back().curve;
      }
    }
  }
  return res;
}

void write_trajectory_csv(const LoadingResult& result, std::ostream& out) {
  out << "user,link,t_arrival,t_departure,t_pa,t_pd\n";
  char buf[160];
  for (std::size_t u = 0; u < result.visits.size(); ++u) {
    for (const LinkVisit& v : result.visits[u]) {
      std::snprintf(buf, sizeof buf, "%zu,%d,%.12g,%.12g,%.12g,%.12g\n", u, v.link, v.t_arrival,
                    v.t_departure, v.t_pa, v.t_pd);
      out << buf;
    }
  }
}

}  // namespace dso
