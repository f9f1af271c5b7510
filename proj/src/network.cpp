#include "dso/network.hpp"

#include <algorithm>
#include <sstream>

namespace dso {

DerivedLinkParams derived_link_params(const Link& link) {
  DerivedLinkParams p;
  p.jam_density_vpm = (link.vff_mps + link.wback_mps) * link.satflow_vps /
                      (link.vff_mps * link.wback_mps);
  p.reaction_s = 1.0 / (link.wback_mps * p.jam_density_vpm);
  p.jam_spacing_m = 1.0 / p.jam_density_vpm;
  p.fftt_s = link.length_m / link.vff_mps;
  p.min_exit_headway_s = 1.0 / link.cap_vps;
  return p;
}

int Network::node_index(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) throw ValidationError("unknown node id " + std::to_string(id));
  return it->second;
}

int Network::link_index(LinkId id) const {
  auto it = link_index_.find(id);
  if (it == link_index_.end()) throw ValidationError("unknown link id " + std::to_string(id));
  return it->second;
}

void Network::finalize() {
  std::sort(node_ids.begin(), node_ids.end());
  if (std::adjacent_find(node_ids.begin(), node_ids.end()) != node_ids.end())
    throw ValidationError("duplicate node id");
  node_index_.clear();
  for (std::size_t i = 0; i < node_ids.size(); ++i) node_index_[node_ids[i]] = static_cast<int>(i);

  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });
  link_index_.clear();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (link_index_.count(l.id)) throw ValidationError("duplicate link id " + std::to_string(l.id));
    link_index_[l.id] = static_cast<int>(i);
    if (!node_index_.count(l.tail) || !node_index_.count(l.head))
      throw ValidationError("link " + std::to_string(l.id) + " references unknown node");
    if (l.tail == l.head) throw ValidationError("link " + std::to_string(l.id) + " is a self loop");
    if (!(l.length_m > 0.0) || !(l.vff_mps > 0.0) || !(l.wback_mps > 0.0) ||
        !(l.satflow_vps > 0.0) || !(l.cap_vps > 0.0))
      throw ValidationError("link " + std::to_string(l.id) + " has a nonpositive physical parameter");
    if (l.cap_vps > l.satflow_vps)
      throw ValidationError("link " + std::to_string(l.id) +
                            " bottleneck capacity exceeds saturation flow");
    const DerivedLinkParams p = derived_link_params(l);
    if (l.length_m < p.jam_spacing_m)
      throw ValidationError("link " + std::to_string(l.id) + " is shorter than its jam spacing");
  }

  out_links.assign(node_ids.size(), {});
  in_links.assign(node_ids.size(), {});
  for (std::size_t i = 0; i < links.size(); ++i) {
    out_links[static_cast<std::size_t>(node_index(links[i].tail))].push_back(static_cast<int>(i));
    in_links[static_cast<std::size_t>(node_index(links[i].head))].push_back(static_cast<int>(i));
  }
  // Keep adjacency in link-id order so traversals are canonical.
  for (auto& v : out_links)
    std::sort(v.begin(), v.end(), [&](int a, int b) { return links[a].id < links[b].id; });
  for (auto& v : in_links)
    std::sort(v.begin(), v.end(), [&](int a, int b) { return links[a].id < links[b].id; });

  node_kinds.assign(node_ids.size(), NodeKind::Isolated);
  for (std::size_t n = 0; n < node_ids.size(); ++n) {
    const std::size_t din = in_links[n].size(), dout = out_links[n].size();
    if (din == 0 && dout == 0)
      node_kinds[n] = NodeKind::Isolated;
    else if (din == 0)
      node_kinds[n] = NodeKind::Source;
    else if (dout == 0)
      node_kinds[n] = NodeKind::Sink;
    else if (din == 1 && dout == 1)
      node_kinds[n] = NodeKind::Normal;
    else if (din == 1)
      node_kinds[n] = NodeKind::Diverge;
    else if (dout == 1)
      node_kinds[n] = NodeKind::Merge;
    else
      node_kinds[n] = NodeKind::Intersection;
  }
}

namespace {

void dfs_routes(const Network& net, int node, int dest, std::vector<char>& visited,
                std::vector<NodeId>& node_stack, std::vector<LinkId>& link_stack, double fftt,
                std::size_t max_routes, std::vector<Route>& out) {
  if (node == dest) {
    if (out.size() >= max_routes)
      throw ValidationError("route enumeration exceeded cap of " + std::to_string(max_routes));
    out.push_back(Route{node_stack, link_stack, fftt});
    return;
  }
  for (int li : net.out_links[static_cast<std::size_t>(node)]) {
    const Link& l = net.links[static_cast<std::size_t>(li)];
    const int next = net.node_index(l.head);
    if (visited[static_cast<std::size_t>(next)]) continue;
    visited[static_cast<std::size_t>(next)] = 1;
    node_stack.push_back(l.head);
    link_stack.push_back(l.id);
    dfs_routes(net, next, dest, visited, node_stack, link_stack, fftt + l.fftt_s(), max_routes, out);
    link_stack.pop_back();
    node_stack.pop_back();
    visited[static_cast<std::size_t>(next)] = 0;
  }
}

}  // namespace

std::vector<Route> enumerate_routes(const Network& net, NodeId origin, NodeId destination,
                                    std::size_t max_routes) {
  if (origin == destination) throw ValidationError("route query with origin == destination");
  const int o = net.node_index(origin), d = net.node_index(destination);
  std::vector<Route> out;
  std::vector<char> visited(static_cast<std::size_t>(net.num_nodes()), 0);
  visited[static_cast<std::size_t>(o)] = 1;
  std::vector<NodeId> nodes{origin};
  std::vector<LinkId> links;
  // Out-links are visited in link-id order, so the DFS emits routes in
  // lexicographic order of their link-id sequences.
  dfs_routes(net, o, d, visited, nodes, links, 0.0, max_routes, out);
  return out;
}

}  // namespace dso
