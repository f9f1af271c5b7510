#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dso/common.hpp"

namespace dso {

using NodeId = int;
using LinkId = int;
using UserId = int;

// Directed road link with triangular/trapezoidal fundamental diagram
// parameters: free-flow speed, backward wave speed, saturation flow and an
// exit bottleneck capacity (<= saturation flow).
struct Link {
  LinkId id = -1;
  NodeId tail = -1;
  NodeId head = -1;
  double length_m = 0.0;
  double vff_mps = 0.0;      // free-flow speed
  double wback_mps = 0.0;    // backward wave speed
  double satflow_vps = 0.0;  // saturation flow
  double cap_vps = 0.0;      // bottleneck capacity at the link exit
  bool capacitated = false;  // true when the exit bottleneck can bind

  double fftt_s() const { return length_m / vff_mps; }
};

// Car-following constants derived from the fundamental diagram.
struct DerivedLinkParams {
  double jam_density_vpm = 0.0;     // kappa = (v + w) q / (v w)
  double reaction_s = 0.0;          // tau = 1 / (w kappa)
  double jam_spacing_m = 0.0;       // d = 1 / kappa
  double fftt_s = 0.0;              // L / v
  double min_exit_headway_s = 0.0;  // 1 / mu
};

DerivedLinkParams derived_link_params(const Link& link);

enum class NodeKind { Isolated, Source, Sink, Normal, Diverge, Merge, Intersection };

struct Network {
  std::vector<NodeId> node_ids;  // sorted external ids
  std::vector<Link> links;       // sorted by external link id
  // Indexed by node position in node_ids; values are link positions in links.
  std::vector<std::vector<int>> out_links;
  std::vector<std::vector<int>> in_links;
  std::vector<NodeKind> node_kinds;

  int node_index(NodeId id) const;
  int link_index(LinkId id) const;
  const Link& link_by_id(LinkId id) const { return links[link_index(id)]; }
  int num_nodes() const { return static_cast<int>(node_ids.size()); }
  int num_links() const { return static_cast<int>(links.size()); }

  // Validates endpoints, physical parameters and classification; fills the
  // adjacency indices. Throws ValidationError.
  void finalize();

 private:
  std::unordered_map<NodeId, int> node_index_;
  std::unordered_map<LinkId, int> link_index_;
};

struct UserSpec {
  UserId id = -1;
  NodeId origin = -1;
  NodeId destination = -1;
  double depart_s = 0.0;
};

// An acyclic route as a node sequence plus the traversed link ids.
struct Route {
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;
  double fftt_s = 0.0;  // sum of link free-flow times
};

// A user's strategy set. The null route (stay off the network) is implicit:
// profiles use kNullRoute instead of an index into routes.
struct RouteSet {
  std::shared_ptr<const std::vector<Route>> routes;
  std::size_t size() const { return routes ? routes->size() : 0; }
  const Route& at(int idx) const { return (*routes)[static_cast<std::size_t>(idx)]; }
};

inline constexpr int kNullRoute = -1;

// One route index (or kNullRoute) per user.
using RouteProfile = std::vector<int>;

// All simple directed paths from origin to destination in deterministic
// canonical order (lexicographic by traversed link ids). Empty when the
// nodes are not connected. Throws ValidationError when more than max_routes
// paths exist.
std::vector<Route> enumerate_routes(const Network& net, NodeId origin, NodeId destination,
                                    std::size_t max_routes = 10000);

}  // namespace dso
