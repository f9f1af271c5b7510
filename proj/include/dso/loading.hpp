#pragma once

#include <vector>

#include "dso/scenario.hpp"
#include "dso/trajectory.hpp"

namespace dso {

struct LinkVisit {
  LinkId link = -1;
  double t_arrival = 0.0;
  double t_departure = 0.0;
  double t_pa = -kInf;  // entry bound that applied to this vehicle
  double t_pd = 0.0;    // exit bound at the moment it departed
};

struct TrajectoryRecord {
  UserId user = -1;
  LinkId link = -1;
  Trajectory curve;
};

// Per-node admission counts, keyed by upstream slot. Slots follow the
// node's in-link order (by link id); origin nodes get one extra trailing
// slot for the virtual source feeding departures into the network.
struct MergeLedger {
  std::vector<std::vector<long long>> counts;  // [node index][slot]
};

// Index of the most under-served upstream slot: smallest admitted-count to
// capacity ratio, ties to the lowest slot.
std::size_t merge_priority(const std::vector<long long>& counts,
                           const std::vector<double>& capacities_vps);

struct NodeCandidate {
  int slot = 0;                // upstream slot at the node
  UserId user = -1;
  double t_pd = 0.0;           // possible departure from the upstream link
  double t_pa_downstream = -kInf;
  int downstream = -1;         // link index the vehicle enters next; -1 = arrives
};

struct NodeDecision {
  std::size_t pick = 0;   // index into the candidate list
  double t_depart = 0.0;  // max(t_pd, t_pa_downstream) of the winner
};

// Chooses the vehicle admitted through one node. The unique earliest-ready
// candidate wins; exact ties heading for the same downstream link go to
// merge_priority. Updates the winner's ledger count.
NodeDecision resolve_node(const std::vector<NodeCandidate>& candidates, MergeLedger& ledger,
                          int node_index, const std::vector<double>& slot_capacities_vps);

struct LoadOptions {
  bool record_visits = true;
  bool record_trajectories = false;
};

struct LoadingResult {
  std::vector<double> costs_s;                  // per user; 0 for null-route users
  std::vector<std::vector<LinkVisit>> visits;   // per user, in traversal order
  std::vector<TrajectoryRecord> trajectories;   // only with record_trajectories
  bool feasible = true;
};

// Event-driven network loading of one route profile. Deterministic: events
// commit in (time, node id, upstream link id) order, so identical inputs
// give bit-identical results. Throws GridlockError when vehicles remain but
// none can advance.
LoadingResult load(const Scenario& scn, const RouteProfile& profile, const LoadOptions& opts = {});

void write_trajectory_csv(const LoadingResult& result, std::ostream& out);

}  // namespace dso
