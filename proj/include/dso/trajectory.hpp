#pragma once

#include <optional>
#include <vector>

#include "dso/network.hpp"

namespace dso {

// Piecewise-linear vehicle trajectory on one link: breakpoints (time s,
// position m), position nondecreasing, segment slopes in [0, v_l].
//
// Beyond the last breakpoint the curve is interpreted as:
//   - open (vehicle still on the link): dwells at the last position;
//   - finalized (vehicle departed at back().t, position L): keeps driving
//     at free-flow speed, which is how a departed leader constrains the
//     vehicles it leaves behind.
struct Trajectory {
  struct Pt {
    double t;
    double x;
  };
  std::vector<Pt> pts;
  bool finalized = false;

  double arrival_s() const { return pts.front().t; }
  double eval(double t, double vff_mps) const;

  // Truncates the curve at the actual departure instant. The curve must
  // already reach position L (a dwell at L is inserted when the vehicle
  // waited at the stop line).
  void finalize_at(double depart_s, double length_m);
};

// Newell car-following response: the pointwise minimum of the free-flow
// line from (arrival, 0) and the leader's curve shifted by the reaction
// time and jam spacing, clamped to [0, L]. Pass leader = nullptr for the
// first vehicle on the link.
Trajectory follower_trajectory(const Trajectory* leader, double arrival_s, const Link& link,
                               const DerivedLinkParams& p);

// Earliest time a new vehicle may enter the link behind this leader: the
// last instant the leader occupies the jam-spacing position, plus the
// reaction time. +inf when the leader, on current knowledge, never clears
// that position (entrance blocked until the queue ahead moves).
double possible_arrival(const Trajectory& leader, const Link& link, const DerivedLinkParams& p);

// Earliest feasible exit: bottleneck headway behind the previous departure
// and the vehicle's own free-flow traversal.
double possible_departure(std::optional<double> prev_departure_s, double arrival_s,
                          const DerivedLinkParams& p);

}  // namespace dso
