#include "dso/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace dso {

double Trajectory::eval(double t, double vff_mps) const {
  const Pt& f = pts.front();
  const Pt& b = pts.back();
  if (t <= f.t) return f.x;
  if (t >= b.t) return finalized ? b.x + vff_mps * (t - b.t) : b.x;
  auto it = std::lower_bound(pts.begin(), pts.end(), t,
                             [](const Pt& p, double tt) { return p.t < tt; });
  const Pt& hi = *it;
  const Pt& lo = *(it - 1);
  if (hi.t == lo.t) return hi.x;
  const double w = (t - lo.t) / (hi.t - lo.t);
  return lo.x + w * (hi.x - lo.x);
}

void Trajectory::finalize_at(double depart_s, double length_m) {
  // Drop everything after the first time the curve reaches L, then close
  // with the departure instant.
  std::size_t keep = pts.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].x >= length_m) {
      keep = i + 1;
      pts[i].x = length_m;
      break;
    }
  }
  pts.resize(keep);
  if (pts.back().t < depart_s) pts.push_back(Pt{depart_s, length_m});
  finalized = true;
}

namespace {

struct LinearPiece {
  double t0, x0, slope;
};

// Evaluates the shifted-leader constraint g(t) = leader(t - tau) - d with
// the open/finalized tail semantics.
class ShiftedLeader {
 public:
  ShiftedLeader(const Trajectory& leader, double tau, double d, double vff)
      : leader_(leader), tau_(tau), d_(d), vff_(vff) {}

  double eval(double t) const { return leader_.eval(t - tau_, vff_) - d_; }

  void collect_breaks(double from, std::vector<double>& out) const {
    for (const Trajectory::Pt& p : leader_.pts)
      if (p.t + tau_ > from) out.push_back(p.t + tau_);
  }

 private:
  const Trajectory& leader_;
  double tau_, d_, vff_;
};

}  // namespace

Trajectory follower_trajectory(const Trajectory* leader, double arrival_s, const Link& link,
                               const DerivedLinkParams& p) {
  const double v = link.vff_mps;
  const double L = link.length_m;
  Trajectory out;
  if (leader == nullptr) {
    out.pts = {{arrival_s, 0.0}, {arrival_s + L / v, L}};
    return out;
  }

  const ShiftedLeader g(*leader, p.reaction_s, p.jam_spacing_m, v);
  auto free_line = [&](double t) { return std::min(v * (t - arrival_s), L); };

  // Breakpoint grid: our own two bends plus every shifted leader bend.
  std::vector<double> grid{arrival_s, arrival_s + L / v};
  g.collect_breaks(arrival_s, grid);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  while (!grid.empty() && grid.front() < arrival_s) grid.erase(grid.begin());

  // Refine with crossings of the two operands, then take the clamped min.
  std::vector<double> times;
  times.reserve(grid.size() * 2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    times.push_back(grid[i]);
    if (i + 1 == grid.size()) break;
    const double t0 = grid[i], t1 = grid[i + 1];
    const double a0 = free_line(t0) - g.eval(t0);
    const double a1 = free_line(t1) - g.eval(t1);
    if ((a0 < 0.0 && a1 > 0.0) || (a0 > 0.0 && a1 < 0.0)) {
      const double tc = t0 + (t1 - t0) * (0.0 - a0) / (a1 - a0);
      if (tc > t0 && tc < t1) times.push_back(tc);
    }
  }
  std::sort(times.begin(), times.end());
  // Instants closer than a nanosecond are numerically the same event;
  // keeping both would manufacture steep phantom segments.
  constexpr double kTimeMerge = 1e-9;
  times.erase(std::unique(times.begin(), times.end(),
                          [](double a, double b) { return b - a <= kTimeMerge; }),
              times.end());

  auto raw = [&](double t) { return std::min(free_line(t), g.eval(t)); };

  out.pts.reserve(times.size() + 4);
  auto push = [&](double t, double x) {
    if (!out.pts.empty()) {
      if (t <= out.pts.back().t + kTimeMerge) return;
      if (x < out.pts.back().x) x = out.pts.back().x;  // guard fp droop
    }
    out.pts.push_back(Trajectory::Pt{t, x});
  };

  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double x = raw(t);
    if (x < 0.0) {
      // Clamped at the entrance; emit the crossing into x >= 0 instead.
      if (i + 1 < times.size()) {
        const double xn = raw(times[i + 1]);
        if (out.pts.empty()) push(t, 0.0);
        if (xn > 0.0) {
          const double tc = t + (times[i + 1] - t) * (0.0 - x) / (xn - x);
          push(tc, 0.0);
        }
      } else if (out.pts.empty()) {
        push(t, 0.0);
      }
      continue;
    }
    push(t, std::min(x, L));
    if (x >= L) break;  // reached the stop line; dwell until departure
  }

  // Tail: beyond the last grid time the free line is flat at L and the
  // constraint is flat (open leader) or rising at free-flow speed behind a
  // departed leader, which clears the stop line exactly a reaction time
  // plus a jam-spacing traversal after the leader's exit.
  if (out.pts.back().x < L && leader->finalized) {
    const double clear = leader->pts.back().t + p.reaction_s + p.jam_spacing_m / v;
    push(std::max(clear, out.pts.back().t + 1e-9), L);
  }

  // Compress exactly collinear interior points.
  if (out.pts.size() > 2) {
    std::vector<Trajectory::Pt> c;
    c.reserve(out.pts.size());
    c.push_back(out.pts.front());
    for (std::size_t i = 1; i + 1 < out.pts.size(); ++i) {
      const auto& a = c.back();
      const auto& b = out.pts[i];
      const auto& d = out.pts[i + 1];
      const double lhs = (b.x - a.x) * (d.t - b.t);
      const double rhs = (d.x - b.x) * (b.t - a.t);
      if (lhs == rhs) continue;
      c.push_back(b);
    }
    c.push_back(out.pts.back());
    out.pts.swap(c);
  }
  return out;
}

double possible_arrival(const Trajectory& leader, const Link& link, const DerivedLinkParams& p) {
  const double d = p.jam_spacing_m;
  const auto& pts = leader.pts;
  if (pts.front().x > d) return pts.front().t + p.reaction_s;  // already past; earliest knowledge

  // Last index with position <= d.
  std::size_t idx = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].x <= d) idx = i;

  if (idx + 1 == pts.size()) {
    // Curve never rises above d within its breakpoints.
    if (!leader.finalized) return kInf;  // dwells at or below d until further notice
    if (pts.back().x == d) return pts.back().t + p.reaction_s;
    return pts.back().t + (d - pts.back().x) / link.vff_mps + p.reaction_s;
  }
  const auto& lo = pts[idx];
  const auto& hi = pts[idx + 1];
  double t_hit;
  if (lo.x == d)
    t_hit = lo.t;  // end of a dwell exactly at the jam-spacing position
  else
    t_hit = lo.t + (hi.t - lo.t) * (d - lo.x) / (hi.x - lo.x);
  return t_hit + p.reaction_s;
}

double possible_departure(std::optional<double> prev_departure_s, double arrival_s,
                          const DerivedLinkParams& p) {
  const double own = arrival_s + p.fftt_s;
  if (!prev_departure_s) return own;
  return std::max(*prev_departure_s + p.min_exit_headway_s, own);
}

}  // namespace dso
