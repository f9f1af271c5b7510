#include "dso/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/LU>

namespace dso {

std::vector<double> choice_distribution(const Game& game, const RouteProfile& profile, UserId user,
                                        const DynamicsSpec& spec) {
  const std::vector<double> vals = game.route_values(profile, user);
  const std::size_t n = vals.size();
  std::vector<double> p(n, 0.0);
  if (n == 0) return p;
  const int cur = profile[static_cast<std::size_t>(user)];

  switch (spec.kind) {
    case DynamicsKind::Better: {
      const double cur_val = cur == kNullRoute ? -kInf : vals[static_cast<std::size_t>(cur)];
      double total = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (vals[r] > cur_val + kUtilityEps) {
          p[r] = spec.better_weighting == BetterChoiceWeighting::Uniform
                     ? 1.0
                     : vals[r] - cur_val;  // weight by the improvement
          total += p[r];
        }
      }
      if (total == 0.0) {
        if (cur != kNullRoute) p[static_cast<std::size_t>(cur)] = 1.0;
        return p;
      }
      for (double& x : p) x /= total;
      return p;
    }
    case DynamicsKind::Best: {
      double best = -kInf;
      for (double v : vals) best = std::max(best, v);
      std::size_t ties = 0;
      for (double v : vals)
        if (v >= best - kUtilityEps) ++ties;
      for (std::size_t r = 0; r < n; ++r)
        if (vals[r] >= best - kUtilityEps) p[r] = 1.0 / static_cast<double>(ties);
      return p;
    }
    case DynamicsKind::Logit: {
      double best = -kInf;
      for (double v : vals) best = std::max(best, v);
      double total = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        p[r] = std::exp(spec.beta * (vals[r] - best));  // max-shift for overflow safety
        total += p[r];
      }
      for (double& x : p) x /= total;
      return p;
    }
  }
  return p;
}

StepOutcome dynamics_step(const Game& game, RouteProfile& profile, const DynamicsSpec& spec,
                          Rng& rng) {
  const int n_users = game.num_users();
  const UserId user = static_cast<UserId>(rng.uniform_index(static_cast<std::size_t>(n_users)));
  const double u = rng.next_double();

  const std::vector<double> p = choice_distribution(game, profile, user, spec);
  StepOutcome out;
  out.user = user;
  out.old_route = profile[static_cast<std::size_t>(user)];
  out.new_route = out.old_route;
  if (!p.empty()) {
    // Inverse-CDF draw; by construction the weights sum to 1.
    double acc = 0.0;
    std::size_t pick = p.size() - 1;
    for (std::size_t r = 0; r < p.size(); ++r) {
      acc += p[r];
      if (u < acc) {
        pick = r;
        break;
      }
    }
    out.new_route = static_cast<int>(pick);
  }
  out.changed = out.new_route != out.old_route;
  profile[static_cast<std::size_t>(user)] = out.new_route;
  return out;
}

StepOutcome better_response_step(const Game& game, RouteProfile& profile, Rng& rng) {
  DynamicsSpec spec;
  spec.kind = DynamicsKind::Better;
  return dynamics_step(game, profile, spec, rng);
}

StepOutcome best_response_step(const Game& game, RouteProfile& profile, Rng& rng) {
  DynamicsSpec spec;
  spec.kind = DynamicsKind::Best;
  return dynamics_step(game, profile, spec, rng);
}

StepOutcome logit_step(const Game& game, RouteProfile& profile, double beta, Rng& rng) {
  DynamicsSpec spec;
  spec.kind = DynamicsKind::Logit;
  spec.beta = beta;
  return dynamics_step(game, profile, spec, rng);
}

double BetaSchedule::value(double tau, int num_users) const {
  switch (kind) {
    case BetaScheduleKind::TheoreticalLog: {
      const double n = std::ceil(static_cast<double>(num_users) / 2.0);
      return std::log(tau + 1.0) / n;
    }
    case BetaScheduleKind::Log:
      return std::log(tau + 1.0) / param;
    case BetaScheduleKind::Linear:
      return (tau + 1.0) / param;
    case BetaScheduleKind::Fixed:
      return param;
  }
  return param;
}

BetaSchedule BetaSchedule::parse(const std::string& text) {
  BetaSchedule s;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto need_arg = [&](BetaScheduleKind k) {
    if (arg.empty()) throw ValidationError("schedule '" + head + "' needs a parameter");
    s.kind = k;
    s.param = std::stod(arg);
    if (!(s.param > 0.0)) throw ValidationError("schedule parameter must be positive");
  };
  if (head == "theolog") {
    s.kind = BetaScheduleKind::TheoreticalLog;
  } else if (head == "log") {
    need_arg(BetaScheduleKind::Log);
  } else if (head == "linear") {
    need_arg(BetaScheduleKind::Linear);
  } else if (head == "fixed") {
    need_arg(BetaScheduleKind::Fixed);
  } else {
    throw ValidationError("unknown schedule '" + text + "' (theolog | log:C | linear:C | fixed:B)");
  }
  return s;
}

std::string BetaSchedule::describe() const {
  char buf[64];
  switch (kind) {
    case BetaScheduleKind::TheoreticalLog:
      return "theolog";
    case BetaScheduleKind::Log:
      std::snprintf(buf, sizeof buf, "log:%g", param);
      return buf;
    case BetaScheduleKind::Linear:
      std::snprintf(buf, sizeof buf, "linear:%g", param);
      return buf;
    case BetaScheduleKind::Fixed:
      std::snprintf(buf, sizeof buf, "fixed:%g", param);
      return buf;
  }
  return "";
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << "tau,tc_s,revising_user,changed,nbr_count\n";
  char buf[128];
  for (const TraceRow& r : trace.rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.12g,%d,%d,%d\n", static_cast<long long>(r.tau), r.tc_s,
                  r.revising_user, r.changed ? 1 : 0, r.nbr_count);
    out << buf;
  }
}

std::size_t ChainMatrix::index_of(const RouteProfile& p) const {
  std::size_t idx = 0, mult = 1;
  for (std::size_t u = 0; u < p.size(); ++u) {
    idx += mult * static_cast<std::size_t>(p[u]);
    mult *= static_cast<std::size_t>(radices[u]);
  }
  return idx;
}

namespace {

std::vector<int> profile_radices(const Game& game, std::size_t max_profiles, std::size_t& count) {
  const auto& scn = game.scenario();
  std::vector<int> radices(static_cast<std::size_t>(scn.num_users()));
  double total = 1.0;
  for (int u = 0; u < scn.num_users(); ++u) {
    const std::size_t k = scn.route_sets[static_cast<std::size_t>(u)].size();
    if (k == 0) throw ValidationError("user " + std::to_string(u) + " has an empty route set");
    radices[static_cast<std::size_t>(u)] = static_cast<int>(k);
    total *= static_cast<double>(k);
    if (total > static_cast<double>(max_profiles))
      throw ValidationError("profile space exceeds cap of " + std::to_string(max_profiles));
  }
  count = static_cast<std::size_t>(total);
  return radices;
}

std::vector<RouteProfile> enumerate_profiles(const std::vector<int>& radices, std::size_t count) {
  std::vector<RouteProfile> out;
  out.reserve(count);
  RouteProfile p(radices.size(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(p);
    for (std::size_t u = 0; u < radices.size(); ++u) {
      if (++p[u] < radices[u]) break;
      p[u] = 0;
    }
  }
  return out;
}

}  // namespace

ChainMatrix build_chain_matrix(const Game& game, const DynamicsSpec& spec,
                               std::size_t max_profiles) {
  ChainMatrix chain;
  std::size_t count = 0;
  chain.radices = profile_radices(game, max_profiles, count);
  chain.profiles = enumerate_profiles(chain.radices, count);
  const std::size_t n = count;
  const int n_users = game.num_users();
  chain.P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  const double user_w = 1.0 / static_cast<double>(n_users);
  for (std::size_t row = 0; row < n; ++row) {
    const RouteProfile& r = chain.profiles[row];
    for (int u = 0; u < n_users; ++u) {
      const std::vector<double> p = choice_distribution(game, r, u, spec);
      RouteProfile to = r;
      for (std::size_t route = 0; route < p.size(); ++route) {
        if (p[route] == 0.0) continue;
        to[static_cast<std::size_t>(u)] = static_cast<int>(route);
        chain.P(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(chain.index_of(to))) +=
            user_w * p[route];
      }
      to[static_cast<std::size_t>(u)] = r[static_cast<std::size_t>(u)];
    }
  }
  return chain;
}

void write_chain_csv(const ChainMatrix& chain, std::ostream& out) {
  out << "from,to,prob\n";
  char buf[96];
  for (Eigen::Index i = 0; i < chain.P.rows(); ++i)
    for (Eigen::Index j = 0; j < chain.P.cols(); ++j) {
      if (chain.P(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g\n", static_cast<long long>(i),
                    static_cast<long long>(j), chain.P(i, j));
      out << buf;
    }
}

namespace {

// Strong connectivity of the support graph via forward/backward reach.
bool strongly_connected(const Eigen::MatrixXd& P) {
  const std::size_t n = static_cast<std::size_t>(P.rows());
  auto reach = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t found = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w) {
        const double x = transpose ? P(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(v))
                                   : P(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(w));
        if (x > 0.0 && !seen[w]) {
          seen[w] = 1;
          ++found;
          stack.push_back(w);
        }
      }
    }
    return found == n;
  };
  return reach(false) && reach(true);
}

}  // namespace

Eigen::VectorXd stationary_distribution(const ChainMatrix& chain) {
  const Eigen::Index n = chain.P.rows();
  if (n == 0) throw ValidationError("empty chain");
  if (!strongly_connected(chain.P))
    throw ValidationError("chain is reducible; stationary distribution is not unique");
  bool has_self_loop = false;
  for (Eigen::Index i = 0; i < n && !has_self_loop; ++i)
    if (chain.P(i, i) > 0.0) has_self_loop = true;
  if (!has_self_loop)
    throw ValidationError("chain has no self transitions; aperiodicity not established");

  Eigen::VectorXd pi;
  if (n <= 2048) {
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    Eigen::MatrixXd A = chain.P.transpose() - Eigen::MatrixXd::Identity(n, n);
    A.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    pi = A.partialPivLu().solve(b);
  } else {
    pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    for (int it = 0; it < 2000000; ++it) {
      Eigen::VectorXd next = chain.P.transpose() * pi;
      next /= next.sum();
      const double delta = (next - pi).lpNorm<1>();
      pi.swap(next);
      if (delta < 1e-14) break;
    }
  }

  for (Eigen::Index i = 0; i < n; ++i)
    if (pi(i) < 0.0) pi(i) = 0.0;  // clip LU noise
  pi /= pi.sum();
  const double residual = (chain.P.transpose() * pi - pi).lpNorm<1>();
  if (!(residual <= 1e-10))
    throw ValidationError("stationary distribution residual " + std::to_string(residual) +
                          " exceeds 1e-10");
  return pi;
}

void write_distribution_csv(const ChainMatrix& chain, const Eigen::VectorXd& pi,
                            std::ostream& out) {
  (void)chain;
  out << "state,prob\n";
  char buf[64];
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(i), pi(i));
    out << buf;
  }
}

bool BoolMatrix::get(std::size_t r, std::size_t c) const {
  const std::size_t w = (n + 63) / 64;
  return (words[r * w + c / 64] >> (c % 64)) & 1u;
}

void BoolMatrix::set(std::size_t r, std::size_t c) {
  const std::size_t w = (n + 63) / 64;
  words[r * w + c / 64] |= std::uint64_t{1} << (c % 64);
}

BoolMatrix mutation_pattern(const Game& game, std::size_t max_profiles) {
  std::size_t count = 0;
  const std::vector<int> radices = profile_radices(game, max_profiles, count);
  const std::vector<RouteProfile> profiles = enumerate_profiles(radices, count);
  BoolMatrix m;
  m.n = count;
  m.words.assign(count * ((count + 63) / 64), 0);
  ChainMatrix indexer;
  indexer.radices = radices;
  for (std::size_t i = 0; i < count; ++i) {
    m.set(i, i);
    RouteProfile p = profiles[i];
    for (std::size_t u = 0; u < p.size(); ++u) {
      const int keep = p[u];
      for (int r = 0; r < radices[u]; ++r) {
        p[u] = r;
        m.set(i, indexer.index_of(p));
      }
      p[u] = keep;
    }
  }
  return m;
}

BoolMatrix chain_support(const ChainMatrix& chain) {
  BoolMatrix m;
  m.n = static_cast<std::size_t>(chain.P.rows());
  m.words.assign(m.n * ((m.n + 63) / 64), 0);
  for (Eigen::Index i = 0; i < chain.P.rows(); ++i)
    for (Eigen::Index j = 0; j < chain.P.cols(); ++j)
      if (chain.P(i, j) > 0.0) m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return m;
}

namespace {

BoolMatrix bool_multiply(const BoolMatrix& a, const BoolMatrix& b) {
  const std::size_t n = a.n;
  const std::size_t w = (n + 63) / 64;
  BoolMatrix out;
  out.n = n;
  out.words.assign(n * w, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!a.get(i, k)) continue;
      for (std::size_t j = 0; j < w; ++j) out.words[i * w + j] |= b.words[k * w + j];
    }
  }
  return out;
}

bool is_scrambling(const BoolMatrix& m) {
  const std::size_t n = m.n;
  const std::size_t w = (n + 63) / 64;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      bool share = false;
      for (std::size_t j = 0; j < w && !share; ++j)
        if (m.words[a * w + j] & m.words[b * w + j]) share = true;
      if (!share) return false;
    }
  }
  return true;
}

}  // namespace

int scrambling_exponent(const BoolMatrix& pattern, int cap) {
  BoolMatrix power = pattern;
  for (int n = 1; n <= cap; ++n) {
    if (is_scrambling(power)) return n;
    power = bool_multiply(power, pattern);
  }
  throw ValidationError("pattern matrix is not scrambling up to power " + std::to_string(cap));
}

}  // namespace dso
