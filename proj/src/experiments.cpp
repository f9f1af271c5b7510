#include "dso/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace dso {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<SlotStat> trace_stats(const Trace& trace, int slot_width) {
  if (slot_width < 1) throw ValidationError("slot width must be >= 1");
  if (trace.rows.empty()) throw ValidationError("empty trace");
  std::vector<SlotStat> out;
  std::vector<double> tc_count, nbr_count;
  for (const TraceRow& r : trace.rows) {
    const int slot = static_cast<int>(r.tau / slot_width);
    if (out.empty() || out.back().slot != slot) {
      SlotStat s;
      s.slot = slot;
      s.mean_tc_s = 0.0;
      out.push_back(s);
      tc_count.push_back(0.0);
      nbr_count.push_back(0.0);
    }
    SlotStat& s = out.back();
    s.mean_tc_s += r.tc_s;
    tc_count.back() += 1.0;
    if (r.nbr_count >= 0) {
      if (s.mean_nbr < 0.0) s.mean_nbr = 0.0;
      s.mean_nbr += r.nbr_count;
      nbr_count.back() += 1.0;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].mean_tc_s /= tc_count[i];
    if (out[i].mean_nbr >= 0.0) out[i].mean_nbr /= nbr_count[i];
  }
  return out;
}

namespace {

SampleStat sample_stat(int sample, const Trace& trace) {
  SampleStat st;
  st.sample = sample;
  double best = kInf, sum = 0.0;
  for (const TraceRow& r : trace.rows) {
    best = std::min(best, r.tc_s);
    sum += r.tc_s;
  }
  const double n = static_cast<double>(trace.rows.size());
  const double mean = sum / n;
  double var = 0.0;
  for (const TraceRow& r : trace.rows) var += (r.tc_s - mean) * (r.tc_s - mean);
  st.best_tc_s = best;
  st.mean_tc_s = mean;
  st.std_tc_s = std::sqrt(var / n);
  return st;
}

RunConfig make_run_config(const ExperimentConfig& cfg, const RouteProfile* target) {
  RunConfig rc;
  rc.dynamics = cfg.dynamics;
  rc.schedule = cfg.schedule;
  rc.max_iters = cfg.iters;
  if (cfg.init_at_target && target != nullptr) {
    rc.init = InitialProfilePolicy::Explicit;
    rc.explicit_initial = *target;
  } else {
    rc.init = cfg.init;
  }
  rc.nbr_every = cfg.nbr_per_slot ? cfg.slot_width : 0;
  return rc;
}

RunResult run_one(const Game& game, RunConfig rc, std::uint64_t sample_seed) {
  rc.seed = sample_seed;
  if (rc.dynamics.kind == DynamicsKind::Logit) {
    if (!rc.schedule) throw ValidationError("logit dynamics needs a schedule");
    return run_stochastic(game, rc);
  }
  return run_deterministic(game, rc);
}

// Parallel map over sample ids; each worker builds its own Game so caches
// are never shared.
template <typename MakeGame, typename Body>
void for_each_sample(int samples, int threads, MakeGame make_game, Body body) {
  const int n_threads = std::max(1, std::min(threads, samples));
  if (n_threads == 1) {
    auto game = make_game();
    for (int s = 0; s < samples; ++s) body(game, s);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&]() {
      auto game = make_game();
      while (true) {
        const int s = next.fetch_add(1);
        if (s >= samples) break;
        body(game, s);
      }
    });
  }
  for (auto& th : pool) th.join();
}

void write_csv_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

std::string samples_csv(const std::vector<SampleStat>& rows) {
  std::string s = "sample_id,best_tc_s,mean_tc_s,std_tc_s\n";
  char buf[160];
  for (const SampleStat& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g\n", r.sample, r.best_tc_s, r.mean_tc_s,
                  r.std_tc_s);
    s += buf;
  }
  return s;
}

std::string slots_csv(const std::vector<SlotStat>& rows) {
  std::string s = "sample_id,slot,mean_tc_s,mean_nbr\n";
  char buf[160];
  for (const SlotStat& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g\n", r.sample, r.slot, r.mean_tc_s,
                  r.mean_nbr);
    s += buf;
  }
  return s;
}

void append_summary(std::string& s, const std::string& scheme,
                    const std::vector<SampleStat>& rows) {
  auto add = [&](const char* metric, double value) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%s,%.12g\n", scheme.c_str(), metric, value);
    s += buf;
  };
  double best_sum = 0.0, mean_sum = 0.0, best_min = kInf, best_max = -kInf;
  for (const SampleStat& r : rows) {
    best_sum += r.best_tc_s;
    mean_sum += r.mean_tc_s;
    best_min = std::min(best_min, r.best_tc_s);
    best_max = std::max(best_max, r.best_tc_s);
  }
  const double n = static_cast<double>(rows.size());
  add("n_samples", n);
  add("mean_best_tc_s", best_sum / n);
  add("min_best_tc_s", best_min);
  add("max_best_tc_s", best_max);
  add("mean_mean_tc_s", mean_sum / n);
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario_path;
  j["scale"] = cfg.scale;
  j["mode"] = cfg.mode == ExperimentMode::Dso ? "dso"
              : cfg.mode == ExperimentMode::Fcp ? "fcp"
                                                : "compare";
  j["dynamics"] = cfg.dynamics.kind == DynamicsKind::Better ? "better"
                  : cfg.dynamics.kind == DynamicsKind::Best ? "best"
                                                            : "logit";
  if (cfg.schedule) j["schedule"] = cfg.schedule->describe();
  j["iters"] = cfg.iters;
  j["samples"] = cfg.samples;
  j["seed"] = cfg.seed;
  j["slot_width"] = cfg.slot_width;
  j["init"] = cfg.init == InitialProfilePolicy::Random ? "random"
              : cfg.init == InitialProfilePolicy::ShortestDistance ? "shortest"
                                                                   : "explicit";
  j["init_at_target"] = cfg.init_at_target;
  j["target_source"] = cfg.target_source;
  j["target_iters"] = cfg.target_iters;
  j["toll_margin_s"] = cfg.toll_margin_s;
  j["threads"] = cfg.threads;
  j["version"] = "0.1.0";
  return j;
}

RouteProfile resolve_target(const ExperimentConfig& cfg, std::shared_ptr<const Scenario> scn) {
  if (cfg.target_source != "run-dso-first") {
    std::ifstream in(cfg.target_source);
    if (!in) throw ValidationError("cannot open target profile: " + cfg.target_source);
    return read_profile_csv(in, *scn);
  }
  // Stage one: stochastic (or configured) search for a low-cost state.
  Game game(scn, GameMode::Dso);
  RunConfig rc;
  rc.dynamics = cfg.dynamics;
  rc.schedule = cfg.schedule;
  if (rc.dynamics.kind != DynamicsKind::Logit) {
    rc.dynamics.kind = DynamicsKind::Logit;
    if (!rc.schedule) rc.schedule = BetaSchedule{BetaScheduleKind::Fixed, cfg.dynamics.beta};
  } else if (!rc.schedule) {
    rc.schedule = BetaSchedule{BetaScheduleKind::Fixed, cfg.dynamics.beta};
  }
  rc.init = cfg.init == InitialProfilePolicy::Explicit ? InitialProfilePolicy::Random : cfg.init;
  rc.max_iters = cfg.target_iters > 0 ? cfg.target_iters : cfg.iters;
  rc.seed = Rng(cfg.seed).fork(0x7A52u).seed();
  const RunResult search = run_stochastic(game, rc);

  // Stage two: better-response polish from the incumbent down to a Nash
  // state, so the fixed tolls stabilize an actual equilibrium.
  RunConfig polish;
  polish.dynamics.kind = DynamicsKind::Better;
  polish.init = InitialProfilePolicy::Explicit;
  polish.explicit_initial = search.best_profile;
  polish.max_iters = std::max<std::int64_t>(10000, 200LL * game.num_users());
  polish.seed = Rng(cfg.seed).fork(0x7A53u).seed();
  const RunResult polished = run_deterministic(game, polish);
  if (!polished.converged)
    throw ConvergenceError("target search did not reach an equilibrium; raise --target-iters");
  return polished.final_profile;
}

}  // namespace

void write_profile_csv(const RouteProfile& profile, std::ostream& out) {
  out << "user,route_index\n";
  for (std::size_t u = 0; u < profile.size(); ++u)
    out << u << "," << profile[u] << "\n";
}

RouteProfile read_profile_csv(std::istream& in, const Scenario& scn) {
  RouteProfile p(static_cast<std::size_t>(scn.num_users()), kNullRoute);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty profile csv");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw ValidationError("bad profile row: " + line);
    const int u = std::stoi(a);
    const int r = std::stoi(b);
    if (u < 0 || u >= scn.num_users())
      throw ValidationError("profile row user out of range: " + line);
    if (r != kNullRoute &&
        (r < 0 || static_cast<std::size_t>(r) >= scn.route_sets[static_cast<std::size_t>(u)].size()))
      throw ValidationError("profile row route out of range: " + line);
    p[static_cast<std::size_t>(u)] = r;
  }
  return p;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode == ExperimentMode::Compare) return compare_schemes(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.samples < 1) throw ValidationError("sample count must be >= 1");
  if (cfg.slot_width < 1) throw ValidationError("slot width must be >= 1");

  ScenarioOptions sopts;
  sopts.demand_scale = cfg.scale;
  auto scn = std::make_shared<const Scenario>(load_scenario_file(cfg.scenario_path, sopts));

  ExperimentReport rep;
  std::shared_ptr<const TollSchedule> tolls;
  if (cfg.mode == ExperimentMode::Fcp) {
    rep.target = resolve_target(cfg, scn);
    Game dso_game(scn, GameMode::Dso);
    tolls = std::make_shared<const TollSchedule>(dso_game.derive_tolls(rep.target, cfg.toll_margin_s));
    rep.target_tc_s = dso_game.total_cost(rep.target);
  }

  SchemeReport scheme;
  scheme.scheme = cfg.mode == ExperimentMode::Fcp ? "fixed" : "evolutionary";
  scheme.samples.resize(static_cast<std::size_t>(cfg.samples));
  std::vector<std::vector<SlotStat>> slot_rows(static_cast<std::size_t>(cfg.samples));
  std::vector<Trace> traces(cfg.write_traces ? static_cast<std::size_t>(cfg.samples) : 0);

  const GameMode gm = cfg.mode == ExperimentMode::Fcp ? GameMode::DueFcp : GameMode::Dso;
  const Rng master(cfg.seed);
  for_each_sample(
      cfg.samples, cfg.threads, [&]() { return Game(scn, gm, tolls); },
      [&](Game& game, int s) {
        const RunConfig rc = make_run_config(cfg, cfg.mode == ExperimentMode::Fcp ? &rep.target
                                                                                  : nullptr);
        const RunResult rr = run_one(game, rc, master.fork(static_cast<std::uint64_t>(s)).seed());
        scheme.samples[static_cast<std::size_t>(s)] = sample_stat(s, rr.trace);
        auto slots = trace_stats(rr.trace, cfg.slot_width);
        for (SlotStat& row : slots) row.sample = s;
        slot_rows[static_cast<std::size_t>(s)] = std::move(slots);
        if (cfg.write_traces) traces[static_cast<std::size_t>(s)] = rr.trace;
        game.clear_cache();
      });

  for (auto& rows : slot_rows)
    scheme.slots.insert(scheme.slots.end(), rows.begin(), rows.end());
  rep.schemes.push_back(std::move(scheme));
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_csv_file(dir / "samples.csv", samples_csv(rep.schemes[0].samples));
    write_csv_file(dir / "slots.csv", slots_csv(rep.schemes[0].slots));
    std::string summary = "scheme,metric,value\n";
    append_summary(summary, rep.schemes[0].scheme, rep.schemes[0].samples);
    write_csv_file(dir / "summary.csv", summary);
    json meta = config_json(cfg);
    meta["wall_seconds"] = rep.wall_seconds;
    if (cfg.mode == ExperimentMode::Fcp) meta["target_tc_s"] = rep.target_tc_s;
    std::ofstream mj(dir / "meta.json");
    mj << meta.dump(2) << "\n";
    if (cfg.mode == ExperimentMode::Fcp) {
      std::ofstream tp(dir / "target_profile.csv");
      write_profile_csv(rep.target, tp);
      std::ofstream tc(dir / "tolls.csv");
      write_toll_csv(*tolls, tc);
    }
    if (cfg.write_traces)
      for (int s = 0; s < cfg.samples; ++s) {
        std::ofstream tf(dir / ("trace_" + std::to_string(s) + ".csv"));
        write_trace_csv(traces[static_cast<std::size_t>(s)], tf);
      }
  }
  return rep;
}

ExperimentReport compare_schemes(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.samples < 1) throw ValidationError("sample count must be >= 1");

  ScenarioOptions sopts;
  sopts.demand_scale = cfg.scale;
  auto scn = std::make_shared<const Scenario>(load_scenario_file(cfg.scenario_path, sopts));

  ExperimentReport rep;
  rep.target = resolve_target(cfg, scn);
  auto tolls = std::make_shared<const TollSchedule>(
      Game(scn, GameMode::Dso).derive_tolls(rep.target, cfg.toll_margin_s));
  rep.target_tc_s = Game(scn, GameMode::Dso).total_cost(rep.target);

  SchemeReport evo, fixed;
  evo.scheme = "evolutionary";
  fixed.scheme = "fixed";
  evo.samples.resize(static_cast<std::size_t>(cfg.samples));
  fixed.samples.resize(static_cast<std::size_t>(cfg.samples));
  std::vector<std::vector<SlotStat>> evo_slots(static_cast<std::size_t>(cfg.samples));
  std::vector<std::vector<SlotStat>> fixed_slots(static_cast<std::size_t>(cfg.samples));

  struct GamePair {
    Game dso;
    Game fcp;
  };
  const Rng master(cfg.seed);
  for_each_sample(
      cfg.samples, cfg.threads,
      [&]() { return GamePair{Game(scn, GameMode::Dso), Game(scn, GameMode::DueFcp, tolls)}; },
      [&](GamePair& games, int s) {
        // Identical seeds: both schemes see the same user and route draws,
        // isolating the pricing effect.
        const std::uint64_t seed = master.fork(static_cast<std::uint64_t>(s)).seed();
        const RunConfig rc = make_run_config(cfg, &rep.target);
        const RunResult a = run_one(games.dso, rc, seed);
        const RunResult b = run_one(games.fcp, rc, seed);
        evo.samples[static_cast<std::size_t>(s)] = sample_stat(s, a.trace);
        fixed.samples[static_cast<std::size_t>(s)] = sample_stat(s, b.trace);
        auto sa = trace_stats(a.trace, cfg.slot_width);
        auto sb = trace_stats(b.trace, cfg.slot_width);
        for (SlotStat& row : sa) row.sample = s;
        for (SlotStat& row : sb) row.sample = s;
        evo_slots[static_cast<std::size_t>(s)] = std::move(sa);
        fixed_slots[static_cast<std::size_t>(s)] = std::move(sb);
        games.dso.clear_cache();
        games.fcp.clear_cache();
      });

  for (auto& rows : evo_slots) evo.slots.insert(evo.slots.end(), rows.begin(), rows.end());
  for (auto& rows : fixed_slots) fixed.slots.insert(fixed.slots.end(), rows.begin(), rows.end());
  rep.schemes.push_back(std::move(evo));
  rep.schemes.push_back(std::move(fixed));
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    for (const SchemeReport& sr : rep.schemes) {
      write_csv_file(dir / ("samples_" + sr.scheme + ".csv"), samples_csv(sr.samples));
      write_csv_file(dir / ("slots_" + sr.scheme + ".csv"), slots_csv(sr.slots));
    }
    std::string scatter = "sample_id,scheme,mean_tc_s,std_tc_s\n";
    char buf[160];
    for (const SchemeReport& sr : rep.schemes)
      for (const SampleStat& r : sr.samples) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.12g,%.12g\n", r.sample, sr.scheme.c_str(),
                      r.mean_tc_s, r.std_tc_s);
        scatter += buf;
      }
    write_csv_file(dir / "scatter.csv", scatter);
    std::string summary = "scheme,metric,value\n";
    for (const SchemeReport& sr : rep.schemes) append_summary(summary, sr.scheme, sr.samples);
    write_csv_file(dir / "summary.csv", summary);
    json meta = config_json(cfg);
    meta["wall_seconds"] = rep.wall_seconds;
    meta["target_tc_s"] = rep.target_tc_s;
    std::ofstream mj(dir / "meta.json");
    mj << meta.dump(2) << "\n";
    std::ofstream tp(dir / "target_profile.csv");
    write_profile_csv(rep.target, tp);
    std::ofstream tc(dir / "tolls.csv");
    write_toll_csv(*tolls, tc);
  }
  return rep;
}

ExperimentConfig preset_config(const std::string& name, const std::string& scenario_dir) {
  ExperimentConfig cfg;
  const fs::path dir(scenario_dir);
  if (name == "paper-simple") {
    cfg.scenario_path = (dir / "simple_two_route.json").string();
    cfg.dynamics.kind = DynamicsKind::Logit;
    cfg.schedule = BetaSchedule{BetaScheduleKind::Linear, 5000.0};
    cfg.iters = 20000;
    cfg.samples = 1000;
    cfg.slot_width = 200;
    cfg.init = InitialProfilePolicy::Random;
  } else if (name == "paper-nd") {
    cfg.scenario_path = (dir / "nguyen_dupuis.json").string();
    cfg.dynamics.kind = DynamicsKind::Logit;
    cfg.schedule = BetaSchedule{BetaScheduleKind::Linear, 100000.0};
    cfg.iters = 200000;
    cfg.samples = 50;
    cfg.slot_width = 500;
    cfg.init = InitialProfilePolicy::Random;
  } else {
    throw ValidationError("unknown preset '" + name + "' (paper-simple | paper-nd)");
  }
  return cfg;
}

}  // namespace dso
