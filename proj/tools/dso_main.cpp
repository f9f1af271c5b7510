// Command-line front end: batch experiments, one-off loadings, toll
// derivation and the exact chain oracle. See README for examples.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dso/experiments.hpp"

namespace {

int run_cmd(const dso::ExperimentConfig& cfg_in, const std::string& preset,
            const std::string& scenario_dir, bool have_schedule) {
  dso::ExperimentConfig cfg = cfg_in;
  if (!preset.empty()) {
    dso::ExperimentConfig p = dso::preset_config(preset, scenario_dir);
    if (cfg.scenario_path.empty()) cfg.scenario_path = p.scenario_path;
    if (cfg.iters == 0) cfg.iters = static_cast<std::int64_t>(p.iters * cfg.scale);
    if (cfg.samples == 0) cfg.samples = p.samples;
    if (cfg.slot_width == 0) cfg.slot_width = p.slot_width;
    if (!have_schedule) cfg.schedule = p.schedule;
    if (cfg.dynamics.kind == dso::DynamicsKind::Logit && !cfg.schedule) cfg.schedule = p.schedule;
  }
  if (cfg.iters == 0) cfg.iters = 1000;
  if (cfg.samples == 0) cfg.samples = 1;
  if (cfg.slot_width == 0) cfg.slot_width = 500;
  if (cfg.scenario_path.empty()) {
    std::cerr << "error: no scenario (use --scenario or --preset)\n";
    return 2;
  }

  const dso::ExperimentReport rep = cfg.mode == dso::ExperimentMode::Compare
                                        ? dso::compare_schemes(cfg)
                                        : dso::run_experiment(cfg);
  for (const dso::SchemeReport& s : rep.schemes) {
    double best = dso::kInf, mean = 0.0;
    for (const dso::SampleStat& r : s.samples) {
      best = std::min(best, r.best_tc_s);
      mean += r.best_tc_s;
    }
    std::cout << s.scheme << ": samples=" << s.samples.size()
              << " best_tc=" << best << " mean_best_tc=" << mean / s.samples.size() << "\n";
  }
  if (!rep.target.empty()) std::cout << "target_tc=" << rep.target_tc_s << "\n";
  std::cout << "wall_seconds=" << rep.wall_seconds << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic network loading and route-choice dynamics toolkit"};
  app.require_subcommand(1);

  // ---- run ----------------------------------------------------------
  dso::ExperimentConfig cfg;
  cfg.iters = 0;
  cfg.samples = 0;
  cfg.slot_width = 0;
  std::string preset, mode = "dso", dynamics = "better", schedule, init = "random";
  std::string scenario_dir = "scenarios";
  auto* run = app.add_subcommand("run", "batch sample paths of the route-choice dynamics");
  run->add_option("--scenario", cfg.scenario_path, "scenario JSON file");
  run->add_option("--preset", preset, "paper-simple | paper-nd");
  run->add_option("--scenario-dir", scenario_dir, "directory for preset scenarios");
  run->add_option("--mode", mode, "dso | fcp | compare");
  run->add_option("--dynamics", dynamics, "better | best | logit");
  run->add_option("--schedule", schedule, "theolog | log:C | linear:C | fixed:B");
  run->add_option("--beta", cfg.dynamics.beta, "fixed noise parameter (shorthand for fixed:B)");
  run->add_option("--iters", cfg.iters, "iterations per sample path");
  run->add_option("--samples", cfg.samples, "number of sample paths");
  run->add_option("--seed", cfg.seed, "master seed");
  run->add_option("--slot", cfg.slot_width, "iterations per averaging slot");
  run->add_option("--init", init, "random | shortest | target");
  run->add_option("--target", cfg.target_source, "run-dso-first | profile CSV path");
  run->add_option("--target-iters", cfg.target_iters, "preliminary search length");
  run->add_option("--toll-margin", cfg.toll_margin_s, "strictness margin for derived tolls");
  run->add_option("--scale", cfg.scale, "demand scale factor (also scales preset iterations)");
  run->add_option("--threads", cfg.threads, "worker threads across samples");
  run->add_option("--out", cfg.out_dir, "output directory for CSV/JSON");
  run->add_flag("--dump-traces", cfg.write_traces, "write per-sample trace CSVs");

  // ---- load ---------------------------------------------------------
  std::string l_scenario, l_profile, l_out;
  double l_scale = 1.0;
  std::uint64_t l_seed = 1;
  std::string l_init = "shortest";
  auto* loadc = app.add_subcommand("load", "load one profile and dump vehicle times");
  loadc->add_option("--scenario", l_scenario, "scenario JSON file")->required();
  loadc->add_option("--profile", l_profile, "profile CSV (user,route_index); default by --init");
  loadc->add_option("--init", l_init, "random | shortest");
  loadc->add_option("--seed", l_seed, "seed for --init random");
  loadc->add_option("--scale", l_scale, "demand scale factor");
  loadc->add_option("--out", l_out, "trajectory CSV path (default stdout)");

  // ---- tolls --------------------------------------------------------
  std::string t_scenario, t_profile, t_out;
  double t_margin = 1e-6, t_scale = 1.0;
  auto* tollc = app.add_subcommand("tolls", "derive externality tolls for a target profile");
  tollc->add_option("--scenario", t_scenario, "scenario JSON file")->required();
  tollc->add_option("--profile", t_profile, "target profile CSV")->required();
  tollc->add_option("--margin", t_margin, "strictness margin in seconds");
  tollc->add_option("--scale", t_scale, "demand scale factor");
  tollc->add_option("--out", t_out, "toll CSV path (default stdout)");

  // ---- chain --------------------------------------------------------
  std::string c_scenario, c_dynamics = "logit", c_out;
  double c_beta = 1.0, c_scale = 1.0;
  std::size_t c_cap = 20000;
  auto* chainc = app.add_subcommand("chain", "exact transition matrix and stationary distribution");
  chainc->add_option("--scenario", c_scenario, "scenario JSON file")->required();
  chainc->add_option("--dynamics", c_dynamics, "better | best | logit");
  chainc->add_option("--beta", c_beta, "logit noise parameter");
  chainc->add_option("--cap", c_cap, "profile-space cap");
  chainc->add_option("--scale", c_scale, "demand scale factor");
  chainc->add_option("--out", c_out, "prefix for chain.csv / pi.csv (default stdout, pi only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      cfg.mode = mode == "dso"   ? dso::ExperimentMode::Dso
                 : mode == "fcp" ? dso::ExperimentMode::Fcp
                 : mode == "compare"
                     ? dso::ExperimentMode::Compare
                     : throw dso::ValidationError("unknown mode '" + mode + "'");
      cfg.dynamics.kind = dynamics == "better" ? dso::DynamicsKind::Better
                          : dynamics == "best" ? dso::DynamicsKind::Best
                          : dynamics == "logit"
                              ? dso::DynamicsKind::Logit
                              : throw dso::ValidationError("unknown dynamics '" + dynamics + "'");
      if (!schedule.empty()) cfg.schedule = dso::BetaSchedule::parse(schedule);
      if (cfg.dynamics.kind == dso::DynamicsKind::Logit && !cfg.schedule)
        cfg.schedule = dso::BetaSchedule{dso::BetaScheduleKind::Fixed, cfg.dynamics.beta};
      if (init == "target")
        cfg.init_at_target = true;
      else
        cfg.init = init == "shortest" ? dso::InitialProfilePolicy::ShortestDistance
                   : init == "random"
                       ? dso::InitialProfilePolicy::Random
                       : throw dso::ValidationError("unknown init '" + init + "'");
      return run_cmd(cfg, preset, scenario_dir, !schedule.empty());
    }

    if (loadc->parsed()) {
      dso::ScenarioOptions sopts;
      sopts.demand_scale = l_scale;
      auto scn = std::make_shared<const dso::Scenario>(dso::load_scenario_file(l_scenario, sopts));
      dso::RouteProfile profile;
      if (!l_profile.empty()) {
        std::ifstream in(l_profile);
        if (!in) throw dso::ValidationError("cannot open " + l_profile);
        profile = dso::read_profile_csv(in, *scn);
      } else {
        dso::Game game(scn, dso::GameMode::Dso);
        dso::RunConfig rc;
        rc.init = l_init == "random" ? dso::InitialProfilePolicy::Random
                                     : dso::InitialProfilePolicy::ShortestDistance;
        dso::Rng rng(l_seed);
        profile = dso::initial_profile(game, rc, rng);
      }
      const dso::LoadingResult res = dso::load(*scn, profile);
      double tc = 0.0;
      for (double c : res.costs_s) tc += c;
      if (!l_out.empty()) {
        std::ofstream out(l_out, std::ios::binary);
        dso::write_trajectory_csv(res, out);
      } else {
        dso::write_trajectory_csv(res, std::cout);
      }
      std::cerr << "total_cost_s=" << tc << "\n";
      return 0;
    }

    if (tollc->parsed()) {
      dso::ScenarioOptions sopts;
      sopts.demand_scale = t_scale;
      auto scn = std::make_shared<const dso::Scenario>(dso::load_scenario_file(t_scenario, sopts));
      std::ifstream in(t_profile);
      if (!in) throw dso::ValidationError("cannot open " + t_profile);
      const dso::RouteProfile target = dso::read_profile_csv(in, *scn);
      dso::Game game(scn, dso::GameMode::Dso);
      const dso::TollSchedule tolls = game.derive_tolls(target, t_margin);
      if (!t_out.empty()) {
        std::ofstream out(t_out, std::ios::binary);
        dso::write_toll_csv(tolls, out);
      } else {
        dso::write_toll_csv(tolls, std::cout);
      }
      return 0;
    }

    if (chainc->parsed()) {
      dso::ScenarioOptions sopts;
      sopts.demand_scale = c_scale;
      auto scn = std::make_shared<const dso::Scenario>(dso::load_scenario_file(c_scenario, sopts));
      dso::Game game(scn, dso::GameMode::Dso);
      dso::DynamicsSpec spec;
      spec.kind = c_dynamics == "better" ? dso::DynamicsKind::Better
                  : c_dynamics == "best" ? dso::DynamicsKind::Best
                                         : dso::DynamicsKind::Logit;
      spec.beta = c_beta;
      const dso::ChainMatrix chain = dso::build_chain_matrix(game, spec, c_cap);
      const Eigen::VectorXd pi = dso::stationary_distribution(chain);
      if (!c_out.empty()) {
        std::ofstream pc(c_out + "chain.csv", std::ios::binary);
        dso::write_chain_csv(chain, pc);
        std::ofstream pp(c_out + "pi.csv", std::ios::binary);
        dso::write_distribution_csv(chain, pi, pp);
      } else {
        dso::write_distribution_csv(chain, pi, std::cout);
      }
      return 0;
    }
  } catch (const dso::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dso::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dso::GridlockError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
