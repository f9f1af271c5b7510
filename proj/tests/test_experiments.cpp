#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dso/experiments.hpp"
#include "support.hpp"

using namespace dso;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_simple_config() {
  ExperimentConfig cfg;
  cfg.scenario_path = test::scenario_dir() + "/simple_two_route.json";
  cfg.scale = 0.05;  // 20 users
  cfg.dynamics.kind = DynamicsKind::Logit;
  cfg.schedule = BetaSchedule{BetaScheduleKind::Linear, 500.0};
  cfg.iters = 400;
  cfg.samples = 4;
  cfg.seed = 101;
  cfg.slot_width = 100;
  return cfg;
}

}  // namespace

TEST_CASE("trace statistics per slot") {
  Trace tr;
  tr.initial = {0};
  for (int tau = 0; tau <= 9; ++tau) {
    TraceRow row;
    row.tau = tau;
    row.tc_s = 10.0 + tau;
    row.nbr_count = tau % 5 == 0 ? tau / 5 : -1;
    tr.rows.push_back(row);
  }
  const auto slots = trace_stats(tr, 5);
  REQUIRE(slots.size() == 2);
  CHECK(slots[0].mean_tc_s == doctest::Approx((10 + 11 + 12 + 13 + 14) / 5.0));
  CHECK(slots[1].mean_tc_s == doctest::Approx((15 + 16 + 17 + 18 + 19) / 5.0));
  CHECK(slots[0].mean_nbr == doctest::Approx(0.0));
  CHECK(slots[1].mean_nbr == doctest::Approx(1.0));

  SUBCASE("constant traces give constant slot means") {
    for (auto& row : tr.rows) row.tc_s = 42.0;
    for (const auto& s : trace_stats(tr, 3)) CHECK(s.mean_tc_s == doctest::Approx(42.0));
  }
  SUBCASE("empty traces and bad widths are rejected") {
    CHECK_THROWS_AS(trace_stats(Trace{}, 5), ValidationError);
    CHECK_THROWS_AS(trace_stats(tr, 0), ValidationError);
  }
}

TEST_CASE("run_experiment writes consistent, reproducible outputs") {
  ExperimentConfig cfg = small_simple_config();
  const fs::path dir = fs::temp_directory_path() / "dso_exp_a";
  fs::remove_all(dir);
  cfg.out_dir = dir.string();
  const ExperimentReport rep = run_experiment(cfg);
  REQUIRE(rep.schemes.size() == 1);
  REQUIRE(rep.schemes[0].samples.size() == 4);

  // summary recomputes from samples.csv
  const std::string samples = slurp(dir / "samples.csv");
  const std::string summary = slurp(dir / "summary.csv");
  double mean_best = 0.0;
  {
    std::istringstream is(samples);
    std::string line;
    std::getline(is, line);
    int n = 0;
    while (std::getline(is, line)) {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      mean_best += std::stod(line.substr(c1 + 1, c2 - c1 - 1));
      ++n;
    }
    REQUIRE(n == 4);
    mean_best /= n;
  }
  std::ostringstream expect;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", mean_best);
  CHECK(summary.find(std::string("evolutionary,mean_best_tc_s,") + buf) != std::string::npos);

  SUBCASE("identical config and seeds give byte-identical outputs") {
    ExperimentConfig cfg2 = cfg;
    const fs::path dir2 = fs::temp_directory_path() / "dso_exp_b";
    fs::remove_all(dir2);
    cfg2.out_dir = dir2.string();
    run_experiment(cfg2);
    CHECK(slurp(dir / "samples.csv") == slurp(dir2 / "samples.csv"));
    CHECK(slurp(dir / "slots.csv") == slurp(dir2 / "slots.csv"));
    CHECK(slurp(dir / "summary.csv") == slurp(dir2 / "summary.csv"));
  }
  SUBCASE("threading does not change results") {
    ExperimentConfig cfg3 = cfg;
    const fs::path dir3 = fs::temp_directory_path() / "dso_exp_c";
    fs::remove_all(dir3);
    cfg3.out_dir = dir3.string();
    cfg3.threads = 3;
    run_experiment(cfg3);
    CHECK(slurp(dir / "samples.csv") == slurp(dir3 / "samples.csv"));
  }
}

TEST_CASE("non-best-response counts are zero along an absorbed better-response trace") {
  ScenarioOptions sopts;
  sopts.demand_scale = 0.05;
  auto scn = std::make_shared<const Scenario>(
      load_scenario_file(test::scenario_dir() + "/simple_two_route.json", sopts));
  Game game(scn, GameMode::Dso);

  RunConfig rc;
  rc.dynamics.kind = DynamicsKind::Better;
  rc.init = InitialProfilePolicy::Random;
  rc.seed = 17;
  rc.max_iters = 5000;
  const RunResult converged = run_deterministic(game, rc);
  REQUIRE(converged.converged);

  // From the absorbed state, further better-response revision never moves
  // and the non-best-response count stays at zero in every slot.
  Rng rng(18);
  RouteProfile p = converged.final_profile;
  Trace tr;
  tr.initial = p;
  tr.rows.push_back(TraceRow{0, game.total_cost(p), -1, kNullRoute, false, 0});
  for (int tau = 1; tau <= 120; ++tau) {
    const StepOutcome out = better_response_step(game, p, rng);
    CHECK(!out.changed);
    TraceRow row{tau, game.total_cost(p), out.user, out.new_route, out.changed, -1};
    if (tau % 30 == 0) {
      const NashReport rep = game.is_nash(p);
      int nbr = 0;
      for (double g : rep.gaps)
        if (g > kUtilityEps) ++nbr;
      row.nbr_count = nbr;
    }
    tr.rows.push_back(row);
  }
  for (const auto& slot : trace_stats(tr, 30))
    if (slot.mean_nbr >= 0.0) CHECK(slot.mean_nbr == 0.0);
}

TEST_CASE("profile csv round trip") {
  auto scn = test::single_link_scenario(3);
  RouteProfile p{0, kNullRoute, 0};
  std::ostringstream os;
  write_profile_csv(p, os);
  std::istringstream is(os.str());
  CHECK(read_profile_csv(is, *scn) == p);
}

TEST_CASE("scheme comparison shares draws and stays at an unperturbed target") {
  ExperimentConfig cfg = small_simple_config();
  cfg.mode = ExperimentMode::Compare;
  cfg.samples = 2;
  cfg.iters = 300;
  cfg.init_at_target = true;
  cfg.target_iters = 800;
  // Best-response dynamics: no perturbation, so both schemes must hold the
  // equilibrium target and produce identical flat series.
  cfg.dynamics.kind = DynamicsKind::Best;
  cfg.schedule.reset();

  const fs::path dir = fs::temp_directory_path() / "dso_cmp";
  fs::remove_all(dir);
  cfg.out_dir = dir.string();
  const ExperimentReport rep = compare_schemes(cfg);
  REQUIRE(rep.schemes.size() == 2);
  REQUIRE(!rep.target.empty());

  for (const SchemeReport& sr : rep.schemes)
    for (const SampleStat& st : sr.samples) {
      CHECK(st.std_tc_s <= 1e-9);
      CHECK(st.mean_tc_s == doctest::Approx(rep.target_tc_s));
    }
  CHECK(fs::exists(dir / "scatter.csv"));
  CHECK(fs::exists(dir / "samples_evolutionary.csv"));
  CHECK(fs::exists(dir / "samples_fixed.csv"));
  CHECK(fs::exists(dir / "tolls.csv"));
}

TEST_CASE("presets resolve scenarios and schedules") {
  const ExperimentConfig simple = preset_config("paper-simple", test::scenario_dir());
  CHECK(simple.iters == 20000);
  CHECK(simple.samples == 1000);
  REQUIRE(simple.schedule.has_value());
  CHECK(simple.schedule->kind == BetaScheduleKind::Linear);

  const ExperimentConfig nd = preset_config("paper-nd", test::scenario_dir());
  CHECK(nd.iters == 200000);
  CHECK(nd.samples == 50);
  CHECK(nd.schedule->param == doctest::Approx(100000.0));
  CHECK_THROWS_AS(preset_config("nope", test::scenario_dir()), ValidationError);
}
