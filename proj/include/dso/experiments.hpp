#pragma once

#include <optional>
#include <string>

#include "dso/algorithms.hpp"

namespace dso {

enum class ExperimentMode { Dso, Fcp, Compare };

struct ExperimentConfig {
  std::string scenario_path;
  double scale = 1.0;  // multiplies demand counts; callers shrink iterations to match
  ExperimentMode mode = ExperimentMode::Dso;
  DynamicsSpec dynamics;
  std::optional<BetaSchedule> schedule;  // required for logit dynamics
  std::int64_t iters = 1000;
  int samples = 1;
  std::uint64_t seed = 1;
  int slot_width = 500;
  InitialProfilePolicy init = InitialProfilePolicy::Random;
  bool init_at_target = false;  // fcp/compare: start paths at the target state
  // Target state for fixed-pricing runs: "run-dso-first" or a profile CSV
  // (user,route_index).
  std::string target_source = "run-dso-first";
  std::int64_t target_iters = 0;  // preliminary search length; 0 = same as iters
  double toll_margin_s = 1e-6;
  int threads = 1;
  bool nbr_per_slot = true;
  std::string out_dir;  // when set, CSV/JSON outputs are written here
  bool write_traces = false;
};

struct SampleStat {
  int sample = 0;
  double best_tc_s = 0.0;
  double mean_tc_s = 0.0;
  double std_tc_s = 0.0;
};

struct SlotStat {
  int sample = 0;
  int slot = 0;
  double mean_tc_s = 0.0;
  double mean_nbr = -1.0;  // -1 when the count was not sampled in the slot
};

struct SchemeReport {
  std::string scheme;
  std::vector<SampleStat> samples;
  std::vector<SlotStat> slots;
};

struct ExperimentReport {
  std::vector<SchemeReport> schemes;  // one for dso/fcp, two for compare
  RouteProfile target;                // resolved target (fcp/compare), else empty
  double target_tc_s = 0.0;
  double wall_seconds = 0.0;
};

// Slot aggregation of one trace: per-slot mean total cost and the mean of
// the sampled non-best-response counts.
std::vector<SlotStat> trace_stats(const Trace& trace, int slot_width);

// Batch sample paths for one scheme (dso or fcp) or the paired comparison.
// Writes samples.csv / slots.csv / summary.csv / meta.json under out_dir
// when configured; compare mode writes per-scheme files plus scatter.csv.
ExperimentReport run_experiment(const ExperimentConfig& config);

ExperimentReport compare_schemes(const ExperimentConfig& config);

// Profile CSV (user,route_index) helpers used for target states.
void write_profile_csv(const RouteProfile& profile, std::ostream& out);
RouteProfile read_profile_csv(std::istream& in, const Scenario& scn);

// Named presets mirroring the bundled studies; scale shrinks demand and
// iteration counts together for fast runs.
ExperimentConfig preset_config(const std::string& name, const std::string& scenario_dir);

}  // namespace dso
