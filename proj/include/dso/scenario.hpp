#pragma once

#include <string>
#include <vector>

#include "dso/network.hpp"

namespace dso {

struct ScenarioOptions {
  double demand_scale = 1.0;  // multiplies generated demand counts
};

// A parsed and validated problem instance: network, user population and the
// per-user strategy sets (explicit from the file or auto-enumerated).
struct Scenario {
  std::string name;
  Network network;
  std::vector<UserSpec> users;
  std::vector<RouteSet> route_sets;  // one per user, aligned with users
  double uncap_vps = 1e6;
  std::size_t route_cap = 10000;

  int num_users() const { return static_cast<int>(users.size()); }
};

// Parses the JSON scenario document. See README for the format. Throws
// ValidationError on malformed input.
Scenario parse_scenario(const std::string& json_text, const ScenarioOptions& opts = {});

Scenario load_scenario_file(const std::string& path, const ScenarioOptions& opts = {});

}  // namespace dso
