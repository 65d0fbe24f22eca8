#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "nasim/action.hpp"
#include "nasim/instancer.hpp"

namespace nasim {

inline constexpr int kOracleMaxHosts = 8;
inline constexpr int kOracleMaxSteps = 12;

class OracleLimitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SolvabilityReport {
  bool solvable = true;
  std::vector<HostAddress> unreachable;  // sensitive hosts that can never be rooted
};

struct PlanResult {
  double optimal_reward = 0.0;
  /// One optimal action sequence, always ending with Terminal.
  std::vector<Action> plan;
  std::size_t states_explored = 0;
  bool solvable = true;
  std::vector<HostAddress> unreachable;

  /// Non-terminal steps in `plan`.
  int steps() const { return static_cast<int>(plan.size()) - 1; }
};

/// Exhaustive search for the best total reward achievable within `step_cap`
/// cost-bearing steps. Rejects instances with more than kOracleMaxHosts hosts
/// or caps above kOracleMaxSteps.
PlanResult optimal_plan(const ScenarioInstance& instance, int step_cap);

/// Whether every sensitive host can be rooted given unlimited steps.
SolvabilityReport solvable(const ScenarioInstance& instance);

nlohmann::json plan_to_json(const PlanResult& result);

}  // namespace nasim
