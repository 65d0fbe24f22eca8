#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nasim/action.hpp"
#include "nasim/observation.hpp"
#include "nasim/rng.hpp"
#include "nasim/scenario.hpp"

namespace nasim {

/// Deterministic marker-driven heuristic. Rules, first match wins, ties by
/// lowest discovery order:
///   1. escalate a user-access host known to be sensitive (OSScan first if its OS is unknown)
///   2. exploit a host showing the marker service
///   3. ServiceScan an unscanned reachable host
///   4. SubnetScan from a compromised host whose subnet has not been scanned from
///   5. exploit an unexploited host through one of its known services
///   6. Terminal
/// Only the catalogs of `spec` are consulted, never the network itself.
Action greedy_marker_step(const Observation& obs, const ScenarioSpec& spec);

/// Uniform choice over (discovered host x primitive) under `schema`.
Action random_step(const Observation& obs, const FeatureSchema& schema, Rng& rng);

/// Replays a recorded action list.
class ReplayAgent {
 public:
  explicit ReplayAgent(std::vector<Action> actions) : actions_(std::move(actions)) {}

  /// Next action; Terminal once the list is exhausted. Throws std::invalid_argument
  /// when the recorded action targets a host absent from `obs`.
  Action next(const Observation& obs);

 private:
  std::vector<Action> actions_;
  std::size_t cursor_ = 0;
};

}  // namespace nasim
