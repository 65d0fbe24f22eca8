#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nasim/action.hpp"
#include "nasim/instancer.hpp"
#include "nasim/observation.hpp"
#include "nasim/rng.hpp"

namespace nasim {

struct HostState {
  bool discovered = false;
  bool reached = false;
  AccessLevel access = AccessLevel::none;
  bool services_scanned = false;
  bool os_scanned = false;
  bool processes_scanned = false;
  bool sensitivity_known = false;
  bool looted = false;
  std::optional<int> discovery_order;
  std::vector<std::string> learned_services;  // services confirmed by a successful exploit

  friend bool operator==(const HostState&, const HostState&) = default;
};

/// Mutable per-episode truth. Exclusively owned by one episode driver.
struct EngineState {
  std::shared_ptr<const ScenarioInstance> instance;
  std::vector<HostState> hosts;       // parallel to instance->hosts
  std::vector<int> discovery_sequence;  // host indices in discovery order
  std::vector<int> compromised_hosts_per_subnet;
  std::vector<std::pair<int, int>> known_links;
  std::vector<int> scanned_subnets;
  std::optional<LastAction> last_action;
  int steps = 0;  // cost-bearing (non-terminal) steps taken
  double total_reward = 0.0;
  bool done = false;
};

struct StepInfo {
  bool success = false;
  int newly_discovered = 0;
  Action action;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

std::pair<EngineState, Observation> reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t seed = 0);

/// True iff the target's subnet is an entry subnet, holds a compromised host,
/// or is linked to a subnet holding a compromised host.
bool reachable(const EngineState& state, HostAddress target);

/// Whether `action` would take effect in the current state (its preconditions hold).
bool would_succeed(const EngineState& state, const Action& action);

/// Applies `action`. Unsatisfied actions are failed no-ops that still cost a
/// step. Throws std::out_of_range for an address outside the instance and
/// std::logic_error when stepping a finished episode.
StepResult step(EngineState& state, const Action& action);

/// Accounts for `action` as a failed attempt without applying its effect.
StepResult step_failed(EngineState& state, const Action& action);

Observation observe(const EngineState& state);

/// Set of looted host addresses.
std::vector<HostAddress> looted_hosts(const EngineState& state);

/// One line of the episode trace.
nlohmann::json trace_record(int t, const StepResult& result);

/// The abstract environment interface; SimBackend is the reference
/// implementation, FlakyBackend injects failures on top of another backend.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual Observation reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  virtual const EngineState& state() const = 0;
  /// Whether `action` would take effect if stepped now.
  virtual bool would_succeed(const Action& action) const = 0;
  /// Steps `action` as a failure: step cost charged, no effect.
  virtual StepResult step_failed(const Action& action) = 0;
};

class SimBackend final : public Backend {
 public:
  Observation reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  const EngineState& state() const override { return state_; }
  bool would_succeed(const Action& action) const override;
  StepResult step_failed(const Action& action) override;

 private:
  EngineState state_;
};

/// Turns would-be successes into failures with probability `p_fail`, modeling
/// unreliable emulation. Failure draws come from a stream seeded per episode.
class FlakyBackend final : public Backend {
 public:
  FlakyBackend(std::unique_ptr<Backend> inner, double p_fail, std::uint64_t seed);

  Observation reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  const EngineState& state() const override { return inner_->state(); }
  bool would_succeed(const Action& action) const override { return inner_->would_succeed(action); }
  StepResult step_failed(const Action& action) override { return inner_->step_failed(action); }

  double p_fail() const { return p_fail_; }
  /// Would-be successful non-terminal actions seen so far.
  std::uint64_t attempted_successes() const { return attempted_; }
  std::uint64_t injected_failures() const { return injected_; }

 private:
  std::unique_ptr<Backend> inner_;
  double p_fail_;
  std::uint64_t seed_;
  Rng rng_;
  std::uint64_t attempted_ = 0;
  std::uint64_t injected_ = 0;
};

/// SimBackend when `p_fail` is zero, otherwise a FlakyBackend wrapping one.
std::unique_ptr<Backend> make_backend(double p_fail, std::uint64_t seed);

}  // namespace nasim
