#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nasim/engine.hpp"
#include "nasim/instancer.hpp"
#include "nasim/observation.hpp"
#include "nasim/scenario.hpp"

namespace nasim {

struct VecEnvConfig {
  std::vector<ScenarioSpec> specs;
  int n_envs = 1;
  std::uint64_t seed = 0;
  /// Harness-level episode limit on cost-bearing steps; unset = unlimited.
  std::optional<int> step_cap;
  /// FlakyBackend failure probability; 0 uses the plain simulator.
  double p_fail = 0.0;
  /// Optional per-spec selection weights (uniform when empty).
  std::vector<double> weights;
  /// Shared schema; computed from `specs` when unset. Must cover every spec.
  std::optional<FeatureSchema> schema;
};

struct VecStepInfo {
  bool success = false;
  int newly_discovered = 0;
  Action action;
  /// Episode ended because the step cap expired rather than by Terminal.
  bool truncated = false;
  /// Set when the env was auto-reset: the first observation of the new episode.
  std::optional<Observation> reset_observation;
  int episode_length = 0;      // cost-bearing steps of the episode that just ended
  double episode_reward = 0.0;  // total reward of the episode that just ended
};

struct VecStepResult {
  Observation observation;  // the terminal observation when done
  double reward = 0.0;
  bool done = false;
  VecStepInfo info;
};

/// A batch of independent episodes over a set of scenarios. Each episode picks
/// a scenario, samples an instance, and permutes its IDs from streams derived
/// from (seed, env index, episode counter). Envs are stepped sequentially in
/// index order.
class VecEnv {
 public:
  explicit VecEnv(VecEnvConfig config);

  /// Starts a fresh episode in every env and returns the observations.
  std::vector<Observation> reset();
  std::vector<VecStepResult> step(std::span<const Action> actions);
  /// Steps with flat per-env indices (see decode_action).
  std::vector<VecStepResult> step_flat(std::span<const int> flat_actions);

  int n_envs() const { return static_cast<int>(slots_.size()); }
  const FeatureSchema& schema() const { return schema_; }
  const std::vector<std::shared_ptr<const ScenarioSpec>>& specs() const { return specs_; }
  const Observation& observation(int env) const { return slot(env).obs; }
  int spec_index(int env) const { return slot(env).spec_index; }
  const ScenarioInstance& instance(int env) const { return *slot(env).backend->state().instance; }
  const IdPermutation& permutation(int env) const { return slot(env).perm; }
  std::uint64_t episode_counter(int env) const { return slot(env).episode; }
  const Backend& backend(int env) const { return *slot(env).backend; }
  /// Total env steps taken since construction (one per env per step call).
  std::uint64_t total_steps() const { return total_steps_; }

 private:
  struct Slot {
    std::unique_ptr<Backend> backend;
    int spec_index = 0;
    std::uint64_t episode = 0;
    IdPermutation perm;
    Observation obs;
  };

  const Slot& slot(int env) const { return slots_.at(static_cast<std::size_t>(env)); }
  void start_episode(int env);

  VecEnvConfig config_;
  FeatureSchema schema_;
  std::vector<std::shared_ptr<const ScenarioSpec>> specs_;
  std::vector<Slot> slots_;
  std::uint64_t total_steps_ = 0;
};

}  // namespace nasim
