#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nasim/observation.hpp"
#include "nasim/policy.hpp"
#include "nasim/rng.hpp"
#include "nasim/scenario.hpp"
#include "nasim/vecenv.hpp"

namespace nasim {

struct TrainConfig {
  int n_envs = 16;
  int rollout_len = 8;
  int updates_per_epoch = 100;
  int epochs = 30;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 1e-3;
  /// Global gradient-norm clip; <= 0 disables.
  double max_grad_norm = 0.5;
  /// Rewards are multiplied by this before entering returns (training only).
  double reward_scale = 0.01;
  bool normalize_advantages = true;
  std::uint64_t seed = 0;
  int step_cap = 20;
  double p_fail = 0.0;
  int hidden = 64;
  int pe_dim = 8;
  /// Policies never choose Terminal, so episodes last until the step cap.
  bool mask_terminal = true;
  std::vector<ScenarioSpec> train_set;
  std::vector<ScenarioSpec> eval_set;
  /// Evaluation episodes per scenario set and epoch.
  int eval_episodes = 32;
  /// Per-epoch evaluation takes argmax actions; by default it samples.
  bool greedy_eval = false;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transitions stored time-major: index = t * n_envs + env.
struct Trajectory {
  int n_envs = 0;
  int rollout_len = 0;
  std::vector<EncodedObs> obs;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> bootstrap_values;  // value of each env's state after the last step
  std::size_t size() const { return actions.size(); }
};

/// Runs `rollout_len` steps of every env in `env` under `policy`.
Trajectory collect_rollout(VecEnv& env, const Policy& policy, int rollout_len, Rng& rng, bool greedy = false);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// GAE(gamma, lambda); a done transition neither bootstraps nor propagates.
Advantages compute_gae(const Trajectory& traj, double gamma, double lambda, double reward_scale = 1.0);

/// Shifts and scales to mean 0, variance 1 (population); constant input maps to zeros.
void normalize(std::vector<double>& values);

struct LossStats {
  double total = 0.0;
  double policy = 0.0;          // -mean clipped surrogate
  double policy_unclipped = 0.0;  // -mean ratio * advantage
  double value = 0.0;           // mean squared error
  double entropy = 0.0;         // mean entropy
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_deviation = 0.0;  // max |ratio - 1|
  double grad_norm = 0.0;
};

/// Loss and its gradient w.r.t. the policy parameters for one batch.
std::pair<LossStats, Eigen::VectorXd> ppo_loss_and_gradient(const Policy& policy, const Trajectory& traj,
                                                           const Advantages& adv, const TrainConfig& config);

class Adam {
 public:
  explicit Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  long steps() const { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// One gradient step. Throws TrainingError when the loss or gradient is not finite.
LossStats ppo_update(Policy& policy, Adam& adam, const Trajectory& traj, const TrainConfig& config);

struct EvalReport {
  double avg_reward_per_step = 0.0;
  double ci_half_width = 0.0;  // 95% bootstrap over episodes
  int episodes = 0;
  int zero_length_episodes = 0;
  double total_reward = 0.0;
  long total_steps = 0;
  std::vector<double> episode_rewards;
  std::vector<int> episode_lengths;
  std::vector<std::uint64_t> seeds;  // per-episode instance seeds
};

/// Chooses an action for the current observation of an episode on `spec`.
using AgentFn = std::function<Action(const Observation& obs, const ScenarioSpec& spec)>;

/// Episodes cycle through `specs`; each runs on a freshly instantiated,
/// ID-permuted instance and ends on Terminal or after `step_cap` cost-bearing steps.
EvalReport evaluate_agent(const AgentFn& agent, const std::vector<ScenarioSpec>& specs, int episodes,
                          std::uint64_t seed, int step_cap);

/// Policy evaluation; greedy unless `greedy` is false.
EvalReport evaluate(const Policy& policy, const FeatureSchema& schema, const std::vector<ScenarioSpec>& specs,
                    int episodes, std::uint64_t seed, int step_cap, bool greedy = true);

/// sum / length with a percentile bootstrap over episodes.
double bootstrap_half_width(const std::vector<double>& rewards, const std::vector<int>& lengths, std::uint64_t seed,
                            int resamples = 1000);

struct EpochStats {
  int epoch = 0;
  LossStats last_loss;
  double mean_episode_reward = 0.0;
  int episodes_finished = 0;
};

/// Owns the env, policy and optimizer of one training run.
class Trainer {
 public:
  Trainer(TrainConfig config, ModelKind kind, std::optional<FeatureSchema> schema = std::nullopt);

  EpochStats train_epoch();
  Policy& policy() { return *policy_; }
  const Policy& policy() const { return *policy_; }
  VecEnv& env() { return env_; }
  const FeatureSchema& schema() const { return env_.schema(); }
  const TrainConfig& config() const { return config_; }
  int epochs_done() const { return epoch_; }

 private:
  TrainConfig config_;
  VecEnv env_;
  std::unique_ptr<Policy> policy_;
  Adam adam_;
  Rng rng_;
  int epoch_ = 0;
};

struct ExperimentSets {
  std::vector<ScenarioSpec> train;
  std::vector<ScenarioSpec> novel;
};

/// sm2md trains on the small one/two-subnet scenarios and tests on the medium
/// three-subnet ones; md2sm swaps sizes.
ExperimentSets experiment_sets(const std::string& name);

struct MetricRow {
  int epoch = 0;
  std::uint64_t seed = 0;
  std::string model;
  std::string eval_set;  // "train" or "novel"
  double avg_reward_per_step = 0.0;
  double ci_half_width = 0.0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

struct ExperimentResult {
  std::string name;
  std::vector<MetricRow> rows;
  std::vector<std::string> checkpoints;  // written paths
};

/// Trains MLP and invariant models for seeds config.seed + [0, seeds) and
/// evaluates both sets after every epoch. When `out_dir` is non-empty writes
/// <name>.csv and one checkpoint per (model, seed) there.
ExperimentResult run_experiment(const std::string& name, const TrainConfig& config, int seeds,
                                const std::string& out_dir = "",
                                const std::function<void(const MetricRow&)>& progress = {});

}  // namespace nasim
