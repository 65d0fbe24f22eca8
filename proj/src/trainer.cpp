#include "nasim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "nasim/engine.hpp"
#include "nasim/instancer.hpp"

namespace nasim {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(n_envs >= 1, "n_envs must be >= 1");
  require(rollout_len >= 1, "rollout_len must be >= 1");
  require(updates_per_epoch >= 0, "updates_per_epoch must be >= 0");
  require(epochs >= 0, "epochs must be >= 0");
  for (double c : {gamma, gae_lambda, value_coef, entropy_coef, learning_rate, max_grad_norm, reward_scale, p_fail})
    require(std::isfinite(c), "coefficients must be finite");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must be in [0, 1]");
  require(clip > 0.0 && clip < 1.0, "clip must be in (0, 1)");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(step_cap >= 1, "step_cap must be >= 1");
  require(p_fail >= 0.0 && p_fail < 1.0, "p_fail must be in [0, 1)");
  require(hidden >= 1, "hidden must be >= 1");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
  require(!train_set.empty(), "train set is empty");
}

// Rollouts ---------------------------------------------------------------------

namespace {

std::vector<EncodedObs> encode_all(const VecEnv& env) {
  std::vector<EncodedObs> out;
  out.reserve(static_cast<std::size_t>(env.n_envs()));
  for (int i = 0; i < env.n_envs(); ++i) out.push_back(encode_hosts(env.observation(i), env.schema()));
  return out;
}

void check_schema(const VecEnv& env, const Policy& policy) {
  const auto& s = env.schema();
  if (s.host_vector_dim() != policy.dims().host_dim || s.action_dim() != policy.dims().action_dim)
    throw std::invalid_argument("collect_rollout: env schema (d=" + std::to_string(s.host_vector_dim()) +
                                ", A=" + std::to_string(s.action_dim()) + ") does not match the policy (d=" +
                                std::to_string(policy.dims().host_dim) +
                                ", A=" + std::to_string(policy.dims().action_dim) + ")");
}

}  // namespace

Trajectory collect_rollout(VecEnv& env, const Policy& policy, int rollout_len, Rng& rng, bool greedy) {
  if (rollout_len < 1) throw std::invalid_argument("collect_rollout: rollout_len must be >= 1");
  check_schema(env, policy);
  const int n = env.n_envs();
  Trajectory traj;
  traj.n_envs = n;
  traj.rollout_len = rollout_len;
  const auto total = static_cast<std::size_t>(n) * static_cast<std::size_t>(rollout_len);
  traj.obs.reserve(total);
  traj.actions.reserve(total);

  std::vector<int> flat(static_cast<std::size_t>(n));
  for (int t = 0; t < rollout_len; ++t) {
    auto obs = encode_all(env);
    const auto out = policy.forward_batch(obs);
    for (int i = 0; i < n; ++i) {
      const auto& o = out[static_cast<std::size_t>(i)];
      const int a = sample_action(o, rng, greedy);
      flat[static_cast<std::size_t>(i)] = a;
      traj.actions.push_back(a);
      traj.log_probs.push_back(o.log_probs[a]);
      traj.values.push_back(o.value);
    }
    for (auto& e : obs) traj.obs.push_back(std::move(e));
    const auto results = env.step_flat(flat);
    for (const auto& r : results) {
      traj.rewards.push_back(r.reward);
      traj.dones.push_back(r.done ? 1 : 0);
    }
  }
  const auto last = policy.forward_batch(encode_all(env));
  for (const auto& o : last) traj.bootstrap_values.push_back(o.value);
  return traj;
}

Advantages compute_gae(const Trajectory& traj, double gamma, double lambda, double reward_scale) {
  const int n = traj.n_envs;
  const int len = traj.rollout_len;
  Advantages out;
  out.advantages.assign(traj.size(), 0.0);
  out.returns.assign(traj.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double next_value = traj.bootstrap_values[static_cast<std::size_t>(i)];
    double next_adv = 0.0;
    for (int t = len - 1; t >= 0; --t) {
      const auto k = static_cast<std::size_t>(t) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
      const double live = traj.dones[k] ? 0.0 : 1.0;
      const double delta = traj.rewards[k] * reward_scale + gamma * next_value * live - traj.values[k];
      next_adv = delta + gamma * lambda * live * next_adv;
      out.advantages[k] = next_adv;
      out.returns[k] = next_adv + traj.values[k];
      next_value = traj.values[k];
    }
  }
  return out;
}

void normalize(std::vector<double>& values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  for (double& v : values) v = sd > 1e-12 ? (v - mean) / sd : 0.0;
}

// Loss ----------------------------------------------------------------------------

std::pair<LossStats, Eigen::VectorXd> ppo_loss_and_gradient(const Policy& policy, const Trajectory& traj,
                                                           const Advantages& adv, const TrainConfig& config) {
  const std::size_t b = traj.size();
  if (b == 0) throw std::invalid_argument("ppo: empty batch");
  ForwardCache cache;
  const auto out = policy.forward_batch(traj.obs, &cache);

  std::vector<Eigen::VectorXd> dlogits(b);
  std::vector<double> dvalue(b);
  LossStats s;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t k = 0; k < b; ++k) {
    const auto& o = out[k];
    const int a = traj.actions[k];
    const double A = adv.advantages[k];
    const double logp = o.log_probs[a];
    const double ratio = std::exp(logp - traj.log_probs[k]);
    const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
    const double unclipped_obj = ratio * A;
    const double clipped_obj = clipped * A;
    const bool use_clipped = clipped_obj < unclipped_obj;
    s.policy -= std::min(unclipped_obj, clipped_obj) * inv_b;
    s.policy_unclipped -= unclipped_obj * inv_b;
    s.approx_kl += (traj.log_probs[k] - logp) * inv_b;
    if (std::abs(ratio - 1.0) > config.clip) s.clip_fraction += inv_b;
    s.max_ratio_deviation = std::max(s.max_ratio_deviation, std::abs(ratio - 1.0));

    double entropy = 0.0;
    for (Eigen::Index j = 0; j < o.probs.size(); ++j)
      if (o.probs[j] > 0.0) entropy -= o.probs[j] * o.log_probs[j];
    s.entropy += entropy * inv_b;

    Eigen::VectorXd g = Eigen::VectorXd::Zero(o.logits.size());
    // d(-surrogate)/dlogits through log pi(a) = logit_a - logsumexp.
    if (!use_clipped) {
      const double coeff = -A * ratio * inv_b;
      g -= coeff * o.probs;
      g[a] += coeff;
    }
    // d(-c_e * H)/dlogits = c_e * p * (log p + H)
    for (Eigen::Index j = 0; j < o.probs.size(); ++j)
      if (o.probs[j] > 0.0) g[j] += config.entropy_coef * inv_b * o.probs[j] * (o.log_probs[j] + entropy);
    dlogits[k] = std::move(g);

    const double err = o.value - adv.returns[k];
    s.value += err * err * inv_b;
    dvalue[k] = 2.0 * config.value_coef * err * inv_b;
  }
  s.total = s.policy + config.value_coef * s.value - config.entropy_coef * s.entropy;
  Eigen::VectorXd grad = policy.backward(cache, dlogits, dvalue);
  s.grad_norm = grad.norm();
  return {s, std::move(grad)};
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

LossStats ppo_update(Policy& policy, Adam& adam, const Trajectory& traj, const TrainConfig& config) {
  Advantages adv = compute_gae(traj, config.gamma, config.gae_lambda, config.reward_scale);
  if (config.normalize_advantages) normalize(adv.advantages);
  auto [stats, grad] = ppo_loss_and_gradient(policy, traj, adv, config);
  if (!std::isfinite(stats.total) || !grad.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite PPO loss: total=" << stats.total << " policy=" << stats.policy << " value=" << stats.value
        << " entropy=" << stats.entropy << " grad_norm=" << stats.grad_norm;
    throw TrainingError(msg.str());
  }
  if (config.max_grad_norm > 0.0 && stats.grad_norm > config.max_grad_norm)
    grad *= config.max_grad_norm / stats.grad_norm;
  adam.step(policy.params(), grad, config.learning_rate);
  return stats;
}

// Evaluation ---------------------------------------------------------------------

double bootstrap_half_width(const std::vector<double>& rewards, const std::vector<int>& lengths, std::uint64_t seed,
                            int resamples) {
  const std::size_t n = rewards.size();
  if (n < 2) return 0.0;
  Rng rng = Rng::derive(seed, Stream::bootstrap);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double sum = 0.0;
    long len = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rng.below(n));
      sum += rewards[j];
      len += lengths[j];
    }
    stats.push_back(len > 0 ? sum / static_cast<double>(len) : 0.0);
  }
  std::sort(stats.begin(), stats.end());
  auto at = [&](double q) { return stats[static_cast<std::size_t>(q * static_cast<double>(stats.size() - 1))]; };
  return 0.5 * (at(0.975) - at(0.025));
}

EvalReport evaluate_agent(const AgentFn& agent, const std::vector<ScenarioSpec>& specs, int episodes,
                          std::uint64_t seed, int step_cap) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (specs.empty()) throw std::invalid_argument("evaluate: scenario set is empty");
  if (step_cap < 1) throw std::invalid_argument("evaluate: step cap must be >= 1");
  std::vector<std::shared_ptr<const ScenarioSpec>> shared;
  for (const auto& s : specs) shared.push_back(std::make_shared<const ScenarioSpec>(s));

  EvalReport report;
  report.episodes = episodes;
  for (int e = 0; e < episodes; ++e) {
    const auto& spec = shared[static_cast<std::size_t>(e) % shared.size()];
    Rng seeds = Rng::derive(seed, Stream::evaluation, {static_cast<std::uint64_t>(e)});
    const std::uint64_t instance_seed = seeds.next();
    const std::uint64_t permutation_seed = seeds.next();
    const std::uint64_t episode_seed = seeds.next();
    auto [inst, perm] = permute_ids(instantiate(spec, instance_seed), permutation_seed);

    SimBackend backend;
    Observation obs = backend.reset(std::make_shared<const ScenarioInstance>(std::move(inst)), episode_seed);
    while (!backend.state().done && backend.state().steps < step_cap) obs = backend.step(agent(obs, *spec)).observation;

    const auto& st = backend.state();
    report.episode_rewards.push_back(st.total_reward);
    report.episode_lengths.push_back(st.steps);
    report.seeds.push_back(instance_seed);
    report.total_reward += st.total_reward;
    report.total_steps += st.steps;
    if (st.steps == 0) ++report.zero_length_episodes;
  }
  report.avg_reward_per_step =
      report.total_steps > 0 ? report.total_reward / static_cast<double>(report.total_steps) : 0.0;
  report.ci_half_width = bootstrap_half_width(report.episode_rewards, report.episode_lengths, seed);
  return report;
}

EvalReport evaluate(const Policy& policy, const FeatureSchema& schema, const std::vector<ScenarioSpec>& specs,
                    int episodes, std::uint64_t seed, int step_cap, bool greedy) {
  for (const auto& s : specs)
    if (!schema.covers(s)) throw std::invalid_argument("evaluate: schema does not cover scenario '" + s.name + "'");
  Rng rng = Rng::derive(seed, Stream::policy_sampling);
  AgentFn agent = [&](const Observation& obs, const ScenarioSpec&) {
    const PolicyOutput out = policy.forward(encode_hosts(obs, schema));
    return decode_action(obs, schema, sample_action(out, rng, greedy));
  };
  return evaluate_agent(agent, specs, episodes, seed, step_cap);
}

// Training loop -------------------------------------------------------------------

namespace {

VecEnvConfig env_config(const TrainConfig& c, const std::optional<FeatureSchema>& schema) {
  c.validate();
  VecEnvConfig e;
  e.specs = c.train_set;
  e.n_envs = c.n_envs;
  e.seed = c.seed;
  e.step_cap = c.step_cap;
  e.p_fail = c.p_fail;
  e.schema = schema;
  return e;
}

PolicyDims dims_for(const TrainConfig& c, const FeatureSchema& schema) {
  PolicyDims d = PolicyDims::for_schema(schema, c.hidden, c.pe_dim);
  d.mask_terminal = c.mask_terminal;
  return d;
}

}  // namespace

Trainer::Trainer(TrainConfig config, ModelKind kind, std::optional<FeatureSchema> schema)
    : config_(std::move(config)),
      env_(env_config(config_, schema)),
      policy_(make_policy(kind, dims_for(config_, env_.schema()))),
      adam_(static_cast<Eigen::Index>(policy_->parameter_count())),
      rng_(Rng::derive(config_.seed, Stream::policy_sampling)) {
  policy_->init(config_.seed);
  env_.reset();
}

EpochStats Trainer::train_epoch() {
  EpochStats stats;
  stats.epoch = ++epoch_;
  double reward_sum = 0.0;
  for (int u = 0; u < config_.updates_per_epoch; ++u) {
    const Trajectory traj = collect_rollout(env_, *policy_, config_.rollout_len, rng_);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      if (!traj.dones[k]) continue;
      ++stats.episodes_finished;
    }
    stats.last_loss = ppo_update(*policy_, adam_, traj, config_);
    reward_sum += std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
  }
  stats.mean_episode_reward = stats.episodes_finished > 0 ? reward_sum / stats.episodes_finished : 0.0;
  return stats;
}

// Experiments ---------------------------------------------------------------------

ExperimentSets experiment_sets(const std::string& name) {
  auto pick = [](const std::string& size, std::initializer_list<const char*> layouts) {
    std::vector<ScenarioSpec> out;
    for (const char* l : layouts) out.push_back(bundled_scenario(size + "_entry_" + l));
    return out;
  };
  const auto small_train = pick("sm", {"dmz_one_subnet", "dmz_two_subnets"});
  const auto small_novel = pick("sm", {"dmz_three_subnets", "user_three_subnets"});
  const auto medium_train = pick("md", {"dmz_one_subnet", "dmz_two_subnets"});
  const auto medium_novel = pick("md", {"dmz_three_subnets", "user_three_subnets"});
  if (name == "sm2md") return {small_train, medium_novel};
  if (name == "md2sm") return {medium_train, small_novel};
  throw std::invalid_argument("unknown experiment '" + name + "' (expected sm2md or md2sm)");
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "epoch,seed,model,eval_set,avg_reward_per_step,ci_half_width\n";
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.epoch << ',' << r.seed << ',' << r.model << ',' << r.eval_set << ',' << r.avg_reward_per_step << ','
        << r.ci_half_width << '\n';
  return out.str();
}

ExperimentResult run_experiment(const std::string& name, const TrainConfig& config, int seeds,
                                const std::string& out_dir, const std::function<void(const MetricRow&)>& progress) {
  if (seeds < 1) throw std::invalid_argument("run_experiment: seeds must be >= 1");
  const ExperimentSets sets = experiment_sets(name);
  std::vector<ScenarioSpec> all = sets.train;
  all.insert(all.end(), sets.novel.begin(), sets.novel.end());
  const FeatureSchema schema = unify_feature_schema(all);

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  ExperimentResult result;
  result.name = name;
  for (int s = 0; s < seeds; ++s) {
    TrainConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(s);
    c.train_set = sets.train;
    c.eval_set = sets.novel;
    for (ModelKind kind : {ModelKind::mlp, ModelKind::invariant}) {
      Trainer trainer(c, kind, schema);
      auto eval_both = [&](int epoch) {
        const std::pair<const char*, const std::vector<ScenarioSpec>*> evals[] = {{"train", &sets.train},
                                                                                  {"novel", &sets.novel}};
        for (std::uint64_t k = 0; k < 2; ++k) {
          // The same evaluation instances every epoch, shared by both models.
          const auto report = evaluate(trainer.policy(), schema, *evals[k].second, c.eval_episodes,
                                       mix64(c.seed ^ mix64(k + 101)), c.step_cap, c.greedy_eval);
          MetricRow row{epoch, c.seed, std::string(to_string(kind)), evals[k].first, report.avg_reward_per_step,
                        report.ci_half_width};
          if (progress) progress(row);
          result.rows.push_back(std::move(row));
        }
      };
      for (int e = 0; e < c.epochs; ++e) {
        trainer.train_epoch();
        eval_both(e + 1);
      }
      if (!out_dir.empty()) {
        const std::string path = out_dir + "/" + name + "_" + std::string(to_string(kind)) + "_seed" +
                                 std::to_string(c.seed) + ".json";
        save_checkpoint(trainer.policy(), schema, path);
        result.checkpoints.push_back(path);
      }
    }
  }
  if (!out_dir.empty()) {
    std::ofstream csv(out_dir + "/" + name + ".csv");
    csv << metrics_csv(result.rows);
    if (!csv) throw std::runtime_error("cannot write metrics to '" + out_dir + "'");
  }
  return result;
}

}  // namespace nasim
