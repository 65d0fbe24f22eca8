#include "nasim/vecenv.hpp"

#include <numeric>
#include <stdexcept>

#include "nasim/rng.hpp"

namespace nasim {

VecEnv::VecEnv(VecEnvConfig config) : config_(std::move(config)) {
  if (config_.specs.empty()) throw std::invalid_argument("VecEnv: scenario set is empty");
  if (config_.n_envs < 1) throw std::invalid_argument("VecEnv: n_envs must be >= 1");
  if (config_.step_cap && *config_.step_cap < 1) throw std::invalid_argument("VecEnv: step cap must be >= 1");
  if (!config_.weights.empty()) {
    if (config_.weights.size() != config_.specs.size())
      throw std::invalid_argument("VecEnv: one weight per scenario required");
    for (double w : config_.weights)
      if (!(w >= 0.0)) throw std::invalid_argument("VecEnv: weights must be non-negative");
    if (std::accumulate(config_.weights.begin(), config_.weights.end(), 0.0) <= 0.0)
      throw std::invalid_argument("VecEnv: weights must not all be zero");
  }

  schema_ = config_.schema ? *config_.schema : unify_feature_schema(config_.specs);
  for (const auto& spec : config_.specs) {
    if (!schema_.covers(spec))
      throw std::invalid_argument("VecEnv: feature schema does not cover scenario '" + spec.name + "'");
    specs_.push_back(std::make_shared<const ScenarioSpec>(spec));
  }
  slots_.resize(static_cast<std::size_t>(config_.n_envs));
  for (std::size_t i = 0; i < slots_.size(); ++i)
    slots_[i].backend = make_backend(config_.p_fail, mix64(config_.seed ^ mix64(i + 1)));
}

void VecEnv::start_episode(int env) {
  Slot& s = slots_[static_cast<std::size_t>(env)];
  const std::initializer_list<std::uint64_t> keys{static_cast<std::uint64_t>(env), s.episode};

  Rng choice = Rng::derive(config_.seed, Stream::scenario_choice, keys);
  if (config_.weights.empty()) {
    s.spec_index = static_cast<int>(choice.below(specs_.size()));
  } else {
    const double total = std::accumulate(config_.weights.begin(), config_.weights.end(), 0.0);
    double u = choice.uniform() * total;
    s.spec_index = static_cast<int>(config_.weights.size()) - 1;
    for (std::size_t k = 0; k < config_.weights.size(); ++k) {
      if (u < config_.weights[k]) {
        s.spec_index = static_cast<int>(k);
        break;
      }
      u -= config_.weights[k];
    }
  }

  Rng seeds = Rng::derive(config_.seed, Stream::instance, keys);
  const std::uint64_t instance_seed = seeds.next();
  const std::uint64_t permutation_seed = seeds.next();
  const std::uint64_t episode_seed = seeds.next();

  const auto base = instantiate(specs_[static_cast<std::size_t>(s.spec_index)], instance_seed);
  auto [relabeled, perm] = permute_ids(base, permutation_seed);
  s.perm = std::move(perm);
  s.obs = s.backend->reset(std::make_shared<const ScenarioInstance>(std::move(relabeled)), episode_seed);
  ++s.episode;
}

std::vector<Observation> VecEnv::reset() {
  std::vector<Observation> out;
  out.reserve(slots_.size());
  for (int i = 0; i < n_envs(); ++i) {
    start_episode(i);
    out.push_back(slots_[static_cast<std::size_t>(i)].obs);
  }
  return out;
}

std::vector<VecStepResult> VecEnv::step(std::span<const Action> actions) {
  if (actions.size() != slots_.size())
    throw std::invalid_argument("VecEnv::step: expected " + std::to_string(slots_.size()) + " actions, got " +
                                std::to_string(actions.size()));
  std::vector<VecStepResult> out(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    Slot& s = slots_[i];
    if (!s.backend->state().instance) start_episode(static_cast<int>(i));
    StepResult r = s.backend->step(actions[i]);
    ++total_steps_;
    VecStepResult& v = out[i];
    v.reward = r.reward;
    v.done = r.done;
    v.info.success = r.info.success;
    v.info.newly_discovered = r.info.newly_discovered;
    v.info.action = std::move(r.info.action);
    const auto& st = s.backend->state();
    if (!v.done && config_.step_cap && st.steps >= *config_.step_cap) {
      v.done = true;
      v.info.truncated = true;
    }
    v.observation = std::move(r.observation);
    if (v.done) {
      v.info.episode_length = st.steps;
      v.info.episode_reward = st.total_reward;
      start_episode(static_cast<int>(i));
      v.info.reset_observation = s.obs;
    } else {
      s.obs = v.observation;
    }
  }
  return out;
}

std::vector<VecStepResult> VecEnv::step_flat(std::span<const int> flat_actions) {
  if (flat_actions.size() != slots_.size())
    throw std::invalid_argument("VecEnv::step_flat: expected " + std::to_string(slots_.size()) + " actions, got " +
                                std::to_string(flat_actions.size()));
  std::vector<Action> actions;
  actions.reserve(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i)
    actions.push_back(decode_action(slots_[i].obs, schema_, flat_actions[i]));
  return step(actions);
}

}  // namespace nasim
