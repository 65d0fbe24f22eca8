#include "nasim/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace nasim {

using nlohmann::json;

namespace {

const ScenarioSpec& spec_of(const EngineState& state) { return *state.instance->spec; }

const ExploitDef* find_exploit(const ScenarioSpec& spec, const std::string& id) {
  for (const auto& e : spec.exploits)
    if (e.id == id) return &e;
  return nullptr;
}

const PrivescDef* find_privesc(const ScenarioSpec& spec, const std::string& id) {
  for (const auto& p : spec.privescs)
    if (p.id == id) return &p;
  return nullptr;
}

bool contains(const std::vector<std::string>& items, const std::string& item) {
  return std::find(items.begin(), items.end(), item) != items.end();
}

int checked_index(const EngineState& state, HostAddress target) {
  const int idx = state.instance->host_index(target);
  if (idx < 0) throw std::out_of_range("action targets invalid host address " + to_string(target));
  return idx;
}

void discover(EngineState& state, int idx) {
  auto& h = state.hosts[static_cast<std::size_t>(idx)];
  if (h.discovered) return;
  h.discovered = true;
  h.discovery_order = static_cast<int>(state.discovery_sequence.size());
  state.discovery_sequence.push_back(idx);
}

/// Raises access on host `idx`; loots sensitive hosts on first root. Returns value gained.
double grant_access(EngineState& state, int idx, AccessLevel level) {
  auto& h = state.hosts[static_cast<std::size_t>(idx)];
  const auto& cfg = state.instance->hosts[static_cast<std::size_t>(idx)];
  if (h.access == AccessLevel::none && level >= AccessLevel::user)
    ++state.compromised_hosts_per_subnet[static_cast<std::size_t>(cfg.address.subnet)];
  h.access = std::max(h.access, level);
  h.sensitivity_known = true;
  if (h.access == AccessLevel::root && cfg.sensitive && !h.looted) {
    h.looted = true;
    return cfg.value;
  }
  return 0.0;
}

void refresh_reached(EngineState& state) {
  for (int idx : state.discovery_sequence) {
    auto& h = state.hosts[static_cast<std::size_t>(idx)];
    if (!h.reached && reachable(state, state.instance->hosts[static_cast<std::size_t>(idx)].address)) h.reached = true;
  }
}

StepResult finish(EngineState& state, const Action& action, bool success, double reward, int newly_discovered,
                  bool done) {
  state.total_reward += reward;
  state.done = done;
  state.last_action = LastAction{action, success, newly_discovered};
  StepResult r;
  r.observation = observe(state);
  r.reward = reward;
  r.done = done;
  r.info = {success, newly_discovered, action};
  return r;
}

void check_running(const EngineState& state) {
  if (!state.instance) throw std::logic_error("step called before reset");
  if (state.done) throw std::logic_error("step called on a finished episode");
}

}  // namespace

std::pair<EngineState, Observation> reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t /*seed*/) {
  if (!instance) throw std::invalid_argument("reset: null instance");
  EngineState state;
  state.instance = std::move(instance);
  state.hosts.assign(state.instance->hosts.size(), HostState{});
  state.compromised_hosts_per_subnet.assign(static_cast<std::size_t>(state.instance->subnet_count()), 0);
  for (std::size_t i = 0; i < state.instance->hosts.size(); ++i) {
    if (state.instance->is_entry(state.instance->hosts[i].address.subnet)) {
      discover(state, static_cast<int>(i));
      state.hosts[i].reached = true;
    }
  }
  Observation obs = observe(state);
  return {std::move(state), std::move(obs)};
}

bool reachable(const EngineState& state, HostAddress target) {
  const auto& inst = *state.instance;
  if (inst.host_index(target) < 0) throw std::out_of_range("reachable: invalid host address " + to_string(target));
  const int s = target.subnet;
  if (inst.is_entry(s)) return true;
  const auto& compromised = state.compromised_hosts_per_subnet;
  if (compromised[static_cast<std::size_t>(s)] > 0) return true;
  for (const auto& [a, b] : inst.links) {
    if (a == s && compromised[static_cast<std::size_t>(b)] > 0) return true;
    if (b == s && compromised[static_cast<std::size_t>(a)] > 0) return true;
  }
  return false;
}

bool would_succeed(const EngineState& state, const Action& action) {
  if (action.kind == ActionKind::terminal) return true;
  const int idx = checked_index(state, action.target);
  const auto& h = state.hosts[static_cast<std::size_t>(idx)];
  const auto& cfg = state.instance->hosts[static_cast<std::size_t>(idx)];
  if (!h.discovered) return false;
  switch (action.kind) {
    case ActionKind::service_scan:
    case ActionKind::os_scan: return reachable(state, action.target);
    case ActionKind::process_scan:
    case ActionKind::subnet_scan: return h.access >= AccessLevel::user;
    case ActionKind::exploit: {
      const ExploitDef* e = find_exploit(spec_of(state), action.id);
      return e && reachable(state, action.target) && contains(cfg.services, e->service);
    }
    case ActionKind::privesc: {
      const PrivescDef* p = find_privesc(spec_of(state), action.id);
      return p && h.access >= AccessLevel::user && cfg.os == p->os &&
             (!p->process || contains(cfg.processes, *p->process));
    }
    case ActionKind::terminal: return true;
  }
  return false;
}

StepResult step_failed(EngineState& state, const Action& action) {
  check_running(state);
  if (action.kind == ActionKind::terminal) return finish(state, action, true, 0.0, 0, true);
  checked_index(state, action.target);
  ++state.steps;
  return finish(state, action, false, -spec_of(state).rewards.step_cost, 0, false);
}

StepResult step(EngineState& state, const Action& action) {
  check_running(state);
  if (action.kind == ActionKind::terminal) return finish(state, action, true, 0.0, 0, true);
  if (!would_succeed(state, action)) return step_failed(state, action);

  ++state.steps;
  const int idx = checked_index(state, action.target);
  auto& h = state.hosts[static_cast<std::size_t>(idx)];
  const auto& cfg = state.instance->hosts[static_cast<std::size_t>(idx)];
  double reward = -spec_of(state).rewards.step_cost;
  int newly = 0;

  switch (action.kind) {
    case ActionKind::service_scan: h.services_scanned = true; break;
    case ActionKind::os_scan: h.os_scanned = true; break;
    case ActionKind::process_scan: h.processes_scanned = true; break;
    case ActionKind::subnet_scan: {
      const auto& inst = *state.instance;
      const int s = cfg.address.subnet;
      std::vector<int> targets{s};
      for (int n : inst.neighbours(s)) {
        targets.push_back(n);
        const std::pair<int, int> link{std::min(s, n), std::max(s, n)};
        if (std::find(state.known_links.begin(), state.known_links.end(), link) == state.known_links.end())
          state.known_links.push_back(link);
      }
      std::sort(state.known_links.begin(), state.known_links.end());
      std::sort(targets.begin(), targets.end());
      for (int t : targets) {
        for (int k = 0; k < inst.subnet_sizes[static_cast<std::size_t>(t)]; ++k) {
          const int j = inst.host_index({t, k});
          if (!state.hosts[static_cast<std::size_t>(j)].discovered) {
            discover(state, j);
            ++newly;
          }
        }
      }
      if (!std::binary_search(state.scanned_subnets.begin(), state.scanned_subnets.end(), s)) {
        state.scanned_subnets.push_back(s);
        std::sort(state.scanned_subnets.begin(), state.scanned_subnets.end());
      }
      break;
    }
    case ActionKind::exploit: {
      const ExploitDef* e = find_exploit(spec_of(state), action.id);
      if (!contains(h.learned_services, e->service)) {
        h.learned_services.push_back(e->service);
        std::sort(h.learned_services.begin(), h.learned_services.end());
      }
      reward += grant_access(state, idx, e->access);
      break;
    }
    case ActionKind::privesc: reward += grant_access(state, idx, AccessLevel::root); break;
    case ActionKind::terminal: break;
  }
  refresh_reached(state);
  return finish(state, action, true, reward, newly, false);
}

Observation observe(const EngineState& state) {
  Observation obs;
  const auto& inst = *state.instance;
  obs.subnet_count = inst.subnet_count();
  obs.sensitive_value = inst.spec->rewards.sensitive_value;
  obs.known_links = state.known_links;
  obs.scanned_subnets = state.scanned_subnets;
  obs.last_action = state.last_action;
  obs.hosts.reserve(state.discovery_sequence.size());
  for (int idx : state.discovery_sequence) {
    const auto& h = state.hosts[static_cast<std::size_t>(idx)];
    const auto& cfg = inst.hosts[static_cast<std::size_t>(idx)];
    HostView v;
    v.address = cfg.address;
    v.discovery_order = *h.discovery_order;
    v.reached = h.reached;
    v.access = h.access;
    v.services_scanned = h.services_scanned;
    v.services = h.services_scanned ? cfg.services : h.learned_services;
    v.os_scanned = h.os_scanned;
    if (h.os_scanned) v.os = cfg.os;
    v.processes_scanned = h.processes_scanned;
    if (h.processes_scanned) v.processes = cfg.processes;
    v.sensitivity_known = h.sensitivity_known;
    v.sensitive = h.sensitivity_known && cfg.sensitive;
    v.value = h.sensitivity_known ? cfg.value : 0.0;
    obs.hosts.push_back(std::move(v));
  }
  return obs;
}

std::vector<HostAddress> looted_hosts(const EngineState& state) {
  std::vector<HostAddress> out;
  for (std::size_t i = 0; i < state.hosts.size(); ++i)
    if (state.hosts[i].looted) out.push_back(state.instance->hosts[i].address);
  return out;
}

json trace_record(int t, const StepResult& result) {
  json rec;
  rec["t"] = t;
  rec["action"] = action_to_json(result.info.action);
  rec["success"] = result.info.success;
  rec["reward"] = result.reward;
  rec["newly_discovered"] = result.info.newly_discovered;
  rec["done"] = result.done;
  return rec;
}

// ---------------------------------------------------------------------------

Observation SimBackend::reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t seed) {
  auto [state, obs] = nasim::reset(std::move(instance), seed);
  state_ = std::move(state);
  return obs;
}

StepResult SimBackend::step(const Action& action) { return nasim::step(state_, action); }

bool SimBackend::would_succeed(const Action& action) const { return nasim::would_succeed(state_, action); }

StepResult SimBackend::step_failed(const Action& action) { return nasim::step_failed(state_, action); }

FlakyBackend::FlakyBackend(std::unique_ptr<Backend> inner, double p_fail, std::uint64_t seed)
    : inner_(std::move(inner)), p_fail_(p_fail), seed_(seed), rng_(Rng::derive(seed, Stream::flaky)) {
  if (!inner_) throw std::invalid_argument("FlakyBackend: null inner backend");
  if (!(p_fail >= 0.0 && p_fail < 1.0)) throw std::invalid_argument("FlakyBackend: p_fail must lie in [0, 1)");
}

Observation FlakyBackend::reset(std::shared_ptr<const ScenarioInstance> instance, std::uint64_t seed) {
  rng_ = Rng::derive(seed_, Stream::flaky, {seed});
  return inner_->reset(std::move(instance), seed);
}

StepResult FlakyBackend::step(const Action& action) {
  if (action.kind != ActionKind::terminal && inner_->would_succeed(action)) {
    ++attempted_;
    if (rng_.bernoulli(p_fail_)) {
      ++injected_;
      return inner_->step_failed(action);
    }
  }
  return inner_->step(action);
}

std::unique_ptr<Backend> make_backend(double p_fail, std::uint64_t seed) {
  if (p_fail == 0.0) return std::make_unique<SimBackend>();
  return std::make_unique<FlakyBackend>(std::make_unique<SimBackend>(), p_fail, seed);
}

}  // namespace nasim
