#include "nasim/oracle.hpp"

#include <algorithm>
#include <memory>
#include <unordered_map>

#include "nasim/engine.hpp"

namespace nasim {

using nlohmann::json;

namespace {

// Dynamics depend only on which hosts are discovered and their access levels
// (scan knowledge never gates an effect, looting is implied by root access).
std::uint64_t state_key(const EngineState& s, int remaining) {
  std::uint64_t key = static_cast<std::uint64_t>(remaining);
  for (const auto& h : s.hosts) {
    key = (key << 1) | (h.discovered ? 1U : 0U);
    key = (key << 2) | static_cast<std::uint64_t>(h.access);
  }
  return key;
}

struct Entry {
  double value = 0.0;
  int best = -1;  // index into the candidate list, -1 for Terminal
};

class Search {
 public:
  explicit Search(std::shared_ptr<const ScenarioInstance> inst) : inst_(std::move(inst)) {}

  /// Actions that change the dynamic state when applied to `s`.
  std::vector<Action> candidates(const EngineState& s) const {
    std::vector<Action> out;
    const auto& spec = *inst_->spec;
    for (int idx : s.discovery_sequence) {
      const auto& h = s.hosts[static_cast<std::size_t>(idx)];
      const HostAddress addr = inst_->hosts[static_cast<std::size_t>(idx)].address;
      for (const auto& e : spec.exploits) {
        if (e.access <= h.access) continue;
        Action a = Action::exploit(addr, e.id);
        if (would_succeed(s, a)) out.push_back(std::move(a));
      }
      if (h.access == AccessLevel::user) {
        for (const auto& p : spec.privescs) {
          Action a = Action::privesc(addr, p.id);
          if (would_succeed(s, a)) out.push_back(std::move(a));
        }
      }
      if (h.access >= AccessLevel::user && reveals_hosts(s, addr.subnet)) out.push_back(Action::subnet_scan(addr));
    }
    return out;
  }

  double solve(const EngineState& s, int remaining) {
    const std::uint64_t key = state_key(s, remaining);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second.value;
    ++explored_;
    Entry entry;  // Terminal: nothing more gained
    if (remaining > 0) {
      const auto actions = candidates(s);
      for (std::size_t i = 0; i < actions.size(); ++i) {
        EngineState next = s;
        const double r = step(next, actions[i]).reward;
        const double v = r + solve(next, remaining - 1);
        if (v > entry.value) {
          entry.value = v;
          entry.best = static_cast<int>(i);
        }
      }
    }
    memo_[key] = entry;
    return entry.value;
  }

  std::vector<Action> extract(EngineState s, int remaining) {
    std::vector<Action> plan;
    while (true) {
      const Entry& e = memo_.at(state_key(s, remaining));
      if (e.best < 0) break;
      Action a = candidates(s)[static_cast<std::size_t>(e.best)];
      step(s, a);
      plan.push_back(std::move(a));
      --remaining;
    }
    plan.push_back(Action::terminal());
    return plan;
  }

  std::size_t explored() const { return explored_; }

 private:
  bool reveals_hosts(const EngineState& s, int subnet) const {
    auto undiscovered_in = [&](int t) {
      for (int k = 0; k < inst_->subnet_sizes[static_cast<std::size_t>(t)]; ++k)
        if (!s.hosts[static_cast<std::size_t>(inst_->host_index({t, k}))].discovered) return true;
      return false;
    };
    if (undiscovered_in(subnet)) return true;
    for (int n : inst_->neighbours(subnet))
      if (undiscovered_in(n)) return true;
    return false;
  }

  std::shared_ptr<const ScenarioInstance> inst_;
  std::unordered_map<std::uint64_t, Entry> memo_;
  std::size_t explored_ = 0;
};

}  // namespace

SolvabilityReport solvable(const ScenarioInstance& instance) {
  const auto& spec = *instance.spec;
  const auto n = instance.hosts.size();
  std::vector<AccessLevel> access(n, AccessLevel::none);
  std::vector<bool> compromised(static_cast<std::size_t>(instance.subnet_count()), false);

  auto subnet_reachable = [&](int s) {
    if (instance.is_entry(s) || compromised[static_cast<std::size_t>(s)]) return true;
    for (int nb : instance.neighbours(s))
      if (compromised[static_cast<std::size_t>(nb)]) return true;
    return false;
  };

  // Reachable subnets are also discoverable: entry hosts start discovered and a
  // SubnetScan from any compromised host reveals its own and all linked subnets.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& cfg = instance.hosts[i];
      if (!subnet_reachable(cfg.address.subnet)) continue;
      AccessLevel best = access[i];
      for (const auto& e : spec.exploits)
        if (std::find(cfg.services.begin(), cfg.services.end(), e.service) != cfg.services.end())
          best = std::max(best, e.access);
      if (best >= AccessLevel::user) {
        for (const auto& p : spec.privescs)
          if (p.os == cfg.os &&
              (!p.process || std::find(cfg.processes.begin(), cfg.processes.end(), *p.process) != cfg.processes.end()))
            best = AccessLevel::root;
      }
      if (best > access[i]) {
        access[i] = best;
        compromised[static_cast<std::size_t>(cfg.address.subnet)] = true;
        changed = true;
      }
    }
  }

  SolvabilityReport report;
  for (std::size_t i = 0; i < n; ++i) {
    if (instance.hosts[i].sensitive && access[i] != AccessLevel::root) {
      report.solvable = false;
      report.unreachable.push_back(instance.hosts[i].address);
    }
  }
  return report;
}

PlanResult optimal_plan(const ScenarioInstance& instance, int step_cap) {
  if (instance.host_count() > kOracleMaxHosts)
    throw OracleLimitError("oracle: instance has " + std::to_string(instance.host_count()) + " hosts (limit " +
                           std::to_string(kOracleMaxHosts) + ")");
  if (step_cap < 0 || step_cap > kOracleMaxSteps)
    throw OracleLimitError("oracle: step cap " + std::to_string(step_cap) + " outside [0, " +
                           std::to_string(kOracleMaxSteps) + "]");

  auto inst = std::make_shared<const ScenarioInstance>(instance);
  auto [start, obs] = reset(inst);
  Search search(inst);
  PlanResult result;
  result.optimal_reward = search.solve(start, step_cap);
  result.plan = search.extract(start, step_cap);
  result.states_explored = search.explored();
  const auto report = solvable(instance);
  result.solvable = report.solvable;
  result.unreachable = report.unreachable;
  return result;
}

json plan_to_json(const PlanResult& result) {
  json doc;
  doc["optimal_reward"] = result.optimal_reward;
  doc["plan"] = json::array();
  for (const auto& a : result.plan) doc["plan"].push_back(action_to_json(a));
  doc["solvable"] = result.solvable;
  doc["unreachable"] = json::array();
  for (const auto& a : result.unreachable) doc["unreachable"].push_back(json::array({a.subnet, a.host}));
  doc["states_explored"] = result.states_explored;
  return doc;
}

}  // namespace nasim
