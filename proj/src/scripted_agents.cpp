#include "nasim/scripted_agents.hpp"

#include <algorithm>
#include <stdexcept>

namespace nasim {

namespace {

bool knows(const std::vector<std::string>& items, const std::string& item) {
  return std::find(items.begin(), items.end(), item) != items.end();
}

/// Highest-access exploit through a known service that would raise access; ties by id.
const ExploitDef* best_exploit(const HostView& h, const ScenarioSpec& spec) {
  const ExploitDef* best = nullptr;
  for (const auto& e : spec.exploits) {
    if (!knows(h.services, e.service) || e.access <= h.access) continue;
    if (!best || e.access > best->access || (e.access == best->access && e.id < best->id)) best = &e;
  }
  return best;
}

std::optional<Action> escalate(const HostView& h, const ScenarioSpec& spec) {
  if (!h.os) return Action::os_scan(h.address);
  std::vector<const PrivescDef*> candidates;
  for (const auto& p : spec.privescs)
    if (p.os == *h.os) candidates.push_back(&p);
  std::sort(candidates.begin(), candidates.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const auto* p : candidates)
    if (!p->process) return Action::privesc(h.address, p->id);
  if (candidates.empty()) return std::nullopt;
  if (!h.processes_scanned) return Action::process_scan(h.address);
  for (const auto* p : candidates)
    if (knows(h.processes, *p->process)) return Action::privesc(h.address, p->id);
  return std::nullopt;
}

}  // namespace

Action greedy_marker_step(const Observation& obs, const ScenarioSpec& spec) {
  const auto& marker = spec.host_config.sensitive_marker_service;

  for (const auto& h : obs.hosts)
    if (h.access == AccessLevel::user && h.sensitivity_known && h.sensitive)
      if (auto a = escalate(h, spec)) return *a;

  if (marker) {
    for (const auto& h : obs.hosts) {
      if (!h.reached || !knows(h.services, *marker)) continue;
      if (h.sensitivity_known && !h.sensitive) continue;
      if (const auto* e = best_exploit(h, spec)) return Action::exploit(h.address, e->id);
    }
  }

  for (const auto& h : obs.hosts)
    if (h.reached && !h.services_scanned) return Action::service_scan(h.address);

  for (const auto& h : obs.hosts)
    if (h.access >= AccessLevel::user &&
        !std::binary_search(obs.scanned_subnets.begin(), obs.scanned_subnets.end(), h.address.subnet))
      return Action::subnet_scan(h.address);

  for (const auto& h : obs.hosts)
    if (h.reached && h.access == AccessLevel::none)
      if (const auto* e = best_exploit(h, spec)) return Action::exploit(h.address, e->id);

  return Action::terminal();
}

Action random_step(const Observation& obs, const FeatureSchema& schema, Rng& rng) {
  if (obs.hosts.empty()) return Action::terminal();
  const auto a = static_cast<std::uint64_t>(schema.action_dim());
  const auto flat = rng.below(obs.hosts.size() * a);
  return primitive_action(schema, static_cast<int>(flat % a), obs.hosts[flat / a].address);
}

Action ReplayAgent::next(const Observation& obs) {
  if (cursor_ >= actions_.size()) return Action::terminal();
  const Action& a = actions_[cursor_++];
  if (a.kind != ActionKind::terminal && !obs.find(a.target))
    throw std::invalid_argument("replay: action " + describe(a) + " targets an undiscovered host");
  return a;
}

}  // namespace nasim
