#include "nasim/instancer.hpp"

#include <algorithm>
#include <set>

#include "nasim/rng.hpp"

namespace nasim {

using nlohmann::json;

std::string to_string(HostAddress address) {
  return "(" + std::to_string(address.subnet) + "," + std::to_string(address.host) + ")";
}

int ScenarioInstance::host_index(HostAddress address) const {
  if (address.subnet < 0 || address.subnet >= subnet_count()) return -1;
  if (address.host < 0 || address.host >= subnet_sizes[static_cast<std::size_t>(address.subnet)]) return -1;
  int offset = 0;
  for (int s = 0; s < address.subnet; ++s) offset += subnet_sizes[static_cast<std::size_t>(s)];
  return offset + address.host;
}

const HostConfig& ScenarioInstance::host(HostAddress address) const {
  const int idx = host_index(address);
  if (idx < 0) throw std::out_of_range("invalid host address " + to_string(address));
  return hosts[static_cast<std::size_t>(idx)];
}

bool ScenarioInstance::is_entry(int subnet) const {
  return std::binary_search(entry.begin(), entry.end(), subnet);
}

std::vector<int> ScenarioInstance::neighbours(int subnet) const {
  std::vector<int> out;
  for (const auto& [a, b] : links) {
    if (a == subnet) out.push_back(b);
    if (b == subnet) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool ScenarioInstance::linked(int a, int b) const {
  const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
  return std::find(links.begin(), links.end(), key) != links.end();
}

bool operator==(const ScenarioInstance& a, const ScenarioInstance& b) {
  const bool same_spec = (a.spec == b.spec) || (a.spec && b.spec && *a.spec == *b.spec);
  return same_spec && a.subnet_names == b.subnet_names && a.subnet_sizes == b.subnet_sizes &&
         a.hosts == b.hosts && a.links == b.links && a.entry == b.entry && a.seed == b.seed;
}

namespace {

std::vector<std::string> compatible(const std::vector<CatalogEntry>& catalog, const std::string& os) {
  std::vector<std::string> out;
  for (const auto& entry : catalog)
    if (std::find(entry.os.begin(), entry.os.end(), os) != entry.os.end()) out.push_back(entry.id);
  return out;
}

/// `count` distinct items drawn uniformly from `pool` (partial Fisher-Yates).
std::vector<std::string> sample_without_replacement(std::vector<std::string> pool, int count, Rng& rng) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) {
    const auto remaining = pool.size() - static_cast<std::size_t>(i);
    const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.below(remaining));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return out;
}

void check_feasible(const ScenarioSpec& spec) {
  const auto& hc = spec.host_config;
  for (const auto& os : spec.os_list) {
    const auto svc = compatible(spec.services, os).size();
    const auto proc = compatible(spec.processes, os).size();
    if (static_cast<std::size_t>(hc.services_per_host.max) > svc)
      throw InstanceError("scenario '" + spec.name + "': services_per_host.max = " +
                          std::to_string(hc.services_per_host.max) + " exceeds the " + std::to_string(svc) +
                          " services compatible with OS '" + os + "'");
    if (static_cast<std::size_t>(hc.processes_per_host.max) > proc)
      throw InstanceError("scenario '" + spec.name + "': processes_per_host.max = " +
                          std::to_string(hc.processes_per_host.max) + " exceeds the " + std::to_string(proc) +
                          " processes compatible with OS '" + os + "'");
  }
}

}  // namespace

ScenarioInstance instantiate(std::shared_ptr<const ScenarioSpec> spec_ptr, std::uint64_t seed) {
  if (!spec_ptr) throw std::invalid_argument("instantiate: null scenario");
  const ScenarioSpec& spec = *spec_ptr;
  check_feasible(spec);

  ScenarioInstance inst;
  inst.spec = spec_ptr;
  inst.seed = seed;
  for (const auto& s : spec.subnets) inst.subnet_names.push_back(s.name);

  Rng sizes = Rng::derive(seed, Stream::subnet_sizes);
  for (const auto& s : spec.subnets) inst.subnet_sizes.push_back(sizes.uniform_int(s.size.min, s.size.max));

  for (const auto& [a, b] : spec.topology) {
    if (a == kInternet) {
      inst.entry.push_back(spec.subnet_index(b));
    } else if (b == kInternet) {
      inst.entry.push_back(spec.subnet_index(a));
    } else {
      const int u = spec.subnet_index(a);
      const int v = spec.subnet_index(b);
      inst.links.emplace_back(std::min(u, v), std::max(u, v));
    }
  }
  std::sort(inst.links.begin(), inst.links.end());
  inst.links.erase(std::unique(inst.links.begin(), inst.links.end()), inst.links.end());
  std::sort(inst.entry.begin(), inst.entry.end());
  inst.entry.erase(std::unique(inst.entry.begin(), inst.entry.end()), inst.entry.end());

  const auto& hc = spec.host_config;
  const CatalogEntry* marker = hc.sensitive_marker_service ? spec.find_service(*hc.sensitive_marker_service) : nullptr;

  Rng sensitivity = Rng::derive(seed, Stream::sensitivity);
  int flat = 0;
  for (int s = 0; s < inst.subnet_count(); ++s) {
    const double p = spec.subnets[static_cast<std::size_t>(s)].sensitivity;
    for (int h = 0; h < inst.subnet_sizes[static_cast<std::size_t>(s)]; ++h, ++flat) {
      HostConfig host;
      host.address = {s, h};
      host.sensitive = sensitivity.bernoulli(p);
      host.value = host.sensitive ? spec.rewards.sensitive_value : 0.0;

      Rng cfg = Rng::derive(seed, Stream::host_configs, {static_cast<std::uint64_t>(flat)});
      std::vector<std::string> os_choices = spec.os_list;
      if (host.sensitive && marker) {
        std::erase_if(os_choices, [&](const std::string& os) {
          return std::find(marker->os.begin(), marker->os.end(), os) == marker->os.end();
        });
      }
      host.os = os_choices[static_cast<std::size_t>(cfg.below(os_choices.size()))];

      auto services = compatible(spec.services, host.os);
      int n_services = cfg.uniform_int(hc.services_per_host.min, hc.services_per_host.max);
      if (host.sensitive && marker) {
        std::erase(services, marker->id);
        host.services = sample_without_replacement(services, std::max(n_services - 1, 0), cfg);
        host.services.push_back(marker->id);
      } else {
        host.services = sample_without_replacement(services, n_services, cfg);
      }
      std::sort(host.services.begin(), host.services.end());

      const auto processes = compatible(spec.processes, host.os);
      const int n_processes = cfg.uniform_int(hc.processes_per_host.min, hc.processes_per_host.max);
      host.processes = sample_without_replacement(processes, n_processes, cfg);
      std::sort(host.processes.begin(), host.processes.end());

      inst.hosts.push_back(std::move(host));
    }
  }
  return inst;
}

ScenarioInstance instantiate(const ScenarioSpec& spec, std::uint64_t seed) {
  return instantiate(std::make_shared<const ScenarioSpec>(spec), seed);
}

// ---------------------------------------------------------------------------
// Permutations

IdPermutation IdPermutation::inverse() const {
  IdPermutation inv;
  inv.subnet.assign(subnet.size(), 0);
  inv.host.resize(host.size());
  for (std::size_t old = 0; old < subnet.size(); ++old) {
    const auto fresh = static_cast<std::size_t>(subnet[old]);
    inv.subnet[fresh] = static_cast<int>(old);
    inv.host[fresh].assign(host[old].size(), 0);
    for (std::size_t h = 0; h < host[old].size(); ++h)
      inv.host[fresh][static_cast<std::size_t>(host[old][h])] = static_cast<int>(h);
  }
  return inv;
}

bool IdPermutation::is_identity() const {
  for (std::size_t i = 0; i < subnet.size(); ++i) {
    if (subnet[i] != static_cast<int>(i)) return false;
    for (std::size_t h = 0; h < host[i].size(); ++h)
      if (host[i][h] != static_cast<int>(h)) return false;
  }
  return true;
}

HostAddress IdPermutation::apply(HostAddress old) const {
  return {subnet.at(static_cast<std::size_t>(old.subnet)),
          host.at(static_cast<std::size_t>(old.subnet)).at(static_cast<std::size_t>(old.host))};
}

IdPermutation sample_permutation(const ScenarioInstance& instance, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, Stream::permutation);
  IdPermutation perm;
  perm.subnet = rng.permutation(instance.subnet_count());
  for (int size : instance.subnet_sizes) perm.host.push_back(rng.permutation(size));
  return perm;
}

ScenarioInstance apply_permutation(const ScenarioInstance& instance, const IdPermutation& perm) {
  const auto n = static_cast<std::size_t>(instance.subnet_count());
  if (perm.subnet.size() != n || perm.host.size() != n)
    throw std::invalid_argument("apply_permutation: permutation does not match instance shape");

  ScenarioInstance out;
  out.spec = instance.spec;
  out.seed = instance.seed;
  out.subnet_names.resize(n);
  out.subnet_sizes.resize(n);
  for (std::size_t old = 0; old < n; ++old) {
    const auto fresh = static_cast<std::size_t>(perm.subnet[old]);
    out.subnet_names[fresh] = instance.subnet_names[old];
    out.subnet_sizes[fresh] = instance.subnet_sizes[old];
  }
  out.hosts.reserve(instance.hosts.size());
  for (const auto& h : instance.hosts) {
    HostConfig moved = h;
    moved.address = perm.apply(h.address);
    out.hosts.push_back(std::move(moved));
  }
  std::sort(out.hosts.begin(), out.hosts.end(),
            [](const HostConfig& a, const HostConfig& b) { return a.address < b.address; });
  for (const auto& [a, b] : instance.links) {
    const int u = perm.subnet[static_cast<std::size_t>(a)];
    const int v = perm.subnet[static_cast<std::size_t>(b)];
    out.links.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(out.links.begin(), out.links.end());
  for (int e : instance.entry) out.entry.push_back(perm.subnet[static_cast<std::size_t>(e)]);
  std::sort(out.entry.begin(), out.entry.end());
  return out;
}

std::pair<ScenarioInstance, IdPermutation> permute_ids(const ScenarioInstance& instance, std::uint64_t seed) {
  auto perm = sample_permutation(instance, seed);
  auto relabeled = apply_permutation(instance, perm);
  return {std::move(relabeled), std::move(perm)};
}

// ---------------------------------------------------------------------------
// JSON

json instance_to_json(const ScenarioInstance& instance) {
  json doc;
  doc["seed"] = instance.seed;
  doc["scenario"] = scenario_to_json(*instance.spec);
  doc["subnet_names"] = instance.subnet_names;
  doc["subnet_sizes"] = instance.subnet_sizes;
  doc["links"] = json::array();
  for (const auto& [a, b] : instance.links) doc["links"].push_back(json::array({a, b}));
  doc["entry"] = instance.entry;
  doc["hosts"] = json::array();
  for (const auto& h : instance.hosts) {
    doc["hosts"].push_back({{"address", json::array({h.address.subnet, h.address.host})},
                            {"os", h.os},
                            {"services", h.services},
                            {"processes", h.processes},
                            {"sensitive", h.sensitive},
                            {"value", h.value}});
  }
  return doc;
}

ScenarioInstance instance_from_json(const json& doc) {
  auto bad = [](const std::string& msg) { return InstanceError("instance: " + msg); };
  try {
    ScenarioInstance inst;
    inst.spec = std::make_shared<const ScenarioSpec>(scenario_from_json(doc.at("scenario")));
    const ScenarioSpec& spec = *inst.spec;
    inst.seed = doc.at("seed").get<std::uint64_t>();
    inst.subnet_names = doc.at("subnet_names").get<std::vector<std::string>>();
    inst.subnet_sizes = doc.at("subnet_sizes").get<std::vector<int>>();
    const auto n = static_cast<int>(inst.subnet_sizes.size());
    if (n != static_cast<int>(spec.subnets.size()) || inst.subnet_names.size() != spec.subnets.size())
      throw bad("subnet count does not match the scenario");
    for (const auto& l : doc.at("links")) {
      const int a = l.at(0).get<int>();
      const int b = l.at(1).get<int>();
      if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw bad("invalid link");
      inst.links.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(inst.links.begin(), inst.links.end());
    inst.entry = doc.at("entry").get<std::vector<int>>();
    std::sort(inst.entry.begin(), inst.entry.end());
    for (int e : inst.entry)
      if (e < 0 || e >= n) throw bad("invalid entry subnet");
    for (const auto& h : doc.at("hosts")) {
      HostConfig host;
      host.address = {h.at("address").at(0).get<int>(), h.at("address").at(1).get<int>()};
      host.os = h.at("os").get<std::string>();
      host.services = h.at("services").get<std::vector<std::string>>();
      host.processes = h.at("processes").get<std::vector<std::string>>();
      host.sensitive = h.at("sensitive").get<bool>();
      host.value = h.at("value").get<double>();
      if (std::find(spec.os_list.begin(), spec.os_list.end(), host.os) == spec.os_list.end())
        throw bad("host " + to_string(host.address) + " has unknown OS '" + host.os + "'");
      for (const auto& s : host.services)
        if (!spec.find_service(s)) throw bad("host " + to_string(host.address) + " runs unknown service '" + s + "'");
      for (const auto& p : host.processes)
        if (!spec.find_process(p)) throw bad("host " + to_string(host.address) + " runs unknown process '" + p + "'");
      std::sort(host.services.begin(), host.services.end());
      std::sort(host.processes.begin(), host.processes.end());
      inst.hosts.push_back(std::move(host));
    }
    std::sort(inst.hosts.begin(), inst.hosts.end(),
              [](const HostConfig& a, const HostConfig& b) { return a.address < b.address; });
    std::size_t k = 0;
    for (int s = 0; s < n; ++s)
      for (int h = 0; h < inst.subnet_sizes[static_cast<std::size_t>(s)]; ++h, ++k)
        if (k >= inst.hosts.size() || inst.hosts[k].address != HostAddress{s, h})
          throw bad("host addresses must be dense within each subnet");
    if (k != inst.hosts.size()) throw bad("more hosts than subnet sizes allow");
    return inst;
  } catch (const json::exception& e) {
    throw bad(e.what());
  }
}

}  // namespace nasim
