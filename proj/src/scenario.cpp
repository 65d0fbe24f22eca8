#include "nasim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <set>

namespace nasim {

using nlohmann::json;

std::string_view to_string(AccessLevel level) {
  switch (level) {
    case AccessLevel::none: return "none";
    case AccessLevel::user: return "user";
    case AccessLevel::root: return "root";
  }
  return "none";
}

AccessLevel access_from_string(std::string_view text) {
  if (text == "none") return AccessLevel::none;
  if (text == "user") return AccessLevel::user;
  if (text == "root") return AccessLevel::root;
  throw ScenarioError(ScenarioError::Kind::range,
                      "access level must be one of none/user/root, got '" + std::string(text) + "'");
}

int ScenarioSpec::subnet_index(std::string_view subnet) const {
  for (std::size_t i = 0; i < subnets.size(); ++i)
    if (subnets[i].name == subnet) return static_cast<int>(i);
  return -1;
}

const CatalogEntry* ScenarioSpec::find_service(std::string_view id) const {
  for (const auto& s : services)
    if (s.id == id) return &s;
  return nullptr;
}

const CatalogEntry* ScenarioSpec::find_process(std::string_view id) const {
  for (const auto& p : processes)
    if (p.id == id) return &p;
  return nullptr;
}

namespace {

using Kind = ScenarioError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& message) { throw ScenarioError(kind, message); }

void expect_keys(const json& obj, const std::string& where,
                 std::initializer_list<std::string_view> required,
                 std::initializer_list<std::string_view> optional = {}) {
  if (!obj.is_object()) fail(Kind::schema, where + ": expected an object");
  for (auto key : required)
    if (!obj.contains(key)) fail(Kind::schema, where + ": missing key '" + std::string(key) + "'");
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) fail(Kind::schema, where + ": unknown key '" + key + "'");
  }
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(Kind::schema, where + ": expected a string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(Kind::schema, where + ": expected a number");
  return v.get<double>();
}

const json& get_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(Kind::schema, where + ": expected an array");
  return v;
}

std::vector<std::string> get_strings(const json& v, const std::string& where) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < get_array(v, where).size(); ++i)
    out.push_back(get_string(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

IntRange get_range(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    fail(Kind::schema, where + ": expected [min, max] integers");
  return {v[0].get<int>(), v[1].get<int>()};
}

std::optional<std::string> get_optional_string(const json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  return get_string(v, where);
}

std::vector<CatalogEntry> get_catalog(const json& v, const std::string& where) {
  std::vector<CatalogEntry> out;
  const auto& arr = get_array(v, where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    expect_keys(arr[i], at, {"id", "os"});
    out.push_back({get_string(arr[i]["id"], at + ".id"), get_strings(arr[i]["os"], at + ".os")});
  }
  return out;
}

json range_json(IntRange r) { return json::array({r.min, r.max}); }

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

void check_unique(const std::vector<std::string>& ids, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) fail(Kind::reference, "duplicate " + what + " '" + id + "'");
}

template <typename T>
std::vector<std::string> ids_of(const std::vector<T>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) out.push_back(item.id);
  return out;
}

void check_range(IntRange r, int lower, const std::string& where) {
  if (r.min < lower || r.min > r.max)
    fail(Kind::range, where + ": invalid range [" + std::to_string(r.min) + ", " +
                          std::to_string(r.max) + "]");
}

void check_os_refs(const std::vector<CatalogEntry>& entries, const std::set<std::string>& os,
                   const std::string& what) {
  for (const auto& e : entries) {
    if (e.os.empty()) fail(Kind::reference, what + " '" + e.id + "' has no allowed OS");
    for (const auto& o : e.os)
      if (!os.contains(o)) fail(Kind::reference, what + " '" + e.id + "' references unknown OS '" + o + "'");
  }
}

template <typename Index>
int find_sorted(const std::vector<std::string>& ids, Index id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return static_cast<int>(it - ids.begin());
}

}  // namespace

void validate_scenario(const ScenarioSpec& spec) {
  if (spec.name.empty()) fail(Kind::schema, "scenario name must not be empty");
  if (spec.subnets.empty()) fail(Kind::range, "scenario must declare at least one subnet");

  std::vector<std::string> subnet_names;
  for (const auto& s : spec.subnets) {
    if (s.name == kInternet) fail(Kind::reference, "subnet name 'internet' is reserved");
    check_range(s.size, 1, "subnet '" + s.name + "' size");
    if (!(s.sensitivity >= 0.0 && s.sensitivity <= 1.0))
      fail(Kind::range, "subnet '" + s.name + "' sensitivity must lie in [0, 1]");
    subnet_names.push_back(s.name);
  }
  check_unique(subnet_names, "subnet");

  check_unique(spec.os_list, "OS");
  if (spec.os_list.empty()) fail(Kind::range, "os_list must not be empty");
  const std::set<std::string> os(spec.os_list.begin(), spec.os_list.end());
  check_unique(ids_of(spec.services), "service");
  check_unique(ids_of(spec.processes), "process");
  check_unique(ids_of(spec.exploits), "exploit");
  check_unique(ids_of(spec.privescs), "privesc");
  check_os_refs(spec.services, os, "service");
  check_os_refs(spec.processes, os, "process");

  for (const auto& e : spec.exploits) {
    if (!spec.find_service(e.service))
      fail(Kind::reference, "exploit '" + e.id + "' references undeclared service '" + e.service + "'");
    if (e.access == AccessLevel::none)
      fail(Kind::range, "exploit '" + e.id + "' must grant user or root access");
  }
  for (const auto& p : spec.privescs) {
    if (!os.contains(p.os))
      fail(Kind::reference, "privesc '" + p.id + "' references undeclared OS '" + p.os + "'");
    if (p.process && !spec.find_process(*p.process))
      fail(Kind::reference, "privesc '" + p.id + "' references undeclared process '" + *p.process + "'");
    if (p.access != AccessLevel::root) fail(Kind::range, "privesc '" + p.id + "' must grant root access");
  }

  const auto& hc = spec.host_config;
  check_range(hc.services_per_host, 0, "host_config.services_per_host");
  check_range(hc.processes_per_host, 0, "host_config.processes_per_host");
  if (hc.sensitive_marker_service && !spec.find_service(*hc.sensitive_marker_service))
    fail(Kind::reference, "sensitive_marker_service references undeclared service '" +
                              *hc.sensitive_marker_service + "'");

  if (!(spec.rewards.step_cost >= 0.0) || !std::isfinite(spec.rewards.step_cost))
    fail(Kind::range, "rewards.step_cost must be a non-negative number");
  if (!(spec.rewards.sensitive_value > 0.0) || !std::isfinite(spec.rewards.sensitive_value))
    fail(Kind::range, "rewards.sensitive_value must be positive");

  // Topology: nodes are the declared subnets plus the internet.
  const int n = static_cast<int>(spec.subnets.size());
  auto node_of = [&](const std::string& name) -> int {
    if (name == kInternet) return n;
    const int idx = spec.subnet_index(name);
    if (idx < 0) fail(Kind::reference, "topology references undeclared subnet '" + name + "'");
    return idx;
  };
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n + 1));
  std::set<std::string> internet_linked;
  for (const auto& [a, b] : spec.topology) {
    const int u = node_of(a);
    const int v = node_of(b);
    if (u == v) fail(Kind::reference, "topology contains a self-link on '" + a + "'");
    adjacency[static_cast<std::size_t>(u)].push_back(v);
    adjacency[static_cast<std::size_t>(v)].push_back(u);
    if (u == n) internet_linked.insert(b);
    if (v == n) internet_linked.insert(a);
  }

  if (spec.entry.empty()) fail(Kind::range, "entry must name at least one subnet");
  check_unique(spec.entry, "entry subnet");
  for (const auto& e : spec.entry) {
    if (spec.subnet_index(e) < 0) fail(Kind::reference, "entry references undeclared subnet '" + e + "'");
    if (!internet_linked.contains(e))
      fail(Kind::reference, "entry subnet '" + e + "' is not linked to 'internet'");
  }
  for (const auto& linked : internet_linked)
    if (std::find(spec.entry.begin(), spec.entry.end(), linked) == spec.entry.end())
      fail(Kind::reference, "subnet '" + linked + "' is linked to 'internet' but not listed in entry");

  std::vector<bool> seen(static_cast<std::size_t>(n + 1), false);
  std::vector<int> queue{n};
  seen[static_cast<std::size_t>(n)] = true;
  while (!queue.empty()) {
    const int u = queue.back();
    queue.pop_back();
    for (int v : adjacency[static_cast<std::size_t>(u)])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        queue.push_back(v);
      }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      fail(Kind::reference, "subnet '" + spec.subnets[static_cast<std::size_t>(i)].name +
                                "' is not connected to 'internet'");
}

ScenarioSpec scenario_from_json(const json& doc) {
  expect_keys(doc, "scenario",
              {"name", "subnets", "topology", "entry", "os_list", "services", "processes", "exploits",
               "privescs", "host_config", "rewards"});
  ScenarioSpec spec;
  spec.name = get_string(doc["name"], "name");

  const auto& subnets = get_array(doc["subnets"], "subnets");
  for (std::size_t i = 0; i < subnets.size(); ++i) {
    const std::string at = "subnets[" + std::to_string(i) + "]";
    expect_keys(subnets[i], at, {"name", "size", "sensitivity"});
    spec.subnets.push_back({get_string(subnets[i]["name"], at + ".name"),
                            get_range(subnets[i]["size"], at + ".size"),
                            get_number(subnets[i]["sensitivity"], at + ".sensitivity")});
  }

  const auto& topo = get_array(doc["topology"], "topology");
  for (std::size_t i = 0; i < topo.size(); ++i) {
    const std::string at = "topology[" + std::to_string(i) + "]";
    if (!topo[i].is_array() || topo[i].size() != 2) fail(Kind::schema, at + ": expected a pair of names");
    spec.topology.emplace_back(get_string(topo[i][0], at), get_string(topo[i][1], at));
  }

  spec.entry = get_strings(doc["entry"], "entry");
  spec.os_list = get_strings(doc["os_list"], "os_list");
  spec.services = get_catalog(doc["services"], "services");
  spec.processes = get_catalog(doc["processes"], "processes");

  const auto& exploits = get_array(doc["exploits"], "exploits");
  for (std::size_t i = 0; i < exploits.size(); ++i) {
    const std::string at = "exploits[" + std::to_string(i) + "]";
    expect_keys(exploits[i], at, {"id", "service", "access"});
    spec.exploits.push_back({get_string(exploits[i]["id"], at + ".id"),
                             get_string(exploits[i]["service"], at + ".service"),
                             access_from_string(get_string(exploits[i]["access"], at + ".access"))});
  }

  const auto& privescs = get_array(doc["privescs"], "privescs");
  for (std::size_t i = 0; i < privescs.size(); ++i) {
    const std::string at = "privescs[" + std::to_string(i) + "]";
    expect_keys(privescs[i], at, {"id", "os", "process", "access"});
    spec.privescs.push_back({get_string(privescs[i]["id"], at + ".id"),
                             get_string(privescs[i]["os"], at + ".os"),
                             get_optional_string(privescs[i]["process"], at + ".process"),
                             access_from_string(get_string(privescs[i]["access"], at + ".access"))});
  }

  const auto& hc = doc["host_config"];
  expect_keys(hc, "host_config", {"services_per_host", "processes_per_host", "sensitive_marker_service"});
  spec.host_config.services_per_host = get_range(hc["services_per_host"], "host_config.services_per_host");
  spec.host_config.processes_per_host = get_range(hc["processes_per_host"], "host_config.processes_per_host");
  spec.host_config.sensitive_marker_service =
      get_optional_string(hc["sensitive_marker_service"], "host_config.sensitive_marker_service");

  const auto& rw = doc["rewards"];
  expect_keys(rw, "rewards", {"step_cost", "sensitive_value"});
  spec.rewards.step_cost = get_number(rw["step_cost"], "rewards.step_cost");
  spec.rewards.sensitive_value = get_number(rw["sensitive_value"], "rewards.sensitive_value");

  validate_scenario(spec);
  return spec;
}

ScenarioSpec parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(Kind::syntax, "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return scenario_from_json(doc);
}

json scenario_to_json(const ScenarioSpec& spec) {
  json doc = json::object();
  doc["name"] = spec.name;
  doc["subnets"] = json::array();
  for (const auto& s : spec.subnets)
    doc["subnets"].push_back({{"name", s.name}, {"size", range_json(s.size)}, {"sensitivity", s.sensitivity}});
  doc["topology"] = json::array();
  for (const auto& [a, b] : spec.topology) doc["topology"].push_back(json::array({a, b}));
  doc["entry"] = spec.entry;
  doc["os_list"] = spec.os_list;
  auto catalog = [](const std::vector<CatalogEntry>& entries) {
    json arr = json::array();
    for (const auto& e : entries) arr.push_back({{"id", e.id}, {"os", e.os}});
    return arr;
  };
  doc["services"] = catalog(spec.services);
  doc["processes"] = catalog(spec.processes);
  doc["exploits"] = json::array();
  for (const auto& e : spec.exploits)
    doc["exploits"].push_back({{"id", e.id}, {"service", e.service}, {"access", to_string(e.access)}});
  doc["privescs"] = json::array();
  for (const auto& p : spec.privescs)
    doc["privescs"].push_back(
        {{"id", p.id}, {"os", p.os}, {"process", optional_json(p.process)}, {"access", to_string(p.access)}});
  doc["host_config"] = {{"services_per_host", range_json(spec.host_config.services_per_host)},
                        {"processes_per_host", range_json(spec.host_config.processes_per_host)},
                        {"sensitive_marker_service", optional_json(spec.host_config.sensitive_marker_service)}};
  doc["rewards"] = {{"step_cost", spec.rewards.step_cost}, {"sensitive_value", spec.rewards.sensitive_value}};
  return doc;
}

std::string serialize_scenario(const ScenarioSpec& spec) { return scenario_to_json(spec).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// FeatureSchema

int FeatureSchema::host_vector_dim() const {
  // subnet one-hot, host one-hot, [reached, compromised, root], services, OS,
  // processes (each preceded by its scanned bit), [sensitivity_known, sensitive], value
  return max_subnets + max_hosts_per_subnet + 3 + 1 + static_cast<int>(services.size()) + 1 +
         static_cast<int>(os.size()) + 1 + static_cast<int>(processes.size()) + 2 + 1;
}

int FeatureSchema::action_dim() const {
  return static_cast<int>(exploits.size() + privescs.size()) + kFixedActions;
}

int FeatureSchema::os_index(std::string_view id) const { return find_sorted(os, id); }
int FeatureSchema::service_index(std::string_view id) const { return find_sorted(services, id); }
int FeatureSchema::process_index(std::string_view id) const { return find_sorted(processes, id); }
int FeatureSchema::exploit_index(std::string_view id) const { return find_sorted(exploits, id); }
int FeatureSchema::privesc_index(std::string_view id) const { return find_sorted(privescs, id); }

bool FeatureSchema::covers(const ScenarioSpec& spec) const {
  if (static_cast<int>(spec.subnets.size()) > max_subnets) return false;
  for (const auto& s : spec.subnets)
    if (s.size.max > max_hosts_per_subnet) return false;
  for (const auto& o : spec.os_list)
    if (os_index(o) < 0) return false;
  for (const auto& s : spec.services)
    if (service_index(s.id) < 0) return false;
  for (const auto& p : spec.processes)
    if (process_index(p.id) < 0) return false;
  for (const auto& e : spec.exploits)
    if (exploit_index(e.id) < 0) return false;
  for (const auto& p : spec.privescs)
    if (privesc_index(p.id) < 0) return false;
  return true;
}

FeatureSchema unify_feature_schema(const std::vector<ScenarioSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("unify_feature_schema: empty scenario set");
  std::set<std::string> os, services, processes, exploits, privescs;
  FeatureSchema schema;
  for (const auto& spec : specs) {
    schema.max_subnets = std::max(schema.max_subnets, static_cast<int>(spec.subnets.size()));
    for (const auto& s : spec.subnets) schema.max_hosts_per_subnet = std::max(schema.max_hosts_per_subnet, s.size.max);
    os.insert(spec.os_list.begin(), spec.os_list.end());
    for (const auto& s : spec.services) services.insert(s.id);
    for (const auto& p : spec.processes) processes.insert(p.id);
    for (const auto& e : spec.exploits) exploits.insert(e.id);
    for (const auto& p : spec.privescs) privescs.insert(p.id);
  }
  schema.os.assign(os.begin(), os.end());
  schema.services.assign(services.begin(), services.end());
  schema.processes.assign(processes.begin(), processes.end());
  schema.exploits.assign(exploits.begin(), exploits.end());
  schema.privescs.assign(privescs.begin(), privescs.end());
  return schema;
}

}  // namespace nasim
