#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace nasim {

/// Pseudo-node name for the attacker's side of the network.
inline constexpr std::string_view kInternet = "internet";

enum class AccessLevel : std::uint8_t { none = 0, user = 1, root = 2 };

std::string_view to_string(AccessLevel level);
AccessLevel access_from_string(std::string_view text);

struct IntRange {
  int min = 0;
  int max = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct SubnetSpec {
  std::string name;
  IntRange size;
  double sensitivity = 0.0;
  friend bool operator==(const SubnetSpec&, const SubnetSpec&) = default;
};

/// A service or process together with the OSs it can run on.
struct CatalogEntry {
  std::string id;
  std::vector<std::string> os;
  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct ExploitDef {
  std::string id;
  std::string service;
  AccessLevel access = AccessLevel::user;
  friend bool operator==(const ExploitDef&, const ExploitDef&) = default;
};

struct PrivescDef {
  std::string id;
  std::string os;
  std::optional<std::string> process;
  AccessLevel access = AccessLevel::root;
  friend bool operator==(const PrivescDef&, const PrivescDef&) = default;
};

struct HostConfigSpec {
  IntRange services_per_host{1, 1};
  IntRange processes_per_host{0, 0};
  std::optional<std::string> sensitive_marker_service;
  friend bool operator==(const HostConfigSpec&, const HostConfigSpec&) = default;
};

struct RewardSpec {
  double step_cost = 1.0;
  double sensitive_value = 100.0;
  friend bool operator==(const RewardSpec&, const RewardSpec&) = default;
};

/// A dynamic scenario: fixed topology and catalogs, randomized subnet sizes
/// and host configurations.
struct ScenarioSpec {
  std::string name;
  std::vector<SubnetSpec> subnets;
  /// Undirected links; either endpoint may be `internet`.
  std::vector<std::pair<std::string, std::string>> topology;
  std::vector<std::string> entry;
  std::vector<std::string> os_list;
  std::vector<CatalogEntry> services;
  std::vector<CatalogEntry> processes;
  std::vector<ExploitDef> exploits;
  std::vector<PrivescDef> privescs;
  HostConfigSpec host_config;
  RewardSpec rewards;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;

  /// Index of the named subnet, or -1.
  int subnet_index(std::string_view subnet) const;
  const CatalogEntry* find_service(std::string_view id) const;
  const CatalogEntry* find_process(std::string_view id) const;
};

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { syntax, schema, reference, range };

  ScenarioError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Parses a scenario file (strict JSON, unknown keys rejected) and validates it.
ScenarioSpec parse_scenario(std::string_view text);
ScenarioSpec scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);
std::string serialize_scenario(const ScenarioSpec& spec);

/// Throws ScenarioError if any structural invariant is violated.
void validate_scenario(const ScenarioSpec& spec);

/// Host-vector layout and action layout shared by a set of scenarios.
struct FeatureSchema {
  int max_subnets = 0;
  int max_hosts_per_subnet = 0;
  std::vector<std::string> os;
  std::vector<std::string> services;
  std::vector<std::string> processes;
  std::vector<std::string> exploits;
  std::vector<std::string> privescs;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

  int host_vector_dim() const;
  int action_dim() const;

  /// Number of primitive actions that are not exploits or privescs.
  static constexpr int kFixedActions = 5;

  int os_index(std::string_view id) const;
  int service_index(std::string_view id) const;
  int process_index(std::string_view id) const;
  int exploit_index(std::string_view id) const;
  int privesc_index(std::string_view id) const;

  /// True if every catalog entry and dimension of `spec` fits this schema.
  bool covers(const ScenarioSpec& spec) const;
};

FeatureSchema unify_feature_schema(const std::vector<ScenarioSpec>& specs);

/// The eight scenarios used by the generalization experiments.
const std::map<std::string, ScenarioSpec>& bundled_scenarios();
const ScenarioSpec& bundled_scenario(std::string_view name);

}  // namespace nasim
