#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nasim/scenario.hpp"

namespace nasim {

/// (subnet, host) pair; both zero-based indices into the instance.
struct HostAddress {
  int subnet = 0;
  int host = 0;
  friend auto operator<=>(const HostAddress&, const HostAddress&) = default;
};

std::string to_string(HostAddress address);

struct HostConfig {
  HostAddress address;
  std::string os;
  std::vector<std::string> services;   // sorted
  std::vector<std::string> processes;  // sorted
  bool sensitive = false;
  double value = 0.0;
  friend bool operator==(const HostConfig&, const HostConfig&) = default;
};

/// A concrete network sampled from a ScenarioSpec. Subnet indices refer to
/// `subnet_names`, which follow the spec's order until permute_ids relabels them.
struct ScenarioInstance {
  std::shared_ptr<const ScenarioSpec> spec;
  std::vector<std::string> subnet_names;
  std::vector<int> subnet_sizes;
  std::vector<HostConfig> hosts;  // grouped by subnet, ordered by address
  std::vector<std::pair<int, int>> links;  // subnet-subnet, each pair sorted (a < b)
  std::vector<int> entry;                  // sorted subnet indices linked to the internet
  std::uint64_t seed = 0;

  int subnet_count() const { return static_cast<int>(subnet_sizes.size()); }
  int host_count() const { return static_cast<int>(hosts.size()); }

  /// Flat index of `address` into `hosts`, or -1 if the address is invalid.
  int host_index(HostAddress address) const;
  const HostConfig& host(HostAddress address) const;
  bool is_entry(int subnet) const;
  std::vector<int> neighbours(int subnet) const;
  bool linked(int a, int b) const;

  /// Instances compare equal when all sampled content matches (spec by value).
  friend bool operator==(const ScenarioInstance& a, const ScenarioInstance& b);
};

class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic function of (spec, seed). Throws InstanceError when the
/// host-config constraints cannot be met for some sampled host.
ScenarioInstance instantiate(std::shared_ptr<const ScenarioSpec> spec, std::uint64_t seed);
ScenarioInstance instantiate(const ScenarioSpec& spec, std::uint64_t seed);

/// Relabeling of subnet and host indices. `subnet[old] = new`,
/// `host[old_subnet][old_host] = new_host`.
struct IdPermutation {
  std::vector<int> subnet;
  std::vector<std::vector<int>> host;

  IdPermutation inverse() const;
  bool is_identity() const;
  HostAddress apply(HostAddress old) const;
  friend bool operator==(const IdPermutation&, const IdPermutation&) = default;
};

IdPermutation sample_permutation(const ScenarioInstance& instance, std::uint64_t seed);
ScenarioInstance apply_permutation(const ScenarioInstance& instance, const IdPermutation& perm);
std::pair<ScenarioInstance, IdPermutation> permute_ids(const ScenarioInstance& instance, std::uint64_t seed);

nlohmann::json instance_to_json(const ScenarioInstance& instance);
/// Inverse of instance_to_json; validates addresses and catalog references.
ScenarioInstance instance_from_json(const nlohmann::json& doc);

}  // namespace nasim
