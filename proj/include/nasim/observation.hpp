#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nasim/action.hpp"
#include "nasim/instancer.hpp"
#include "nasim/scenario.hpp"

namespace nasim {

/// What the agent knows about one discovered host.
struct HostView {
  HostAddress address;
  int discovery_order = 0;
  bool reached = false;
  AccessLevel access = AccessLevel::none;
  bool services_scanned = false;
  std::vector<std::string> services;  // full set once scanned, else services learned by exploiting
  bool os_scanned = false;
  std::optional<std::string> os;
  bool processes_scanned = false;
  std::vector<std::string> processes;
  bool sensitivity_known = false;
  bool sensitive = false;
  double value = 0.0;  // raw value, meaningful only when sensitivity_known

  friend bool operator==(const HostView&, const HostView&) = default;
};

struct LastAction {
  Action action;
  bool success = false;
  int newly_discovered = 0;
  friend bool operator==(const LastAction&, const LastAction&) = default;
};

/// Cumulative agent knowledge within one episode.
struct Observation {
  std::vector<HostView> hosts;  // ordered by discovery_order
  std::vector<std::pair<int, int>> known_links;
  std::vector<int> scanned_subnets;  // subnets a SubnetScan has been run from
  std::optional<LastAction> last_action;
  int subnet_count = 0;
  double sensitive_value = 1.0;

  const HostView* find(HostAddress address) const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxHosts = 30;

Eigen::VectorXd encode_host(const HostView& view, const FeatureSchema& schema, double sensitive_value);

/// Host vectors as columns (d x n) in discovery order, plus their discovery positions.
struct EncodedObs {
  Eigen::MatrixXd hosts;
  std::vector<int> positions;
  int host_count() const { return static_cast<int>(hosts.cols()); }
};

EncodedObs encode_hosts(const Observation& obs, const FeatureSchema& schema);

struct MatrixObs {
  Eigen::MatrixXd matrix;  // max_hosts x host_vector_dim
  std::vector<std::uint8_t> mask;
  int valid() const;
};

/// Throws EncodingError when more than `max_hosts` hosts are discovered.
MatrixObs encode_matrix(const Observation& obs, const FeatureSchema& schema, int max_hosts = kMaxHosts);

struct GraphObs {
  std::vector<int> subnet_ids;           // node i < subnet_ids.size() is a subnet node
  std::vector<HostAddress> host_addresses;  // remaining nodes, discovery order
  Eigen::MatrixXd subnet_features;       // S_max x n_subnets, one-hot columns
  Eigen::MatrixXd host_features;         // d x n_hosts
  std::vector<std::pair<int, int>> edges;  // node index pairs; membership edges first
  int node_count() const { return static_cast<int>(subnet_ids.size() + host_addresses.size()); }
};

GraphObs encode_graph(const Observation& obs, const FeatureSchema& schema);

/// Sine-cosine embedding of a discovery position. `dim` must be even and >= 2.
Eigen::VectorXd positional_embedding(int pos, int dim);

/// Action for flat index `flat` = host_row * action_dim + primitive, where
/// host_row follows discovery order. Throws std::out_of_range when the row
/// does not exist.
Action decode_action(const Observation& obs, const FeatureSchema& schema, int flat);

/// Graphviz digraph of the agent's knowledge, with the last action highlighted.
std::string render_dot(const Observation& obs);

}  // namespace nasim
