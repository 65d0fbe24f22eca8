#include "nasim/observation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nasim {

const HostView* Observation::find(HostAddress address) const {
  for (const auto& h : hosts)
    if (h.address == address) return &h;
  return nullptr;
}

int MatrixObs::valid() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

int require_index(int idx, std::string_view what, const std::string& id) {
  if (idx < 0) throw EncodingError("schema mismatch: unknown " + std::string(what) + " '" + id + "'");
  return idx;
}

}  // namespace

Eigen::VectorXd encode_host(const HostView& view, const FeatureSchema& schema, double sensitive_value) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(schema.host_vector_dim());
  if (view.address.subnet < 0 || view.address.subnet >= schema.max_subnets)
    throw EncodingError("schema mismatch: subnet index " + std::to_string(view.address.subnet) +
                        " exceeds S_max " + std::to_string(schema.max_subnets));
  if (view.address.host < 0 || view.address.host >= schema.max_hosts_per_subnet)
    throw EncodingError("schema mismatch: host index " + std::to_string(view.address.host) + " exceeds H_max " +
                        std::to_string(schema.max_hosts_per_subnet));

  int at = 0;
  v[at + view.address.subnet] = 1.0;
  at += schema.max_subnets;
  v[at + view.address.host] = 1.0;
  at += schema.max_hosts_per_subnet;

  v[at++] = view.reached ? 1.0 : 0.0;
  v[at++] = view.access >= AccessLevel::user ? 1.0 : 0.0;
  v[at++] = view.access == AccessLevel::root ? 1.0 : 0.0;

  v[at++] = view.services_scanned ? 1.0 : 0.0;
  for (const auto& s : view.services) v[at + require_index(schema.service_index(s), "service", s)] = 1.0;
  at += static_cast<int>(schema.services.size());

  v[at++] = view.os_scanned ? 1.0 : 0.0;
  if (view.os) v[at + require_index(schema.os_index(*view.os), "OS", *view.os)] = 1.0;
  at += static_cast<int>(schema.os.size());

  v[at++] = view.processes_scanned ? 1.0 : 0.0;
  for (const auto& p : view.processes) v[at + require_index(schema.process_index(p), "process", p)] = 1.0;
  at += static_cast<int>(schema.processes.size());

  v[at++] = view.sensitivity_known ? 1.0 : 0.0;
  v[at++] = view.sensitivity_known && view.sensitive ? 1.0 : 0.0;
  v[at++] = view.sensitivity_known ? view.value / sensitive_value : 0.0;
  return v;
}

EncodedObs encode_hosts(const Observation& obs, const FeatureSchema& schema) {
  EncodedObs out;
  out.hosts.resize(schema.host_vector_dim(), static_cast<Eigen::Index>(obs.hosts.size()));
  out.positions.reserve(obs.hosts.size());
  for (std::size_t i = 0; i < obs.hosts.size(); ++i) {
    out.hosts.col(static_cast<Eigen::Index>(i)) = encode_host(obs.hosts[i], schema, obs.sensitive_value);
    out.positions.push_back(obs.hosts[i].discovery_order);
  }
  return out;
}

MatrixObs encode_matrix(const Observation& obs, const FeatureSchema& schema, int max_hosts) {
  const int n = static_cast<int>(obs.hosts.size());
  if (n > max_hosts)
    throw EncodingError(std::to_string(n) + " discovered hosts exceed the matrix capacity of " +
                        std::to_string(max_hosts));
  MatrixObs out;
  out.matrix = Eigen::MatrixXd::Zero(max_hosts, schema.host_vector_dim());
  out.mask.assign(static_cast<std::size_t>(max_hosts), 0);
  for (int i = 0; i < n; ++i) {
    out.matrix.row(i) = encode_host(obs.hosts[static_cast<std::size_t>(i)], schema, obs.sensitive_value).transpose();
    out.mask[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

GraphObs encode_graph(const Observation& obs, const FeatureSchema& schema) {
  GraphObs g;
  for (const auto& h : obs.hosts) g.subnet_ids.push_back(h.address.subnet);
  std::sort(g.subnet_ids.begin(), g.subnet_ids.end());
  g.subnet_ids.erase(std::unique(g.subnet_ids.begin(), g.subnet_ids.end()), g.subnet_ids.end());

  const auto n_subnets = static_cast<Eigen::Index>(g.subnet_ids.size());
  g.subnet_features = Eigen::MatrixXd::Zero(schema.max_subnets, n_subnets);
  for (Eigen::Index i = 0; i < n_subnets; ++i) {
    const int s = g.subnet_ids[static_cast<std::size_t>(i)];
    if (s >= schema.max_subnets) throw EncodingError("schema mismatch: subnet index exceeds S_max");
    g.subnet_features(s, i) = 1.0;
  }

  auto subnet_node = [&](int subnet) -> int {
    auto it = std::lower_bound(g.subnet_ids.begin(), g.subnet_ids.end(), subnet);
    if (it == g.subnet_ids.end() || *it != subnet) return -1;
    return static_cast<int>(it - g.subnet_ids.begin());
  };

  const EncodedObs enc = encode_hosts(obs, schema);
  g.host_features = enc.hosts;
  for (std::size_t i = 0; i < obs.hosts.size(); ++i) {
    g.host_addresses.push_back(obs.hosts[i].address);
    g.edges.emplace_back(subnet_node(obs.hosts[i].address.subnet), static_cast<int>(n_subnets) + static_cast<int>(i));
  }
  for (const auto& [a, b] : obs.known_links) {
    const int u = subnet_node(a);
    const int v = subnet_node(b);
    if (u >= 0 && v >= 0) g.edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  return g;
}

Eigen::VectorXd positional_embedding(int pos, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("positional_embedding: dim must be even and >= 2, got " + std::to_string(dim));
  if (pos < 0) throw std::invalid_argument("positional_embedding: negative position");
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double angle = static_cast<double>(pos) / std::pow(10000.0, 2.0 * i / dim);
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
  return out;
}

Action decode_action(const Observation& obs, const FeatureSchema& schema, int flat) {
  const int a = schema.action_dim();
  const int row = flat / a;
  if (flat < 0 || row >= static_cast<int>(obs.hosts.size()))
    throw std::out_of_range("flat action " + std::to_string(flat) + " refers to host row " + std::to_string(row) +
                            " but only " + std::to_string(obs.hosts.size()) + " hosts are discovered");
  return primitive_action(schema, flat % a, obs.hosts[static_cast<std::size_t>(row)].address);
}

// ---------------------------------------------------------------------------
// DOT rendering

namespace {

std::string node_id(HostAddress a) { return "h" + std::to_string(a.subnet) + "_" + std::to_string(a.host); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"') out += '\\';
    out += c;
  }
  return out;
}

std::string host_label(const HostView& h) {
  std::string label = "[" + std::to_string(h.address.subnet) + ", " + std::to_string(h.address.host) + "]";
  label += "\\naccess: " + std::string(to_string(h.access));
  if (h.os) label += "\\nos: " + *h.os;
  if (h.services_scanned || !h.services.empty()) {
    label += "\\nservices: ";
    if (h.services.empty()) label += "-";
    for (std::size_t i = 0; i < h.services.size(); ++i) label += (i ? ", " : "") + h.services[i];
  }
  if (!h.processes.empty()) {
    label += "\\nprocesses: ";
    for (std::size_t i = 0; i < h.processes.size(); ++i) label += (i ? ", " : "") + h.processes[i];
  }
  if (h.sensitivity_known) {
    std::ostringstream value;
    value << h.value;
    label += h.sensitive ? "\\nSENSITIVE (" + value.str() + ")" : "\\nnot sensitive";
  }
  return label;
}

std::string fill_for(const HostView& h) {
  if (h.access == AccessLevel::root) return "tomato";
  if (h.access == AccessLevel::user) return "orange";
  return "white";
}

}  // namespace

std::string render_dot(const Observation& obs) {
  std::ostringstream out;
  out << "digraph observation {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=box, style=filled, fontname=\"Helvetica\"];\n";
  if (obs.last_action) {
    const auto& la = *obs.last_action;
    out << "  label=\"last action: " << escape(describe(la.action)) << (la.success ? " [success]" : " [failed]")
        << "\";\n";
  }

  std::vector<int> subnets;
  for (const auto& h : obs.hosts) subnets.push_back(h.address.subnet);
  std::sort(subnets.begin(), subnets.end());
  subnets.erase(std::unique(subnets.begin(), subnets.end()), subnets.end());

  const bool has_target = obs.last_action && obs.last_action->action.kind != ActionKind::terminal;
  for (int s : subnets) {
    out << "  subgraph cluster_" << s << " {\n";
    out << "    label=\"subnet " << s << "\";\n";
    out << "    s" << s << " [shape=ellipse, style=dashed, label=\"subnet " << s << "\"];\n";
    for (const auto& h : obs.hosts) {
      if (h.address.subnet != s) continue;
      out << "    " << node_id(h.address) << " [label=\"" << escape(host_label(h)) << "\", fillcolor=" << fill_for(h);
      if (h.sensitivity_known && h.sensitive) out << ", peripheries=2";
      if (has_target && obs.last_action->action.target == h.address)
        out << ", color=" << (obs.last_action->success ? "blue" : "red") << ", penwidth=3";
      out << "];\n";
      out << "    s" << s << " -> " << node_id(h.address) << " [arrowhead=none];\n";
    }
    out << "  }\n";
  }
  for (const auto& [a, b] : obs.known_links)
    if (std::binary_search(subnets.begin(), subnets.end(), a) && std::binary_search(subnets.begin(), subnets.end(), b))
      out << "  s" << a << " -> s" << b << " [dir=none, style=bold];\n";
  out << "}\n";
  return out.str();
}

}  // namespace nasim
