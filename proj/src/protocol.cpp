#include "nasim/protocol.hpp"

#include <istream>
#include <ostream>

namespace nasim {

using nlohmann::json;

namespace {

struct ProtocolError {
  std::string code;
  std::string message;
};

json error_response(const std::string& code, const std::string& message) {
  return {{"proto", kProtocolVersion}, {"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

json address_json(HostAddress a) { return json::array({a.subnet, a.host}); }

HostAddress address_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

json observation_to_json(const Observation& obs) {
  json hosts = json::array();
  for (const auto& h : obs.hosts) {
    json v;
    v["address"] = address_json(h.address);
    v["discovery_order"] = h.discovery_order;
    v["reached"] = h.reached;
    v["access"] = std::string(to_string(h.access));
    v["services_scanned"] = h.services_scanned;
    v["services"] = h.services;
    v["os_scanned"] = h.os_scanned;
    v["os"] = h.os ? json(*h.os) : json(nullptr);
    v["processes_scanned"] = h.processes_scanned;
    v["processes"] = h.processes;
    v["sensitivity_known"] = h.sensitivity_known;
    v["sensitive"] = h.sensitive;
    v["value"] = h.value;
    hosts.push_back(std::move(v));
  }
  json doc;
  doc["hosts"] = std::move(hosts);
  doc["known_links"] = json::array();
  for (const auto& [a, b] : obs.known_links) doc["known_links"].push_back(json::array({a, b}));
  doc["scanned_subnets"] = obs.scanned_subnets;
  if (obs.last_action) {
    doc["last_action"] = {{"action", action_to_json(obs.last_action->action)},
                          {"success", obs.last_action->success},
                          {"newly_discovered", obs.last_action->newly_discovered}};
  } else {
    doc["last_action"] = nullptr;
  }
  doc["subnet_count"] = obs.subnet_count;
  doc["sensitive_value"] = obs.sensitive_value;
  return doc;
}

Observation observation_from_json(const json& doc) {
  Observation obs;
  for (const auto& v : doc.at("hosts")) {
    HostView h;
    h.address = address_from(v.at("address"));
    h.discovery_order = v.at("discovery_order").get<int>();
    h.reached = v.at("reached").get<bool>();
    h.access = access_from_string(v.at("access").get<std::string>());
    h.services_scanned = v.at("services_scanned").get<bool>();
    h.services = v.at("services").get<std::vector<std::string>>();
    h.os_scanned = v.at("os_scanned").get<bool>();
    if (!v.at("os").is_null()) h.os = v.at("os").get<std::string>();
    h.processes_scanned = v.at("processes_scanned").get<bool>();
    h.processes = v.at("processes").get<std::vector<std::string>>();
    h.sensitivity_known = v.at("sensitivity_known").get<bool>();
    h.sensitive = v.at("sensitive").get<bool>();
    h.value = v.at("value").get<double>();
    obs.hosts.push_back(std::move(h));
  }
  for (const auto& l : doc.at("known_links")) obs.known_links.emplace_back(l.at(0).get<int>(), l.at(1).get<int>());
  obs.scanned_subnets = doc.at("scanned_subnets").get<std::vector<int>>();
  if (const auto& la = doc.at("last_action"); !la.is_null())
    obs.last_action = LastAction{action_from_json(la.at("action")), la.at("success").get<bool>(),
                                 la.at("newly_discovered").get<int>()};
  obs.subnet_count = doc.at("subnet_count").get<int>();
  obs.sensitive_value = doc.at("sensitive_value").get<double>();
  return obs;
}

json schema_to_json(const FeatureSchema& schema) {
  return {{"host_vector_dim", schema.host_vector_dim()},
          {"action_dim", schema.action_dim()},
          {"max_subnets", schema.max_subnets},
          {"max_hosts_per_subnet", schema.max_hosts_per_subnet},
          {"os", schema.os},
          {"services", schema.services},
          {"processes", schema.processes},
          {"exploits", schema.exploits},
          {"privescs", schema.privescs}};
}

RemoteEnvServer::RemoteEnvServer(VecEnvConfig config) : env_(std::move(config)) {}

json RemoteEnvServer::handle(std::string_view line) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::parse_error& e) {
    return error_response("parse_error", e.what());
  }
  try {
    return dispatch(req);
  } catch (const ProtocolError& e) {
    return error_response(e.code, e.message);
  } catch (const json::exception& e) {
    return error_response("bad_request", e.what());
  } catch (const std::out_of_range& e) {
    return error_response("invalid_action", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response("bad_request", e.what());
  }
}

json RemoteEnvServer::dispatch(const json& req) {
  if (!req.is_object()) throw ProtocolError{"bad_request", "request must be a JSON object"};
  if (req.contains("proto") && req.at("proto") != kProtocolVersion)
    throw ProtocolError{"unsupported_protocol", "server speaks " + std::string(kProtocolVersion)};
  if (!req.contains("op") || !req.at("op").is_string()) throw ProtocolError{"bad_request", "missing string field 'op'"};
  const std::string op = req.at("op").get<std::string>();

  json resp{{"proto", kProtocolVersion}, {"ok", true}};
  if (op == "hello") {
    resp["schema"] = schema_to_json(env_.schema());
    resp["n_envs"] = env_.n_envs();
  } else if (op == "reset") {
    const auto obs = env_.reset();
    started_ = true;
    resp["observations"] = json::array();
    for (const auto& o : obs) resp["observations"].push_back(observation_to_json(o));
  } else if (op == "step") {
    if (!started_) throw ProtocolError{"not_started", "send reset before step"};
    return step_response(req);
  } else if (op == "close") {
    closed_ = true;
  } else {
    throw ProtocolError{"unknown_op", "unknown op '" + op + "'"};
  }
  return resp;
}

// Actions are flat indices or action objects; validated before any env moves.
json RemoteEnvServer::step_response(const json& req) {
  const json& acts = req.at("actions");
  if (!acts.is_array() || static_cast<int>(acts.size()) != env_.n_envs())
    throw ProtocolError{"bad_request", "'actions' must be an array of " + std::to_string(env_.n_envs()) + " entries"};
  std::vector<Action> actions;
  for (int i = 0; i < env_.n_envs(); ++i) {
    const json& a = acts.at(static_cast<std::size_t>(i));
    if (a.is_number_integer())
      actions.push_back(decode_action(env_.observation(i), env_.schema(), a.get<int>()));
    else
      actions.push_back(action_from_json(a));
  }
  const auto results = env_.step(actions);
  json resp{{"proto", kProtocolVersion}, {"ok", true}};
  resp["results"] = json::array();
  for (const auto& r : results) {
    json j;
    j["observation"] = observation_to_json(r.observation);
    j["reward"] = r.reward;
    j["done"] = r.done;
    j["success"] = r.info.success;
    j["newly_discovered"] = r.info.newly_discovered;
    j["action"] = action_to_json(r.info.action);
    j["truncated"] = r.info.truncated;
    if (r.info.reset_observation) {
      j["reset_observation"] = observation_to_json(*r.info.reset_observation);
      j["episode_length"] = r.info.episode_length;
      j["episode_reward"] = r.info.episode_reward;
    }
    resp["results"].push_back(std::move(j));
  }
  return resp;
}

void RemoteEnvServer::serve(std::istream& in, std::ostream& out) {
  std::string line;
  while (!closed_ && std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << handle(line).dump() << '\n' << std::flush;
  }
}

}  // namespace nasim
