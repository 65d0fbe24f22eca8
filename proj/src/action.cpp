#include "nasim/action.hpp"

#include <stdexcept>

namespace nasim {

using nlohmann::json;

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::exploit: return "Exploit";
    case ActionKind::privesc: return "PrivEsc";
    case ActionKind::service_scan: return "ServiceScan";
    case ActionKind::os_scan: return "OSScan";
    case ActionKind::subnet_scan: return "SubnetScan";
    case ActionKind::process_scan: return "ProcessScan";
    case ActionKind::terminal: return "Terminal";
  }
  return "Terminal";
}

ActionKind action_kind_from_string(std::string_view text) {
  for (auto k : {ActionKind::exploit, ActionKind::privesc, ActionKind::service_scan, ActionKind::os_scan,
                 ActionKind::subnet_scan, ActionKind::process_scan, ActionKind::terminal})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown action kind '" + std::string(text) + "'");
}

std::string describe(const Action& action) {
  std::string out(to_string(action.kind));
  if (action.kind == ActionKind::terminal) return out;
  if (!action.id.empty()) out += "(" + action.id + ")";
  return out + " on " + to_string(action.target);
}

json action_to_json(const Action& action) {
  json doc{{"kind", to_string(action.kind)}};
  if (action.kind == ActionKind::terminal) {
    doc["target"] = nullptr;
  } else {
    doc["target"] = json::array({action.target.subnet, action.target.host});
  }
  doc["id"] = action.id.empty() ? json(nullptr) : json(action.id);
  return doc;
}

Action action_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string())
    throw std::invalid_argument("action: expected an object with a string 'kind'");
  Action a;
  a.kind = action_kind_from_string(doc["kind"].get<std::string>());
  if (a.kind != ActionKind::terminal) {
    const auto& t = doc.value("target", json());
    if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number_integer())
      throw std::invalid_argument("action: 'target' must be [subnet, host]");
    a.target = {t[0].get<int>(), t[1].get<int>()};
  }
  if (a.kind == ActionKind::exploit || a.kind == ActionKind::privesc) {
    if (!doc.contains("id") || !doc["id"].is_string())
      throw std::invalid_argument("action: exploit and privesc actions need a string 'id'");
    a.id = doc["id"].get<std::string>();
  }
  return a;
}

Action primitive_action(const FeatureSchema& schema, int primitive, HostAddress target) {
  const int n_exploits = static_cast<int>(schema.exploits.size());
  const int n_privescs = static_cast<int>(schema.privescs.size());
  if (primitive < 0 || primitive >= schema.action_dim())
    throw std::out_of_range("primitive index " + std::to_string(primitive) + " outside action_dim " +
                            std::to_string(schema.action_dim()));
  if (primitive < n_exploits) return Action::exploit(target, schema.exploits[static_cast<std::size_t>(primitive)]);
  primitive -= n_exploits;
  if (primitive < n_privescs) return Action::privesc(target, schema.privescs[static_cast<std::size_t>(primitive)]);
  primitive -= n_privescs;
  switch (primitive) {
    case 0: return Action::service_scan(target);
    case 1: return Action::os_scan(target);
    case 2: return Action::subnet_scan(target);
    case 3: return Action::process_scan(target);
    default: return Action::terminal();
  }
}

int primitive_index(const FeatureSchema& schema, const Action& action) {
  const int n_exploits = static_cast<int>(schema.exploits.size());
  const int base = n_exploits + static_cast<int>(schema.privescs.size());
  switch (action.kind) {
    case ActionKind::exploit: return schema.exploit_index(action.id);
    case ActionKind::privesc: {
      const int i = schema.privesc_index(action.id);
      return i < 0 ? -1 : n_exploits + i;
    }
    case ActionKind::service_scan: return base;
    case ActionKind::os_scan: return base + 1;
    case ActionKind::subnet_scan: return base + 2;
    case ActionKind::process_scan: return base + 3;
    case ActionKind::terminal: return base + 4;
  }
  return -1;
}

}  // namespace nasim
