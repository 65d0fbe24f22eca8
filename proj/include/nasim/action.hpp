#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "nasim/instancer.hpp"
#include "nasim/scenario.hpp"

namespace nasim {

enum class ActionKind : std::uint8_t {
  exploit,
  privesc,
  service_scan,
  os_scan,
  subnet_scan,
  process_scan,
  terminal,
};

std::string_view to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view text);

/// `id` names the exploit or privesc for those kinds and is empty otherwise.
/// `target` is ignored for terminal actions.
struct Action {
  ActionKind kind = ActionKind::terminal;
  HostAddress target;
  std::string id;

  static Action terminal() { return {}; }
  static Action exploit(HostAddress t, std::string exploit_id) { return {ActionKind::exploit, t, std::move(exploit_id)}; }
  static Action privesc(HostAddress t, std::string privesc_id) { return {ActionKind::privesc, t, std::move(privesc_id)}; }
  static Action service_scan(HostAddress t) { return {ActionKind::service_scan, t, {}}; }
  static Action os_scan(HostAddress t) { return {ActionKind::os_scan, t, {}}; }
  static Action subnet_scan(HostAddress t) { return {ActionKind::subnet_scan, t, {}}; }
  static Action process_scan(HostAddress t) { return {ActionKind::process_scan, t, {}}; }

  friend bool operator==(const Action&, const Action&) = default;
};

std::string describe(const Action& action);

nlohmann::json action_to_json(const Action& action);
Action action_from_json(const nlohmann::json& doc);

// Per-host primitive layout under a FeatureSchema:
//   [exploits (schema order)] [privescs (schema order)]
//   ServiceScan, OSScan, SubnetScan, ProcessScan, Terminal
Action primitive_action(const FeatureSchema& schema, int primitive, HostAddress target);
int primitive_index(const FeatureSchema& schema, const Action& action);

}  // namespace nasim
