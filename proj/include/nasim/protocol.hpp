#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "nasim/observation.hpp"
#include "nasim/vecenv.hpp"

namespace nasim {

/// Line-delimited JSON remote-env protocol. Each request is one JSON object per
/// line with an "op" of hello, reset, step or close; each gets exactly one
/// response line. Responses carry "ok"; failures carry
/// {"ok": false, "error": {"code", "message"}} and leave the session usable.
inline constexpr std::string_view kProtocolVersion = "nasimemu-like/1";

nlohmann::json observation_to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& doc);

nlohmann::json schema_to_json(const FeatureSchema& schema);

class RemoteEnvServer {
 public:
  explicit RemoteEnvServer(VecEnvConfig config);

  /// Handles one request line and returns the response object.
  nlohmann::json handle(std::string_view line);
  bool closed() const { return closed_; }

  /// Reads requests until EOF or close; one response line per request.
  void serve(std::istream& in, std::ostream& out);

 private:
  nlohmann::json dispatch(const nlohmann::json& req);
  nlohmann::json step_response(const nlohmann::json& req);

  VecEnv env_;
  bool started_ = false;
  bool closed_ = false;
};

}  // namespace nasim
