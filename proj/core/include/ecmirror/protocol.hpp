#pragma once

// Wire format: 4-byte big-endian payload length, then a JSON object
//   {"type": ..., "version": 1, "id": <echoed>, "payload": {...}}
// Request types: register, push_update, pull_model, status, report, command.
// Response types: ack, model, status, error.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ecmirror/federation.hpp"

namespace ecmirror {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 4;
inline constexpr std::size_t kMaxFrameBytes = std::size_t{16} << 20;

// Throws ProtocolError when the payload exceeds kMaxFrameBytes.
std::string encode_frame(std::string_view payload);

// Incremental frame splitter for a byte stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_frame = kMaxFrameBytes) : max_frame_(max_frame) {}

  void feed(std::string_view bytes) { buffer_.append(bytes); }
  // Next complete payload, if any. Throws ProtocolError on an oversized
  // length prefix; the stream cannot be resynchronized after that.
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::size_t max_frame_;
  std::string buffer_;
};

// Schema hashes travel as 16-digit hex strings so browsers keep all 64 bits.
std::string schema_to_hex(std::uint64_t schema);
std::uint64_t schema_from_hex(std::string_view text);  // throws ProtocolError

nlohmann::json to_json(const ParamVector& params);
ParamVector params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NodeUpdate& update);
NodeUpdate update_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProvenanceEntry& entry);
ProvenanceEntry provenance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FederationConfig& cfg);
FederationConfig federation_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GlobalModel& model);
GlobalModel global_model_from_json(const nlohmann::json& j);

nlohmann::json make_request(std::string_view type, nlohmann::json id, nlohmann::json payload = nlohmann::json::object());
nlohmann::json make_response(std::string_view type, const nlohmann::json& id, nlohmann::json payload);
nlohmann::json make_error(const nlohmann::json& id, std::string_view code, std::string_view message);

}  // namespace ecmirror
