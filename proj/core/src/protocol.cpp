#include "ecmirror/protocol.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "ecmirror/errors.hpp"

namespace ecmirror {

using nlohmann::json;

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame payload too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(kFrameHeaderBytes + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < kFrameHeaderBytes) return std::nullopt;
  const auto byte = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i]));
  };
  const std::size_t n = (byte(0) << 24) | (byte(1) << 16) | (byte(2) << 8) | byte(3);
  if (n > max_frame_) {
    throw ProtocolError("frame length " + std::to_string(n) + " exceeds limit " +
                        std::to_string(max_frame_));
  }
  if (buffer_.size() < kFrameHeaderBytes + n) return std::nullopt;
  std::string payload = buffer_.substr(kFrameHeaderBytes, n);
  buffer_.erase(0, kFrameHeaderBytes + n);
  return payload;
}

std::string schema_to_hex(std::uint64_t schema) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(schema));
  return buf;
}

std::uint64_t schema_from_hex(std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v, 16);
  if (text.size() != 16 || ec != std::errc{} || p != end) {
    throw ProtocolError("bad schema hash '" + std::string(text) + "'");
  }
  return v;
}

namespace {

const json& field(const json& j, const char* name) {
  if (!j.is_object()) throw ProtocolError("expected an object");
  auto it = j.find(name);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + name + "'");
  return *it;
}

double number(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number()) throw ProtocolError(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

std::uint64_t count(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_unsigned()) {
    throw ProtocolError(std::string("field '") + name + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

json to_json(const ParamVector& params) {
  return {{"schema", schema_to_hex(params.schema)}, {"values", params.values}};
}

ParamVector params_from_json(const json& j) {
  ParamVector p;
  p.schema = schema_from_hex(text(j, "schema"));
  const json& values = field(j, "values");
  if (!values.is_array()) throw ProtocolError("'values' must be an array");
  p.values.reserve(values.size());
  for (const auto& v : values) {
    if (!v.is_number()) throw ProtocolError("'values' must hold numbers");
    p.values.push_back(v.get<double>());
  }
  return p;
}

json to_json(const NodeUpdate& u) {
  return {{"node_id", u.node_id},         {"params", to_json(u.params)},
          {"usage_count", u.usage_count}, {"staleness", u.staleness},
          {"mean_error", u.mean_error}};
}

NodeUpdate update_from_json(const json& j) {
  NodeUpdate u;
  u.node_id = text(j, "node_id");
  u.params = params_from_json(field(j, "params"));
  u.usage_count = count(j, "usage_count");
  u.staleness = j.contains("staleness") ? count(j, "staleness") : 0;
  u.mean_error = number(j, "mean_error");
  return u;
}

json to_json(const ProvenanceEntry& e) {
  return {{"node_id", e.node_id},   {"weight", e.weight},
          {"usage_count", e.usage_count}, {"staleness", e.staleness},
          {"mean_error", e.mean_error}};
}

ProvenanceEntry provenance_from_json(const json& j) {
  return {text(j, "node_id"), number(j, "weight"), count(j, "usage_count"), count(j, "staleness"),
          number(j, "mean_error")};
}

json to_json(const FederationConfig& cfg) {
  return {{"decay", cfg.decay}, {"correction", cfg.correction}, {"quorum", cfg.quorum}};
}

FederationConfig federation_config_from_json(const json& j) {
  FederationConfig cfg;
  cfg.decay = number(j, "decay");
  cfg.correction = number(j, "correction");
  cfg.quorum = count(j, "quorum");
  return cfg;
}

json to_json(const GlobalModel& m) {
  json prov = json::array();
  for (const auto& e : m.provenance) prov.push_back(to_json(e));
  return {{"version", m.version},
          {"created_at_ms", m.created_at_ms},
          {"params", to_json(m.params)},
          {"provenance", std::move(prov)},
          {"correction", std::string(to_string(m.correction))},
          {"config", to_json(m.config)}};
}

GlobalModel global_model_from_json(const json& j) {
  GlobalModel m;
  m.version = count(j, "version");
  const json& ts = field(j, "created_at_ms");
  if (!ts.is_number_integer()) throw ProtocolError("'created_at_ms' must be an integer");
  m.created_at_ms = ts.get<std::int64_t>();
  m.params = params_from_json(field(j, "params"));
  const json& prov = field(j, "provenance");
  if (!prov.is_array()) throw ProtocolError("'provenance' must be an array");
  for (const auto& e : prov) m.provenance.push_back(provenance_from_json(e));
  try {
    m.correction = correction_outcome_from_string(text(j, "correction"));
  } catch (const DomainError& e) {
    throw ProtocolError(e.what());
  }
  m.config = federation_config_from_json(field(j, "config"));
  return m;
}

json make_request(std::string_view type, json id, json payload) {
  return {{"type", type}, {"version", kProtocolVersion}, {"id", std::move(id)},
          {"payload", std::move(payload)}};
}

json make_response(std::string_view type, const json& id, json payload) {
  return {{"type", type}, {"version", kProtocolVersion}, {"id", id},
          {"payload", std::move(payload)}};
}

json make_error(const json& id, std::string_view code, std::string_view message) {
  return make_response("error", id, {{"code", code}, {"message", message}});
}

}  // namespace ecmirror
