#pragma once

// Browser-facing bridge: the same JSON envelopes as the framed TCP protocol,
// carried over plain HTTP.
//
//   POST /api/frame   body = request envelope, response = reply envelope
//   GET  /api/status  status envelope
//   GET  /api/config  {"protocol_version", "refresh_ms"}
//   GET  /*           static files from the UI directory, if configured

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace ecmirror {

struct HttpBridgeConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0: ephemeral
  std::filesystem::path ui_dir;
  int refresh_ms = 1000;
};

class HttpBridge {
 public:
  using Handler = std::function<std::string(std::string_view payload)>;

  // Starts serving on a background thread. Throws ProtocolError if the port
  // cannot be bound.
  HttpBridge(Handler handler, HttpBridgeConfig cfg);
  ~HttpBridge();
  HttpBridge(const HttpBridge&) = delete;
  HttpBridge& operator=(const HttpBridge&) = delete;

  std::uint16_t port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ecmirror
