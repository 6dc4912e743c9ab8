#include "ecmirror/http_bridge.hpp"

#include <thread>

#include <nlohmann/json.hpp>

#include "ecmirror/errors.hpp"
#include "ecmirror/protocol.hpp"

// After the Eigen-using headers: <resolv.h> defines a `_res` macro.
#include <httplib.h>

namespace ecmirror {

struct HttpBridge::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

HttpBridge::HttpBridge(Handler handler, HttpBridgeConfig cfg) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.Post("/api/frame", [handler](const httplib::Request& req, httplib::Response& res) {
    res.set_content(handler(req.body), "application/json");
  });
  srv.Get("/api/status", [handler](const httplib::Request&, httplib::Response& res) {
    res.set_content(handler(make_request("status", "http-status").dump()), "application/json");
  });
  const int refresh = cfg.refresh_ms;
  srv.Get("/api/config", [refresh](const httplib::Request&, httplib::Response& res) {
    const nlohmann::json body = {{"protocol_version", kProtocolVersion}, {"refresh_ms", refresh}};
    res.set_content(body.dump(), "application/json");
  });
  if (!cfg.ui_dir.empty() && !srv.set_mount_point("/", cfg.ui_dir.string())) {
    throw DomainError("UI directory " + cfg.ui_dir.string() + " does not exist");
  }

  impl_->port = cfg.port == 0 ? srv.bind_to_any_port(cfg.host)
                              : (srv.bind_to_port(cfg.host, cfg.port) ? cfg.port : -1);
  if (impl_->port <= 0) {
    throw ProtocolError("cannot bind HTTP bridge on " + cfg.host + ":" + std::to_string(cfg.port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  srv.wait_until_ready();
}

HttpBridge::~HttpBridge() { stop(); }

std::uint16_t HttpBridge::port() const { return static_cast<std::uint16_t>(impl_->port); }

void HttpBridge::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ecmirror
