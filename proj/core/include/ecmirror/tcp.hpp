#pragma once

// Blocking TCP transport for the framed protocol. One thread per connection.

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json.hpp>

#include "ecmirror/protocol.hpp"

namespace ecmirror {

// "host:port" -> parts. Throws DomainError.
std::pair<std::string, std::uint16_t> split_address(std::string_view address);

class TcpServer {
 public:
  using Handler = std::function<std::string(std::string_view payload)>;

  // Port 0 picks an ephemeral port; see port().
  TcpServer(Handler handler, const std::string& host, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve(Connection& conn);
  void reap_finished();

  Handler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<Connection> connections_;
};

class TcpClient {
 public:
  // Retries the connection until `connect_timeout_ms` elapses.
  TcpClient(const std::string& host, std::uint16_t port, int connect_timeout_ms = 5000);
  ~TcpClient();
  TcpClient(const TcpClient&) = delete;
  TcpClient& operator=(const TcpClient&) = delete;

  // Sends one frame and waits for one frame. Throws ProtocolError on I/O
  // failure or a closed connection.
  std::string round_trip(std::string_view payload);
  void send_raw(std::string_view bytes);
  std::string read_frame();

  // Wraps type/payload in an envelope with a fresh id, checks the echoed id.
  nlohmann::json request(std::string_view type,
                         nlohmann::json payload = nlohmann::json::object());

 private:
  int fd_ = -1;
  std::int64_t next_id_ = 1;
  FrameDecoder decoder_;
};

}  // namespace ecmirror
