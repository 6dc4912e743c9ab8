#include "ecmirror/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "ecmirror/errors.hpp"

namespace ecmirror {

namespace {

bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw DomainError("cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

std::pair<std::string, std::uint16_t> split_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) {
    throw DomainError("address '" + std::string(address) + "' must be host:port");
  }
  const std::string port_text(address.substr(colon + 1));
  char* end = nullptr;
  const long port = std::strtol(port_text.c_str(), &end, 10);
  if (port_text.empty() || *end != '\0' || port < 0 || port > 65535) {
    throw DomainError("bad port in address '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

TcpServer::TcpServer(Handler handler, const std::string& host, std::uint16_t port)
    : handler_(std::move(handler)) {
  const sockaddr_in addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ProtocolError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw ProtocolError("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  accept_thread_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  ::close(listen_fd_);
  std::lock_guard lock(mu_);
  for (auto& c : connections_) ::shutdown(c.fd, SHUT_RDWR);
  for (auto& c : connections_) {
    if (c.thread.joinable()) c.thread.join();
    ::close(c.fd);
  }
  connections_.clear();
}

void TcpServer::reap_finished() {
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (it->done.load()) {
      if (it->thread.joinable()) it->thread.join();
      ::close(it->fd);
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

void TcpServer::accept_loop() {
  while (!stopping_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    if (stopping_.load()) {
      ::close(fd);
      return;
    }
    reap_finished();
    Connection& conn = connections_.emplace_back();
    conn.fd = fd;
    conn.thread = std::thread([this, &conn] { serve(conn); });
  }
}

void TcpServer::serve(Connection& conn) {
  FrameDecoder decoder;
  char buf[64 * 1024];
  for (;;) {
    const ssize_t n = ::recv(conn.fd, buf, sizeof buf, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    try {
      bool ok = true;
      while (auto payload = decoder.next()) {
        if (!write_all(conn.fd, encode_frame(handler_(*payload)))) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    } catch (const ProtocolError& e) {
      // Unrecoverable framing: answer once, then hang up.
      write_all(conn.fd, encode_frame(make_error(nullptr, "bad_frame", e.what()).dump()));
      ::shutdown(conn.fd, SHUT_RDWR);
      break;
    }
  }
  conn.done.store(true);
}

TcpClient::TcpClient(const std::string& host, std::uint16_t port, int connect_timeout_ms) {
  const sockaddr_in addr = resolve(host, port);
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(connect_timeout_ms);
  for (;;) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError(std::string("socket: ") + std::strerror(errno));
    if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) break;
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    if (std::chrono::steady_clock::now() >= deadline) {
      throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port) + ": " + err);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpClient::~TcpClient() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpClient::send_raw(std::string_view bytes) {
  if (!write_all(fd_, bytes)) throw ProtocolError(std::string("send: ") + std::strerror(errno));
}

std::string TcpClient::read_frame() {
  char buf[64 * 1024];
  for (;;) {
    if (auto payload = decoder_.next()) return *payload;
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n == 0) throw ProtocolError("connection closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("recv: ") + std::strerror(errno));
    }
    decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

std::string TcpClient::round_trip(std::string_view payload) {
  send_raw(encode_frame(payload));
  return read_frame();
}

nlohmann::json TcpClient::request(std::string_view type, nlohmann::json payload) {
  const std::int64_t id = next_id_++;
  const std::string reply = round_trip(make_request(type, id, std::move(payload)).dump());
  nlohmann::json j = nlohmann::json::parse(reply, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("unparsable response");
  if (j.value("id", nlohmann::json()) != nlohmann::json(id)) {
    throw ProtocolError("response id does not match request " + std::to_string(id));
  }
  return j;
}

}  // namespace ecmirror
