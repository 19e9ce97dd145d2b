#include "psvgp/socket_transport.hpp"

#include "psvgp/errors.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

namespace psvgp {

namespace {

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) {
    throw TransportError("fcntl(O_NONBLOCK) failed");
  }
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      pollfd pfd{fd, POLLOUT, 0};
      ::poll(&pfd, 1, 100);
    } else if (n < 0 && errno == EINTR) {
      continue;
    } else {
      throw TransportError(std::string("socket send failed: ") + std::strerror(errno));
    }
  }
}

sockaddr_in loopback(std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  return addr;
}

}  // namespace

struct SocketEndpoint::Peer {
  int fd = -1;
  FrameDecoder decoder;
};

SocketEndpoint::SocketEndpoint(WorkerId rank, std::vector<std::uint16_t> ports,
                               TransportAudit* audit, int connect_timeout_ms)
    : rank_(rank), ports_(std::move(ports)), audit_(audit),
      connect_timeout_ms_(connect_timeout_ms) {
  if (rank_ < 0 || static_cast<std::size_t>(rank_) >= ports_.size()) {
    throw ConfigError("SocketEndpoint: rank outside port table");
  }
  peers_.resize(ports_.size());
  for (auto& p : peers_) p = std::make_unique<Peer>();
  bind_listener();
}

SocketEndpoint::~SocketEndpoint() {
  for (auto& p : peers_) {
    if (p && p->fd >= 0) ::close(p->fd);
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void SocketEndpoint::bind_listener() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = loopback(ports_[static_cast<std::size_t>(rank_)]);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    throw TransportError("bind failed on port " +
                         std::to_string(ports_[static_cast<std::size_t>(rank_)]) + ": " +
                         std::strerror(errno));
  }
  if (ports_[static_cast<std::size_t>(rank_)] == 0) {
    socklen_t len = sizeof(addr);
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    ports_[static_cast<std::size_t>(rank_)] = ntohs(addr.sin_port);
  }
  if (::listen(listen_fd_, static_cast<int>(ports_.size()) + 8) < 0) {
    throw TransportError("listen failed");
  }
}

void SocketEndpoint::establish() {
  if (established_) return;
  const int n = static_cast<int>(ports_.size());

  // Connect to lower ranks, announcing our rank.
  for (int peer = 0; peer < rank_; ++peer) {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(connect_timeout_ms_);
    int fd = -1;
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw TransportError("socket() failed");
      sockaddr_in addr = loopback(ports_[static_cast<std::size_t>(peer)]);
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) break;
      ::close(fd);
      fd = -1;
      if (std::chrono::steady_clock::now() >= deadline) {
        throw TransportError("worker " + std::to_string(rank_) + " could not reach worker " +
                             std::to_string(peer));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    const std::uint32_t hello[2] = {kWireMagic, static_cast<std::uint32_t>(rank_)};
    write_all(fd, reinterpret_cast<const std::uint8_t*>(hello), sizeof(hello));
    set_nodelay(fd);
    set_nonblocking(fd);
    peers_[static_cast<std::size_t>(peer)]->fd = fd;
  }

  // Accept from higher ranks; each announces itself.
  int expected = n - 1 - rank_;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(connect_timeout_ms_);
  while (expected > 0) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc <= 0) {
      if (std::chrono::steady_clock::now() >= deadline) {
        throw TransportError("worker " + std::to_string(rank_) +
                             " timed out waiting for peer connections");
      }
      continue;
    }
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::uint32_t hello[2];
    std::size_t got = 0;
    while (got < sizeof(hello)) {
      const ssize_t r = ::recv(fd, reinterpret_cast<std::uint8_t*>(hello) + got,
                               sizeof(hello) - got, 0);
      if (r <= 0) {
        if (r < 0 && errno == EINTR) continue;
        throw TransportError("handshake read failed");
      }
      got += static_cast<std::size_t>(r);
    }
    if (hello[0] != kWireMagic) throw TransportError("handshake: bad magic");
    const auto peer = static_cast<int>(hello[1]);
    if (peer <= rank_ || peer >= n) throw TransportError("handshake: bad peer rank");
    set_nodelay(fd);
    set_nonblocking(fd);
    peers_[static_cast<std::size_t>(peer)]->fd = fd;
    --expected;
  }
  established_ = true;
}

void SocketEndpoint::send(WorkerId to, const Message& msg) {
  establish();
  if (to < 0 || static_cast<std::size_t>(to) >= peers_.size() || to == rank_) {
    throw TransportError("send to invalid worker " + std::to_string(to));
  }
  Message m = msg;
  m.sender_worker = rank_;
  const std::vector<std::uint8_t> frame = encode_frame(m);
  write_all(peers_[static_cast<std::size_t>(to)]->fd, frame.data(), frame.size());
  if (audit_) audit_->record_send(rank_, to, msg.type());
}

void SocketEndpoint::read_available(Peer& peer, std::vector<Message>& out) {
  std::uint8_t buf[65536];
  for (;;) {
    const ssize_t n = ::recv(peer.fd, buf, sizeof(buf), 0);
    if (n > 0) {
      peer.decoder.feed(buf, static_cast<std::size_t>(n));
      if (n < static_cast<ssize_t>(sizeof(buf))) break;
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      break;
    } else if (n < 0 && errno == EINTR) {
      continue;
    } else if (n == 0) {
      break;  // peer closed; leftover frames already buffered
    } else {
      throw TransportError(std::string("socket recv failed: ") + std::strerror(errno));
    }
  }
  while (auto msg = peer.decoder.next()) out.push_back(std::move(*msg));
}

std::vector<Message> SocketEndpoint::poll() {
  establish();
  std::vector<Message> out;
  for (auto& peer : peers_) {
    if (peer->fd >= 0) read_available(*peer, out);
  }
  return out;
}

bool SocketEndpoint::wait(std::chrono::milliseconds timeout) {
  establish();
  std::vector<pollfd> fds;
  for (const auto& peer : peers_) {
    if (peer->fd >= 0) fds.push_back(pollfd{peer->fd, POLLIN, 0});
  }
  if (fds.empty()) return false;
  return ::poll(fds.data(), fds.size(), static_cast<int>(timeout.count())) > 0;
}

std::uint16_t reserve_ephemeral_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("socket() failed");
  sockaddr_in addr = loopback(0);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw TransportError("bind failed while reserving a port");
  }
  socklen_t len = sizeof(addr);
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const std::uint16_t port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

SocketFabric::SocketFabric(int n_workers) {
  if (n_workers < 1) throw ConfigError("SocketFabric: need at least one worker");
  ports_.assign(static_cast<std::size_t>(n_workers), 0);
  endpoints_.resize(static_cast<std::size_t>(n_workers));
  // Bind in rank order: endpoint r only ever dials ranks below r, whose
  // ports are final by the time r's table is copied.
  for (int r = 0; r < n_workers; ++r) {
    endpoints_[static_cast<std::size_t>(r)] =
        std::make_unique<SocketEndpoint>(r, ports_, &audit_);
    ports_[static_cast<std::size_t>(r)] = endpoints_[static_cast<std::size_t>(r)]->listen_port();
  }
}

}  // namespace psvgp
