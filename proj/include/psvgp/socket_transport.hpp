#pragma once

#include "psvgp/message.hpp"
#include "psvgp/transport.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace psvgp {

// TCP loopback transport speaking the length-prefixed wire format. One
// endpoint per worker; a full mesh is established lazily: each endpoint
// connects to every lower rank (retrying until the listener is up) and
// accepts from every higher rank. Works across threads or processes.
class SocketEndpoint : public Transport {
public:
  // ports[r] is rank r's listening port on 127.0.0.1; bind_now binds and
  // listens immediately so peers can start connecting.
  SocketEndpoint(WorkerId rank, std::vector<std::uint16_t> ports, TransportAudit* audit = nullptr,
                 int connect_timeout_ms = 10000);
  ~SocketEndpoint() override;

  SocketEndpoint(const SocketEndpoint&) = delete;
  SocketEndpoint& operator=(const SocketEndpoint&) = delete;

  // Completes the mesh handshake; called automatically on first send/poll.
  void establish();

  void send(WorkerId to, const Message& msg) override;
  std::vector<Message> poll() override;
  bool wait(std::chrono::milliseconds timeout) override;
  WorkerId self() const override { return rank_; }

  std::uint16_t listen_port() const { return ports_[static_cast<std::size_t>(rank_)]; }

private:
  struct Peer;
  void bind_listener();
  void read_available(Peer& peer, std::vector<Message>& out);

  WorkerId rank_;
  std::vector<std::uint16_t> ports_;
  TransportAudit* audit_;
  int connect_timeout_ms_;
  int listen_fd_ = -1;
  bool established_ = false;
  std::vector<std::unique_ptr<Peer>> peers_;
};

// Convenience for single-process multi-worker runs: binds every rank on an
// ephemeral loopback port and hands out the endpoints.
class SocketFabric {
public:
  explicit SocketFabric(int n_workers);

  Transport& endpoint(WorkerId r) { return *endpoints_[static_cast<std::size_t>(r)]; }
  TransportAudit& audit() { return audit_; }
  const std::vector<std::uint16_t>& ports() const { return ports_; }

private:
  TransportAudit audit_;
  std::vector<std::uint16_t> ports_;
  std::vector<std::unique_ptr<SocketEndpoint>> endpoints_;
};

// Next free loopback port as reported by the kernel.
std::uint16_t reserve_ephemeral_port();

}  // namespace psvgp
