#pragma once

#include "psvgp/message.hpp"
#include "psvgp/rng.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace psvgp {

using WorkerId = int;

// Point-to-point, reliable, per-sender FIFO. send and poll never block; wait
// parks the caller until a message may be available or the timeout elapses.
class Transport {
public:
  virtual ~Transport() = default;
  virtual void send(WorkerId to, const Message& msg) = 0;
  virtual std::vector<Message> poll() = 0;
  virtual bool wait(std::chrono::milliseconds timeout) = 0;
  virtual WorkerId self() const = 0;
};

// Thread-safe send/exit log. Sequence numbers give a global order so tests
// can assert quiescence (no sends after the last exit).
class TransportAudit {
public:
  struct Event {
    std::uint64_t seq = 0;
    bool is_exit = false;
    WorkerId from = -1;
    WorkerId to = -1;
    MsgType type = MsgType::kDone;
  };

  void record_send(WorkerId from, WorkerId to, MsgType type);
  void record_exit(WorkerId worker);

  std::vector<Event> events() const;
  // (from, to, type) -> count
  std::map<std::tuple<int, int, int>, std::uint64_t> send_counts() const;
  std::uint64_t count(MsgType type) const;
  void write_csv(const std::string& path) const;

private:
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 0;
  std::vector<Event> events_;
};

// Scheduling noise for interleaving tests: each delivered message becomes
// visible only after a per-message number of receiver polls drawn from the
// chaos stream. Per-sender FIFO order is preserved.
struct ChaosConfig {
  std::uint64_t seed = 0;
  int max_delay_polls = 0;

  bool enabled() const { return max_delay_polls > 0; }
};

// In-process transport: one mailbox per worker, guarded by a mutex and a
// condition variable. All endpoints share one audit.
class InProcFabric {
public:
  explicit InProcFabric(int n_workers, ChaosConfig chaos = {});
  ~InProcFabric();

  Transport& endpoint(WorkerId r);
  TransportAudit& audit() { return audit_; }
  int size() const { return static_cast<int>(mailboxes_.size()); }

private:
  class Endpoint;
  struct Pending {
    Message msg;
    std::uint64_t release_at_poll = 0;
  };
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Pending> queue;
    std::uint64_t poll_count = 0;
  };

  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  TransportAudit audit_;
  ChaosConfig chaos_;
  std::mutex chaos_mu_;
  Rng chaos_rng_;
};

}  // namespace psvgp
