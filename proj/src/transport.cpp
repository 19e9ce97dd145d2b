#include "psvgp/transport.hpp"

#include "psvgp/errors.hpp"

#include <fstream>

namespace psvgp {

void TransportAudit::record_send(WorkerId from, WorkerId to, MsgType type) {
  std::lock_guard<std::mutex> lock(mu_);
  events_.push_back(Event{next_seq_++, false, from, to, type});
}

void TransportAudit::record_exit(WorkerId worker) {
  std::lock_guard<std::mutex> lock(mu_);
  events_.push_back(Event{next_seq_++, true, worker, -1, MsgType::kDone});
}

std::vector<TransportAudit::Event> TransportAudit::events() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_;
}

std::map<std::tuple<int, int, int>, std::uint64_t> TransportAudit::send_counts() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::map<std::tuple<int, int, int>, std::uint64_t> counts;
  for (const Event& e : events_) {
    if (!e.is_exit) counts[{e.from, e.to, static_cast<int>(e.type)}] += 1;
  }
  return counts;
}

std::uint64_t TransportAudit::count(MsgType type) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::uint64_t n = 0;
  for (const Event& e : events_) {
    if (!e.is_exit && e.type == type) ++n;
  }
  return n;
}

void TransportAudit::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "from_worker,to_worker,type,count\n";
  for (const auto& [key, count] : send_counts()) {
    const auto& [from, to, type] = key;
    const char* name = type == 1 ? "batch_request" : (type == 2 ? "batch_reply" : "done");
    out << from << ',' << to << ',' << name << ',' << count << '\n';
  }
}

class InProcFabric::Endpoint : public Transport {
public:
  Endpoint(InProcFabric& fabric, WorkerId self) : fabric_(fabric), self_(self) {}

  void send(WorkerId to, const Message& msg) override {
    if (to < 0 || to >= fabric_.size()) {
      throw TransportError("send to unknown worker " + std::to_string(to));
    }
    Mailbox& box = *fabric_.mailboxes_[static_cast<std::size_t>(to)];
    Message m = msg;
    m.sender_worker = self_;
    {
      std::lock_guard<std::mutex> lock(box.mu);
      std::uint64_t release = box.poll_count;
      if (fabric_.chaos_.enabled()) {
        std::lock_guard<std::mutex> chaos_lock(fabric_.chaos_mu_);
        release += fabric_.chaos_rng_.uniform_below(
            static_cast<std::uint64_t>(fabric_.chaos_.max_delay_polls) + 1);
      }
      // FIFO per sender: never release before an earlier message from us.
      for (auto it = box.queue.rbegin(); it != box.queue.rend(); ++it) {
        if (it->msg.sender_worker == self_) {
          release = std::max(release, it->release_at_poll);
          break;
        }
      }
      box.queue.push_back(Pending{std::move(m), release});
    }
    box.cv.notify_all();
    fabric_.audit_.record_send(self_, to, msg.type());
  }

  std::vector<Message> poll() override {
    Mailbox& box = *fabric_.mailboxes_[static_cast<std::size_t>(self_)];
    std::vector<Message> out;
    std::lock_guard<std::mutex> lock(box.mu);
    box.poll_count += 1;
    for (auto it = box.queue.begin(); it != box.queue.end();) {
      if (it->release_at_poll <= box.poll_count) {
        out.push_back(std::move(it->msg));
        it = box.queue.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

  bool wait(std::chrono::milliseconds timeout) override {
    Mailbox& box = *fabric_.mailboxes_[static_cast<std::size_t>(self_)];
    std::unique_lock<std::mutex> lock(box.mu);
    if (!box.queue.empty()) return true;
    return box.cv.wait_for(lock, timeout, [&] { return !box.queue.empty(); });
  }

  WorkerId self() const override { return self_; }

private:
  InProcFabric& fabric_;
  WorkerId self_;
};

InProcFabric::InProcFabric(int n_workers, ChaosConfig chaos)
    : chaos_(chaos), chaos_rng_(chaos.seed) {
  if (n_workers < 1) throw ConfigError("InProcFabric: need at least one worker");
  mailboxes_.reserve(static_cast<std::size_t>(n_workers));
  endpoints_.reserve(static_cast<std::size_t>(n_workers));
  for (int r = 0; r < n_workers; ++r) {
    mailboxes_.push_back(std::make_unique<Mailbox>());
    endpoints_.push_back(std::make_unique<Endpoint>(*this, r));
  }
}

InProcFabric::~InProcFabric() = default;

Transport& InProcFabric::endpoint(WorkerId r) {
  if (r < 0 || r >= size()) throw ConfigError("InProcFabric: bad worker id");
  return *endpoints_[static_cast<std::size_t>(r)];
}

}  // namespace psvgp
