#pragma once

#include "psvgp/trainer.hpp"
#include "psvgp/transport.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace psvgp {

// Static partition-to-worker map. Contiguous blocks of row-major ids; when
// the counts divide evenly every worker owns N_part / N_proc partitions.
struct WorkerAssignment {
  int n_workers = 1;
  std::vector<int> owner;              // partition id -> worker
  std::vector<std::vector<int>> owned; // worker -> ascending partition ids

  static WorkerAssignment contiguous(int n_partitions, int n_workers);

  // Workers owning any partition adjacent to one of `rank`'s partitions.
  // By symmetry this is both who rank may request from and who may request
  // from rank, so it is exactly the Done hand-shake set.
  std::vector<int> peer_workers(int rank, const NeighborGraph& graph) const;
};

struct WorkerStats {
  std::uint64_t batch_requests_sent = 0;
  std::uint64_t batch_replies_sent = 0;
  std::uint64_t local_batches = 0;
  long skipped_steps = 0;
};

struct RunHooks {
  // Test instrumentation, called after each completed iteration sweep.
  std::function<void(int worker, long iteration)> after_iteration;
  // Optional bound-estimate stream: (partition, iteration, estimate).
  std::function<void(int partition, long iteration, double value)> on_step_value;
};

// Serve one inbound message against the data this worker owns. BatchRequests
// for owned partitions yield a reply with the requested rows; requests for
// unowned partitions are a routing error; anything else yields no reply.
std::optional<Message> service_inbound(const std::vector<PartitionData>& data,
                                       const WorkerAssignment& assign, int self_rank,
                                       const Message& msg);

// One worker's whole lifecycle: round-robin SGD over its owned partitions,
// servicing inbound requests while it waits on remote batches, then the
// decentralized completion protocol (announce Done to peers, keep serving
// until every peer is Done).
class Worker {
public:
  Worker(int rank, const WorkerAssignment& assign, const std::vector<PartitionData>& data,
         const NeighborGraph& graph, const GridLayout& layout, const TrainOptions& opt,
         Transport& transport, long watchdog_ms = 30000, RunHooks hooks = {});

  void run();

  std::vector<std::pair<int, VariationalState>> take_results();
  const WorkerStats& stats() const { return stats_; }

private:
  void handle(const Message& msg);
  BatchReply await_reply(std::uint64_t request_id);
  void drain_inbox();

  int rank_;
  const WorkerAssignment& assign_;
  const std::vector<PartitionData>& data_;
  const NeighborGraph& graph_;
  const GridLayout& layout_;
  TrainOptions opt_;
  Transport& transport_;
  long watchdog_ms_;
  RunHooks hooks_;

  std::vector<std::pair<int, PartitionTrainer>> trainers_;
  std::vector<int> peers_;
  std::size_t dones_received_ = 0;
  std::optional<std::uint64_t> pending_request_;
  std::optional<BatchReply> pending_reply_;
  std::uint32_t request_counter_ = 0;
  WorkerStats stats_;
};

struct TrainOutcome {
  std::vector<std::optional<VariationalState>> models;  // by partition id
  std::vector<WorkerStats> worker_stats;
  double train_seconds = 0.0;
};

// Spawns one thread per worker over the given endpoints and joins them.
// Every stochastic choice is driven by per-partition streams, so the result
// is bitwise independent of the worker count and of message interleaving.
TrainOutcome run_training(const std::vector<PartitionData>& data, const NeighborGraph& graph,
                          const GridLayout& layout, const TrainOptions& opt,
                          const WorkerAssignment& assign,
                          const std::function<Transport&(int)>& endpoint_of,
                          long watchdog_ms = 30000, const RunHooks& hooks = {},
                          TransportAudit* audit = nullptr);

}  // namespace psvgp
