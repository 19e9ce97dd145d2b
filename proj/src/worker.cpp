#include "psvgp/worker.hpp"

#include "psvgp/errors.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

namespace psvgp {

WorkerAssignment WorkerAssignment::contiguous(int n_partitions, int n_workers) {
  if (n_workers < 1 || n_partitions < 1) {
    throw ConfigError("WorkerAssignment: need at least one worker and one partition");
  }
  WorkerAssignment assign;
  assign.n_workers = n_workers;
  assign.owner.resize(static_cast<std::size_t>(n_partitions));
  assign.owned.resize(static_cast<std::size_t>(n_workers));
  const int base = n_partitions / n_workers;
  const int rem = n_partitions % n_workers;
  int next = 0;
  for (int r = 0; r < n_workers; ++r) {
    const int take = base + (r < rem ? 1 : 0);
    for (int i = 0; i < take; ++i, ++next) {
      assign.owner[static_cast<std::size_t>(next)] = r;
      assign.owned[static_cast<std::size_t>(r)].push_back(next);
    }
  }
  return assign;
}

std::vector<int> WorkerAssignment::peer_workers(int rank, const NeighborGraph& graph) const {
  std::set<int> peers;
  for (int j : owned[static_cast<std::size_t>(rank)]) {
    for (int k : graph.adjacency[static_cast<std::size_t>(j)]) {
      const int w = owner[static_cast<std::size_t>(k)];
      if (w != rank) peers.insert(w);
    }
  }
  return {peers.begin(), peers.end()};
}

std::optional<Message> service_inbound(const std::vector<PartitionData>& data,
                                       const WorkerAssignment& assign, int self_rank,
                                       const Message& msg) {
  const auto* req = std::get_if<BatchRequest>(&msg.body);
  if (!req) return std::nullopt;
  const auto pid = static_cast<std::size_t>(req->of_partition);
  if (pid >= data.size() || assign.owner[pid] != self_rank) {
    throw ProtocolError("worker " + std::to_string(self_rank) +
                        ": batch request for unowned partition " + std::to_string(req->of_partition));
  }
  const PartitionData& part = data[pid];
  BatchReply reply;
  reply.request_id = req->request_id;
  reply.coords.resize(static_cast<Eigen::Index>(req->indices.size()), part.coords.cols());
  reply.responses.resize(static_cast<Eigen::Index>(req->indices.size()));
  for (std::size_t i = 0; i < req->indices.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(req->indices[i]);
    if (row < 0 || row >= part.count()) {
      throw ProtocolError("batch request index out of range for partition " +
                          std::to_string(req->of_partition));
    }
    reply.coords.row(static_cast<Eigen::Index>(i)) = part.coords.row(row);
    reply.responses[static_cast<Eigen::Index>(i)] = part.responses[row];
  }
  Message out;
  out.sender_worker = self_rank;
  out.body = std::move(reply);
  return out;
}

Worker::Worker(int rank, const WorkerAssignment& assign, const std::vector<PartitionData>& data,
               const NeighborGraph& graph, const GridLayout& layout, const TrainOptions& opt,
               Transport& transport, long watchdog_ms, RunHooks hooks)
    : rank_(rank), assign_(assign), data_(data), graph_(graph), layout_(layout), opt_(opt),
      transport_(transport), watchdog_ms_(watchdog_ms), hooks_(std::move(hooks)) {
  for (int j : assign_.owned[static_cast<std::size_t>(rank_)]) {
    if (data_[static_cast<std::size_t>(j)].count() > 0) {
      trainers_.emplace_back(j, PartitionTrainer(data_[static_cast<std::size_t>(j)], graph_,
                                                 layout_, opt_));
    }
  }
  peers_ = assign_.peer_workers(rank_, graph_);
}

void Worker::handle(const Message& msg) {
  switch (msg.type()) {
    case MsgType::kBatchRequest: {
      auto reply = service_inbound(data_, assign_, rank_, msg);
      transport_.send(msg.sender_worker, *reply);
      stats_.batch_replies_sent += 1;
      break;
    }
    case MsgType::kBatchReply: {
      const auto& rep = std::get<BatchReply>(msg.body);
      if (!pending_request_ || rep.request_id != *pending_request_) {
        throw ProtocolError("worker " + std::to_string(rank_) + ": unmatched reply id " +
                            std::to_string(rep.request_id));
      }
      pending_reply_ = rep;
      pending_request_.reset();
      break;
    }
    case MsgType::kDone:
      dones_received_ += 1;
      break;
  }
}

void Worker::drain_inbox() {
  for (const Message& msg : transport_.poll()) handle(msg);
}

BatchReply Worker::await_reply(std::uint64_t request_id) {
  const auto start = std::chrono::steady_clock::now();
  auto last_progress = start;
  while (true) {
    drain_inbox();
    if (pending_reply_) {
      BatchReply reply = std::move(*pending_reply_);
      pending_reply_.reset();
      if (reply.request_id != request_id) {
        throw ProtocolError("worker " + std::to_string(rank_) + ": unmatched reply id");
      }
      return reply;
    }
    if (transport_.wait(std::chrono::milliseconds(10))) {
      last_progress = std::chrono::steady_clock::now();
      continue;
    }
    const auto now = std::chrono::steady_clock::now();
    if (std::chrono::duration_cast<std::chrono::milliseconds>(now - last_progress).count() >
        watchdog_ms_) {
      std::ostringstream oss;
      oss << "worker " << rank_ << " stalled waiting for reply " << request_id
          << " (peers done: " << dones_received_ << "/" << peers_.size() << ")";
      throw TransportError(oss.str());
    }
  }
}

void Worker::run() {
  for (long it = 0; it < opt_.iterations; ++it) {
    for (auto& [j, trainer] : trainers_) {
      drain_inbox();
      const PartitionTrainer::StepPlan plan = trainer.plan_step();
      Mat coords;
      Vec responses;
      const int owner = assign_.owner[static_cast<std::size_t>(plan.source)];
      if (owner == rank_) {
        const PartitionData& src = data_[static_cast<std::size_t>(plan.source)];
        coords.resize(static_cast<Eigen::Index>(plan.indices.size()), src.coords.cols());
        responses.resize(static_cast<Eigen::Index>(plan.indices.size()));
        for (std::size_t i = 0; i < plan.indices.size(); ++i) {
          coords.row(static_cast<Eigen::Index>(i)) =
              src.coords.row(static_cast<Eigen::Index>(plan.indices[i]));
          responses[static_cast<Eigen::Index>(i)] =
              src.responses[static_cast<Eigen::Index>(plan.indices[i])];
        }
        stats_.local_batches += 1;
      } else {
        BatchRequest req;
        req.from_partition = static_cast<std::uint32_t>(j);
        req.of_partition = static_cast<std::uint32_t>(plan.source);
        req.batch_size = static_cast<std::uint32_t>(opt_.batch_size);
        req.request_id = make_request_id(static_cast<std::uint32_t>(j), ++request_counter_);
        req.indices = plan.indices;
        Message msg;
        msg.sender_worker = rank_;
        msg.body = std::move(req);
        pending_request_ = std::get<BatchRequest>(msg.body).request_id;
        transport_.send(owner, msg);
        stats_.batch_requests_sent += 1;
        BatchReply reply = await_reply(*std::get_if<BatchRequest>(&msg.body)
                                            ? std::get<BatchRequest>(msg.body).request_id
                                            : 0);
        coords = std::move(reply.coords);
        responses = std::move(reply.responses);
      }
      const double value = trainer.apply_step(coords, responses);
      if (hooks_.on_step_value) hooks_.on_step_value(j, it, value);
    }
    if (hooks_.after_iteration) hooks_.after_iteration(rank_, it);
  }

  for (int peer : peers_) {
    Message done;
    done.sender_worker = rank_;
    done.body = Done{};
    transport_.send(peer, done);
  }

  // Keep serving neighbors until everyone that might still request from us
  // has finished.
  const auto start = std::chrono::steady_clock::now();
  auto last_progress = start;
  while (dones_received_ < peers_.size()) {
    drain_inbox();
    if (dones_received_ >= peers_.size()) break;
    if (transport_.wait(std::chrono::milliseconds(10))) {
      last_progress = std::chrono::steady_clock::now();
      continue;
    }
    const auto now = std::chrono::steady_clock::now();
    if (std::chrono::duration_cast<std::chrono::milliseconds>(now - last_progress).count() >
        watchdog_ms_) {
      std::ostringstream oss;
      oss << "worker " << rank_ << " stalled in termination (peers done: " << dones_received_
          << "/" << peers_.size() << ")";
      throw TransportError(oss.str());
    }
  }

  for (const auto& [j, trainer] : trainers_) stats_.skipped_steps += trainer.skipped_steps();
}

std::vector<std::pair<int, VariationalState>> Worker::take_results() {
  std::vector<std::pair<int, VariationalState>> out;
  out.reserve(trainers_.size());
  for (auto& [j, trainer] : trainers_) out.emplace_back(j, trainer.state());
  return out;
}

TrainOutcome run_training(const std::vector<PartitionData>& data, const NeighborGraph& graph,
                          const GridLayout& layout, const TrainOptions& opt,
                          const WorkerAssignment& assign,
                          const std::function<Transport&(int)>& endpoint_of, long watchdog_ms,
                          const RunHooks& hooks, TransportAudit* audit) {
  TrainOutcome outcome;
  outcome.models.resize(data.size());
  outcome.worker_stats.resize(static_cast<std::size_t>(assign.n_workers));

  std::vector<std::unique_ptr<Worker>> workers(static_cast<std::size_t>(assign.n_workers));
  for (int r = 0; r < assign.n_workers; ++r) {
    workers[static_cast<std::size_t>(r)] = std::make_unique<Worker>(
        r, assign, data, graph, layout, opt, endpoint_of(r), watchdog_ms, hooks);
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(assign.n_workers));
  for (int r = 0; r < assign.n_workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        workers[static_cast<std::size_t>(r)]->run();
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
      if (audit) audit->record_exit(r);
    });
  }
  for (auto& t : threads) t.join();
  const auto t1 = std::chrono::steady_clock::now();
  outcome.train_seconds = std::chrono::duration<double>(t1 - t0).count();

  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (errors[r]) std::rethrow_exception(errors[r]);
  }
  for (int r = 0; r < assign.n_workers; ++r) {
    outcome.worker_stats[static_cast<std::size_t>(r)] = workers[static_cast<std::size_t>(r)]->stats();
    for (auto& [j, phi] : workers[static_cast<std::size_t>(r)]->take_results()) {
      outcome.models[static_cast<std::size_t>(j)] = std::move(phi);
    }
  }
  return outcome;
}

}  // namespace psvgp
