#pragma once

#include "psvgp/kernel.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace psvgp {

// Wire protocol between workers. Frames are length-prefixed, little-endian,
// fields in declaration order, 64-bit floats; see docs/file-formats.md.
inline constexpr std::uint32_t kWireMagic = 0x50535647;  // "GVSP" on the wire
inline constexpr std::uint16_t kWireVersion = 1;

enum class MsgType : std::uint8_t {
  kBatchRequest = 1,
  kBatchReply = 2,
  kDone = 3,
};

// Mini-batch request from partition `from_partition`'s trainer for rows of
// `of_partition`. The row indices are drawn from the requester's stream so
// the result does not depend on scheduling; the owner just slices them.
struct BatchRequest {
  std::uint32_t from_partition = 0;
  std::uint32_t of_partition = 0;
  std::uint32_t batch_size = 0;
  std::uint64_t request_id = 0;
  std::vector<std::uint64_t> indices;
};

struct BatchReply {
  std::uint64_t request_id = 0;
  Mat coords;     // rows x dim
  Vec responses;  // rows
};

struct Done {};

struct Message {
  std::int32_t sender_worker = -1;
  std::variant<BatchRequest, BatchReply, Done> body;

  MsgType type() const {
    if (std::holds_alternative<BatchRequest>(body)) return MsgType::kBatchRequest;
    if (std::holds_alternative<BatchReply>(body)) return MsgType::kBatchReply;
    return MsgType::kDone;
  }
};

// Unique per (sender partition, counter).
inline std::uint64_t make_request_id(std::uint32_t from_partition, std::uint32_t counter) {
  return (static_cast<std::uint64_t>(from_partition) << 32) | counter;
}

// Full frame including the length prefix.
std::vector<std::uint8_t> encode_frame(const Message& msg);

// Incremental decoder for a byte stream; feed() arbitrary chunks, then drain
// complete messages with next().
class FrameDecoder {
public:
  void feed(const std::uint8_t* data, std::size_t len);
  std::optional<Message> next();

private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

// Decode one payload (frame body without the length prefix).
Message decode_payload(const std::uint8_t* data, std::size_t len);

}  // namespace psvgp
