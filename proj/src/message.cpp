#include "psvgp/message.hpp"

#include "psvgp/errors.hpp"

#include <bit>
#include <cstring>

static_assert(std::endian::native == std::endian::little,
              "wire format assumes a little-endian host");

namespace psvgp {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_f64(std::vector<std::uint8_t>& out, const double* data, std::size_t n) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + n * sizeof(double));
}

class Reader {
public:
  Reader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > len_) throw ProtocolError("wire: truncated message");
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void get_f64(double* out, std::size_t n) {
    if (pos_ + n * sizeof(double) > len_) throw ProtocolError("wire: truncated message");
    std::memcpy(out, data_ + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  std::size_t remaining() const { return len_ - pos_; }

private:
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_frame(const Message& msg) {
  std::vector<std::uint8_t> out;
  put<std::uint32_t>(out, 0);  // length placeholder
  put<std::uint32_t>(out, kWireMagic);
  put<std::uint16_t>(out, kWireVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(msg.type()));
  put<std::int32_t>(out, msg.sender_worker);

  if (const auto* req = std::get_if<BatchRequest>(&msg.body)) {
    put<std::uint32_t>(out, req->from_partition);
    put<std::uint32_t>(out, req->of_partition);
    put<std::uint32_t>(out, req->batch_size);
    put<std::uint64_t>(out, req->request_id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(req->indices.size()));
    for (std::uint64_t idx : req->indices) put<std::uint64_t>(out, idx);
  } else if (const auto* rep = std::get_if<BatchReply>(&msg.body)) {
    put<std::uint64_t>(out, rep->request_id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rep->coords.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rep->coords.cols()));
    for (Eigen::Index r = 0; r < rep->coords.rows(); ++r) {
      for (Eigen::Index c = 0; c < rep->coords.cols(); ++c) {
        put<double>(out, rep->coords(r, c));
      }
    }
    put_f64(out, rep->responses.data(), static_cast<std::size_t>(rep->responses.size()));
  }

  const auto payload_len = static_cast<std::uint32_t>(out.size() - 4);
  std::memcpy(out.data(), &payload_len, 4);
  return out;
}

Message decode_payload(const std::uint8_t* data, std::size_t len) {
  Reader r(data, len);
  if (r.get<std::uint32_t>() != kWireMagic) throw ProtocolError("wire: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kWireVersion) {
    throw ProtocolError("wire: unsupported version " + std::to_string(version));
  }
  const auto type = r.get<std::uint8_t>();
  Message msg;
  msg.sender_worker = r.get<std::int32_t>();

  switch (static_cast<MsgType>(type)) {
    case MsgType::kBatchRequest: {
      BatchRequest req;
      req.from_partition = r.get<std::uint32_t>();
      req.of_partition = r.get<std::uint32_t>();
      req.batch_size = r.get<std::uint32_t>();
      req.request_id = r.get<std::uint64_t>();
      const auto n = r.get<std::uint32_t>();
      req.indices.resize(n);
      for (auto& idx : req.indices) idx = r.get<std::uint64_t>();
      msg.body = std::move(req);
      break;
    }
    case MsgType::kBatchReply: {
      BatchReply rep;
      rep.request_id = r.get<std::uint64_t>();
      const auto rows = r.get<std::uint32_t>();
      const auto cols = r.get<std::uint32_t>();
      rep.coords.resize(rows, cols);
      for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t c = 0; c < cols; ++c) rep.coords(i, c) = r.get<double>();
      }
      rep.responses.resize(rows);
      r.get_f64(rep.responses.data(), rows);
      msg.body = std::move(rep);
      break;
    }
    case MsgType::kDone:
      msg.body = Done{};
      break;
    default:
      throw ProtocolError("wire: unknown message type " + std::to_string(type));
  }
  if (r.remaining() != 0) throw ProtocolError("wire: trailing bytes in message");
  return msg;
}

void FrameDecoder::feed(const std::uint8_t* data, std::size_t len) {
  buf_.insert(buf_.end(), data, data + len);
}

std::optional<Message> FrameDecoder::next() {
  if (buf_.size() - pos_ < 4) return std::nullopt;
  std::uint32_t payload_len;
  std::memcpy(&payload_len, buf_.data() + pos_, 4);
  if (buf_.size() - pos_ - 4 < payload_len) return std::nullopt;
  Message msg = decode_payload(buf_.data() + pos_ + 4, payload_len);
  pos_ += 4 + payload_len;
  if (pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  } else if (pos_ > (1u << 20)) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return msg;
}

}  // namespace psvgp
