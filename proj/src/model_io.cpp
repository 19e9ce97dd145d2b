#include "psvgp/model_io.hpp"

#include "psvgp/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace psvgp {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'V', 'G', 'P', 'S', 'T', '1'};
constexpr std::uint8_t kF64 = 0;
constexpr std::uint8_t kI64 = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated stream");
  return v;
}

void write_field(std::ostream& out, const std::string& name, std::uint8_t dtype,
                 const std::vector<std::uint64_t>& dims, const void* data, std::size_t bytes) {
  write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_raw<std::uint8_t>(out, dtype);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (std::uint64_t d : dims) write_raw<std::uint64_t>(out, d);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

struct Field {
  std::uint8_t dtype = 0;
  std::vector<std::uint64_t> dims;
  std::vector<char> payload;

  std::uint64_t elements() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : dims) n *= d;
    return n;
  }
};

Field read_field(std::istream& in, std::string& name) {
  const auto name_len = read_raw<std::uint16_t>(in);
  name.resize(name_len);
  in.read(name.data(), name_len);
  Field f;
  f.dtype = read_raw<std::uint8_t>(in);
  const auto ndim = read_raw<std::uint32_t>(in);
  f.dims.resize(ndim);
  for (auto& d : f.dims) d = read_raw<std::uint64_t>(in);
  const std::size_t width = 8;
  f.payload.resize(f.elements() * width);
  in.read(f.payload.data(), static_cast<std::streamsize>(f.payload.size()));
  if (!in) throw ParseError("checkpoint: truncated field " + name);
  return f;
}

}  // namespace

void save_state(const VariationalState& phi, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  write_raw<std::uint32_t>(out, 7);

  const std::int64_t pid = phi.partition_id;
  write_field(out, "partition_id", kI64, {}, &pid, sizeof(pid));

  const auto m = static_cast<std::uint64_t>(phi.m());
  const auto d = static_cast<std::uint64_t>(phi.dim());
  // Eigen stores column-major; emit row-major explicitly.
  std::vector<double> z(m * d);
  for (std::uint64_t r = 0; r < m; ++r) {
    for (std::uint64_t c = 0; c < d; ++c) {
      z[r * d + c] = phi.inducing_inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  write_field(out, "inducing_inputs", kF64, {m, d}, z.data(), z.size() * 8);
  write_field(out, "variational_mean", kF64, {m}, phi.variational_mean.data(), m * 8);
  write_field(out, "chol_packed_logdiag", kF64, {static_cast<std::uint64_t>(phi.chol_packed.size())},
              phi.chol_packed.data(), static_cast<std::size_t>(phi.chol_packed.size()) * 8);
  write_field(out, "log_lengthscales", kF64, {d}, phi.kernel.log_lengthscales.data(), d * 8);
  write_field(out, "log_process_variance", kF64, {}, &phi.kernel.log_process_var, 8);
  write_field(out, "log_noise_precision", kF64, {}, &phi.kernel.log_noise_precision, 8);
  if (!out) throw ParseError("checkpoint: write failed");
}

VariationalState load_state(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint: bad magic");
  }
  const auto count = read_raw<std::uint32_t>(in);
  std::map<std::string, Field> fields;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Field f = read_field(in, name);
    fields.emplace(std::move(name), std::move(f));
  }

  auto need = [&](const char* name) -> const Field& {
    auto it = fields.find(name);
    if (it == fields.end()) throw ParseError(std::string("checkpoint: missing field ") + name);
    return it->second;
  };

  VariationalState phi;
  {
    const Field& f = need("partition_id");
    std::memcpy(&phi.partition_id, f.payload.data(), 8);
  }
  const Field& fz = need("inducing_inputs");
  if (fz.dims.size() != 2) throw ParseError("checkpoint: inducing_inputs must be 2-d");
  const auto m = static_cast<Eigen::Index>(fz.dims[0]);
  const auto d = static_cast<Eigen::Index>(fz.dims[1]);
  phi.inducing_inputs.resize(m, d);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      std::memcpy(&phi.inducing_inputs(r, c), fz.payload.data() + (r * d + c) * 8, 8);
    }
  }
  auto read_vec = [&](const char* name, Eigen::Index expect) {
    const Field& f = need(name);
    if (static_cast<Eigen::Index>(f.elements()) != expect) {
      throw ParseError(std::string("checkpoint: unexpected size for ") + name);
    }
    Vec v(expect);
    std::memcpy(v.data(), f.payload.data(), static_cast<std::size_t>(expect) * 8);
    return v;
  };
  phi.variational_mean = read_vec("variational_mean", m);
  phi.chol_packed = read_vec("chol_packed_logdiag", m * (m + 1) / 2);
  phi.kernel.log_lengthscales = read_vec("log_lengthscales", d);
  std::memcpy(&phi.kernel.log_process_var, need("log_process_variance").payload.data(), 8);
  std::memcpy(&phi.kernel.log_noise_precision, need("log_noise_precision").payload.data(), 8);
  return phi;
}

void save_state(const VariationalState& phi, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  save_state(phi, out);
}

VariationalState load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return load_state(in);
}

std::string model_path(const std::string& dir, std::int64_t partition_id) {
  std::ostringstream oss;
  oss << dir << "/model_" << partition_id << ".psvgp";
  return oss.str();
}

}  // namespace psvgp
