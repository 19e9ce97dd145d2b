#pragma once

#include "psvgp/svgp.hpp"

#include <iosfwd>
#include <string>

namespace psvgp {

// Self-describing binary checkpoint of one VariationalState: named fields
// with explicit dims, row-major little-endian payloads. Round-trips
// bit-exactly. See docs/file-formats.md.
void save_state(const VariationalState& phi, std::ostream& out);
void save_state(const VariationalState& phi, const std::string& path);

VariationalState load_state(std::istream& in);
VariationalState load_state(const std::string& path);

// models/model_<id>.psvgp under `dir`.
std::string model_path(const std::string& dir, std::int64_t partition_id);

}  // namespace psvgp
