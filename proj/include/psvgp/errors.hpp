#pragma once

#include <stdexcept>
#include <string>

namespace psvgp {

// Bad user-supplied configuration or dimension mismatch.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Linear algebra failure that survived jitter escalation.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Violation of the worker message protocol (unmatched reply, bad routing).
class ProtocolError : public std::runtime_error {
public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Transport-level failure (peer unreachable, short read, watchdog fired).
class TransportError : public std::runtime_error {
public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace psvgp
