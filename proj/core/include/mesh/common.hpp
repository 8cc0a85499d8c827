#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mesh {

#ifdef MESH_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using Timestamp = std::uint32_t;

// Error hierarchy. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or flag combination (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing files, malformed lines, coverage gaps (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or gradient checks (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Violated preconditions inside the library: shape mismatches and the like.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace mesh
