#pragma once

#include <stdexcept>
#include <string>

namespace pcn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shapes disagree with an operation's geometry.
struct ShapeError : Error {
  using Error::Error;
};

// A stated precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Bad architecture name, unknown config key, unsupported op configuration.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace pcn
