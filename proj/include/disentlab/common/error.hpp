#pragma once

#include <stdexcept>
#include <string>

namespace disentlab {

// Runtime failure inside a pipeline stage (divergence, I/O, numerical trouble).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: invalid config key, out-of-range factor, dimension mismatch...
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace disentlab
