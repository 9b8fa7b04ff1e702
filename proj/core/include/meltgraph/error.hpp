#pragma once

#include <stdexcept>
#include <string>

namespace meltgraph {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A spec or config struct violates its invariants.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Tensor/matrix shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input data breaks a contract, e.g. anomalous nodes offered for training.
class DataContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or degenerate statistics.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or a file is malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace meltgraph
