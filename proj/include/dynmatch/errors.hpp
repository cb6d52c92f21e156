#pragma once

#include <stdexcept>
#include <string>

namespace dynmatch {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidNetworkError : Error {
  using Error::Error;
};

struct NotAcyclicError : Error {
  using Error::Error;
};

struct NumericalInstabilityError : Error {
  using Error::Error;
};

struct BasisInfeasibleError : Error {
  using Error::Error;
};

struct IllegalDecisionError : Error {
  using Error::Error;
};

struct MixedParityTruncationError : Error {
  using Error::Error;
};

struct NegativeArrivalError : Error {
  using Error::Error;
};

struct UnknownBuiltinError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace dynmatch
