#pragma once

#include <stdexcept>
#include <string>

namespace sprp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter lies outside its mathematical domain (e.g. a nonpositive range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration (sketch sizes, MCMC settings, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed structural input, such as an asymmetric adjacency matrix.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// The covariate matrix is not of full column rank.
class DesignError : public Error {
 public:
  using Error::Error;
};

/// Data files that cannot be parsed or violate the dataset invariants.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// An operation was applied to an object it does not support.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The sketched core matrix has lower numerical rank than the requested target.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(int achieved, int requested)
      : Error("sketched core has numerical rank " + std::to_string(achieved) +
              " below requested rank " + std::to_string(requested)),
        achieved_rank(achieved),
        requested_rank(requested) {}

  int achieved_rank;
  int requested_rank;
};

}  // namespace sprp
