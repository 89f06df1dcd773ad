#pragma once

#include <stdexcept>
#include <string>

namespace mcast {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Scenario/configuration is structurally invalid.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Scenario text could not be parsed at all.
class ParseError : public Error {
public:
  using Error::Error;
};

// A requested delivery path does not exist.
class RoutingError : public Error {
public:
  using Error::Error;
};

// An operation was invoked against inconsistent runtime state.
class StateError : public Error {
public:
  using Error::Error;
};

// Group membership precondition violated (duplicate join, unknown leave).
class MembershipError : public Error {
public:
  using Error::Error;
};

// No feasible allocation exists for the given problem.
class InfeasibleError : public Error {
public:
  using Error::Error;
};

// Exhaustive search space exceeds the enumeration guard.
class OracleError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace mcast
