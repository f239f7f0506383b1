#pragma once

#include <stdexcept>
#include <string>

namespace aptc {

// Base of every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or non-finite input, or mismatched shapes.
class InputError : public Error {
 public:
  using Error::Error;
};

// Operation called in a state that does not allow it.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corrupt or unreadable checkpoint.
class LoadError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// sysfs write failed.
class ActuationError : public Error {
 public:
  using Error::Error;
};

// sysfs accepted the write but reads back something else.
class HardwareError : public Error {
 public:
  using Error::Error;
};

class SensorError : public Error {
 public:
  using Error::Error;
};

// Request refused by actuation policy (e.g. offlining CPU0).
class PolicyError : public Error {
 public:
  using Error::Error;
};

// External process could not be started.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

// Agent actuation refused because the safety guard is latched.
class SafetyTripped : public Error {
 public:
  using Error::Error;
};

// The guard could not force the board into its safe state.
class SafetyFatal : public Error {
 public:
  using Error::Error;
};

}  // namespace aptc
