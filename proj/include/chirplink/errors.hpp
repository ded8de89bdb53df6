#ifndef CHIRPLINK_ERRORS_HPP
#define CHIRPLINK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace chirplink {

// Base class for all library errors. Subclasses map onto the failure
// modes of the individual pipeline stages; the CLI translates them into
// process exit codes (config -> 2, missing artifact -> 3, other -> 1).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

class ConfigHashMismatch : public Error {
 public:
  using Error::Error;
};

// Numerics
class NoConvergence : public Error {
 public:
  using Error::Error;
};
class BelowThreshold : public Error {
 public:
  using Error::Error;
};
class StepUnderflow : public Error {
 public:
  using Error::Error;
};
class NonFinite : public Error {
 public:
  using Error::Error;
};
class SingularMatrix : public Error {
 public:
  using Error::Error;
};
class Diverged : public Error {
 public:
  using Error::Error;
};

// Signal bookkeeping
class IncompatibleRates : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class NegativeCurrent : public Error {
 public:
  using Error::Error;
};
class DegenerateInput : public Error {
 public:
  using Error::Error;
};
class DegenerateTarget : public Error {
 public:
  using Error::Error;
};
class NotCalibrated : public Error {
 public:
  using Error::Error;
};
class TruncationError : public Error {
 public:
  using Error::Error;
};
class EmptyClass : public Error {
 public:
  using Error::Error;
};
class EmptyResults : public Error {
 public:
  using Error::Error;
};
class InfeasibleDrive : public Error {
 public:
  using Error::Error;
};

}  // namespace chirplink

#endif  // CHIRPLINK_ERRORS_HPP
